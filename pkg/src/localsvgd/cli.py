"""Command-line driver: generate-data, run, compare, version.

Config comes from a JSON file (``--config``) with individual fields
overridable by flags.  Exit codes: 0 success, 2 configuration error,
1 runtime failure.  The ``LOCALSVGD_OUTPUT_ROOT`` environment variable
re-roots relative output paths.
"""

import argparse
import json
import os
import sys
import traceback
from pathlib import Path

from . import __version__
from .experiments import (
    ConfigError,
    compare_runs,
    generate_data,
    resolve_config,
    run_experiment,
)

# flag name -> config path
_OVERRIDES = {
    "problem": ("problem",),
    "method": ("method",),
    "particles": ("particles",),
    "step_size": ("step_size",),
    "i_max": ("refinement", "i_max"),
    "t_inner": ("refinement", "t_inner"),
    "tol": ("refinement", "tol"),
    "q_max": ("refinement", "q_max"),
    "radius": ("refinement", "radius"),
    "rho": ("refinement", "rho"),
    "learning_rate": ("training", "learning_rate"),
    "epochs_offline": ("training", "epochs_offline"),
    "epochs_refine": ("training", "epochs_refine"),
    "design_count": ("initial_design", "count"),
    "data_file": ("data_file",),
    "noise_std": ("noise_std",),
    "fine_factor": ("fine_factor",),
    "grid_m": ("grid", "m"),
    "grid_dt": ("grid", "dt"),
    "grid_alpha": ("grid", "alpha"),
    "seed_particles": ("seeds", "particles"),
    "seed_init": ("seeds", "init"),
    "seed_train": ("seeds", "train"),
    "seed_noise": ("seeds", "noise"),
    "seed_design": ("seeds", "design"),
}


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file (or a run manifest)")
    parser.add_argument("--problem", choices=["double-banana", "heat-source", "diffusion"])
    parser.add_argument("--method", choices=["direct", "prior-dnn", "ldnn"])
    parser.add_argument("--particles", type=int)
    parser.add_argument("--step-size", type=float, dest="step_size")
    parser.add_argument("--i-max", type=int, dest="i_max")
    parser.add_argument("--t-inner", type=int, dest="t_inner")
    parser.add_argument("--tol", type=float)
    parser.add_argument("--q-max", type=int, dest="q_max")
    parser.add_argument("--radius", type=float)
    parser.add_argument("--rho", type=float)
    parser.add_argument("--learning-rate", type=float, dest="learning_rate")
    parser.add_argument("--epochs-offline", type=int, dest="epochs_offline")
    parser.add_argument("--epochs-refine", type=int, dest="epochs_refine")
    parser.add_argument("--design-count", type=int, dest="design_count")
    parser.add_argument("--data-file", dest="data_file")
    parser.add_argument("--noise-std", type=float, dest="noise_std")
    parser.add_argument("--fine-factor", type=int, dest="fine_factor")
    parser.add_argument("--grid-m", type=int, dest="grid_m")
    parser.add_argument("--grid-dt", type=float, dest="grid_dt")
    parser.add_argument("--grid-alpha", type=float, dest="grid_alpha")
    for name in ("particles", "init", "train", "noise", "design"):
        parser.add_argument(f"--seed-{name}", type=int, dest=f"seed_{name}")


def _config_from_args(args) -> dict:
    cfg = {}
    if args.config is not None:
        with open(args.config) as fh:
            loaded = json.load(fh)
        cfg = loaded["config"] if "config" in loaded else loaded  # accept manifests
    for flag, path in _OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        node = cfg
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value
    if "problem" not in cfg:
        raise ConfigError("no problem given (use --config or --problem)")
    return cfg


def _rooted(path) -> Path:
    path = Path(path)
    root = os.environ.get("LOCALSVGD_OUTPUT_ROOT")
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def _cmd_generate_data(args) -> int:
    cfg = _config_from_args(args)
    out = _rooted(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = generate_data(cfg, out)
    print(f"wrote {len(payload['observations'])} observations to {out}")
    return 0


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    resolved = resolve_config(cfg)  # validate before any compute
    out = _rooted(args.out) if args.out else _rooted(resolved["output_dir"] or "run-output")
    try:
        manifest = run_experiment(resolved, out_dir=out, reference_file=args.reference)
    except ConfigError:
        raise
    except Exception as exc:  # runtime failure: record it next to the outputs
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "run_error.json", "w") as fh:
            json.dump({"error": repr(exc), "config": resolved}, fh, indent=1)
        raise
    print(
        f"{resolved['method']} on {resolved['problem']}: "
        f"online={manifest['budget']['online_evals']} "
        f"offline={manifest['budget']['offline_evals']} "
        f"wall={manifest['wall_time_s']:.1f}s -> {out}"
    )
    return 0


def _cmd_compare(args) -> int:
    out = _rooted(args.out) if args.out else None
    rows = compare_runs([_rooted(d) for d in args.runs], args.reference, out)
    header = f"{'method':<12}{'final_mmd':>12}{'online':>8}{'offline':>9}{'wall_s':>9}"
    print(header)
    for row in rows:
        print(
            f"{row['method']:<12}{row['final_mmd']:>12.5f}{row['online_evals']:>8}"
            f"{row['offline_evals']:>9}{row['wall_time_s']:>9.1f}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="localsvgd",
        description="Particle-based posterior sampling with adaptively refined emulators",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate-data", help="write a synthetic-data JSON for a PDE problem")
    _add_override_flags(gen)
    gen.add_argument("--out", required=True, help="output data file")
    gen.set_defaults(func=_cmd_generate_data)

    run = sub.add_parser("run", help="execute one experiment pipeline")
    _add_override_flags(run)
    run.add_argument("--out", help="output directory (default from config)")
    run.add_argument("--reference", help="reference particle CSV for per-iteration MMD")
    run.set_defaults(func=_cmd_run)

    cmp_ = sub.add_parser("compare", help="tabulate finished runs against a reference")
    cmp_.add_argument("--runs", nargs="+", required=True, help="run directories")
    cmp_.add_argument("--reference", required=True, help="reference particle CSV")
    cmp_.add_argument("--out", help="directory for comparison.csv and mmd_curves.csv")
    cmp_.set_defaults(func=_cmd_compare)

    ver = sub.add_parser("version", help="print the package version")
    ver.set_defaults(func=lambda args: (print(__version__), 0)[1])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        traceback.print_exc()
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
