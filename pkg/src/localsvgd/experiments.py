"""Reproducible experiment driver.

A run is described by one JSON-compatible config dict.  ``resolve_config``
merges problem defaults and validates; the resolved dict is what gets
stored in the run manifest, and a manifest alone replays the run with
byte-identical CSV outputs (all randomness is seeded, wall time lives only
in the manifest).

Problems: ``double-banana`` (analytic), ``heat-source`` and ``diffusion``
(time-fractional PDE models, driven by a synthetic-data file).  Methods:
``direct`` (exact gradients; analytic problems only), ``prior-dnn``
(emulator trained once on a prior design), ``ldnn`` (adaptively refined
emulator).
"""

import copy
import csv
import importlib.resources
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .metrics import mmd
from .models import (
    DiffusionCoefficientModel,
    DoubleBananaModel,
    FractionalGrid,
    HeatSourceModel,
    SensorLayout,
    load_data_file,
    save_data_file,
)
from .models.base import ForwardModel, SurrogateModel
from .posterior import (
    GaussianLikelihood,
    LogNormalPrior,
    PosteriorSpec,
    StandardNormalPrior,
    UniformBoxPrior,
    make_score_function,
)
from .refinement import EvalBudget, RefinementConfig, run_lsvgd
from .surrogate import (
    Architecture,
    InputScaler,
    TrainConfig,
    TrainingSet,
    init_params,
    save_params,
    train,
)
from .svgd import AdaGradState, ParticleSet, run_svgd

PROBLEMS = ("double-banana", "heat-source", "diffusion")
METHODS = ("direct", "prior-dnn", "ldnn")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def shipped_diffusion_truth() -> np.ndarray:
    """The repo's recorded true RBF weight vector for the diffusion problem."""
    ref = importlib.resources.files("localsvgd").joinpath("data/diffusion_truth.json")
    payload = json.loads(ref.read_text())
    return np.asarray(payload["weights"])


def default_config(problem: str) -> dict:
    if problem not in PROBLEMS:
        raise ConfigError(f"unknown problem {problem!r}; choose one of {PROBLEMS}")
    cfg = {
        "problem": problem,
        "method": "ldnn",
        "particles": 100,
        "initial_particles": "prior",
        "step_size": 0.05,
        "seeds": {"particles": 1, "init": 2, "train": 3, "noise": 4, "design": 5},
        "refinement": {
            "q_max": 5,
            "radius": 0.2,
            "tol": 1e-2,
            "rho": 0.8,
            "i_max": 30,
            "t_inner": 10,
        },
        "architecture": {"hidden": [20, 20, 20]},
        "training": {
            "learning_rate": 5e-4,
            "reg_constant": 1e-6,
            "epochs_offline": 20000,
            "epochs_refine": 8000,
            "batch_size": None,
        },
        "initial_design": {"count": 10, "sampling": "prior", "lo": None, "hi": None},
        "output_dir": None,
    }
    if problem == "heat-source":
        cfg["grid"] = {"m": 24, "dt": 0.01, "alpha": 0.5, "final_time": 1.0}
        cfg["fine_factor"] = 2
        cfg["noise_std"] = 0.2
        cfg["true_parameter"] = [0.7, 0.8]
        cfg["data_file"] = None
    elif problem == "diffusion":
        cfg["grid"] = {"m": 24, "dt": 0.01, "alpha": 0.5, "final_time": 1.0}
        cfg["fine_factor"] = 2
        cfg["noise_std"] = 0.01
        cfg["true_parameter"] = shipped_diffusion_truth().tolist()
        cfg["data_file"] = None
        cfg["refinement"]["q_max"] = 10
        cfg["architecture"]["hidden"] = [50, 50, 50]
        cfg["initial_design"]["count"] = 100
    return cfg


def _merge(base: dict, override: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"unknown config field {path + key!r}")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = _merge(base[key], val, path + key + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve_config(raw: dict) -> dict:
    """Merge user fields over problem defaults and validate the result."""
    if "problem" not in raw:
        raise ConfigError("config must name a problem")
    cfg = _merge(default_config(raw["problem"]), raw)
    if cfg["method"] not in METHODS:
        raise ConfigError(f"unknown method {cfg['method']!r}; choose one of {METHODS}")
    if cfg["method"] == "direct" and cfg["problem"] != "double-banana":
        raise ConfigError("direct method needs an exact Jacobian; only double-banana exposes one")
    if cfg["particles"] < 2:
        raise ConfigError("need at least 2 particles")
    design = cfg["initial_design"]
    if design["sampling"] not in ("prior", "uniform-box"):
        raise ConfigError(f"unknown design sampling {design['sampling']!r}")
    if design["sampling"] == "uniform-box" and (design["lo"] is None or design["hi"] is None):
        raise ConfigError("uniform-box design needs lo and hi")
    RefinementConfig(**cfg["refinement"])  # field validation
    if cfg["problem"] != "double-banana" and cfg.get("data_file") is None and cfg["method"] != "direct":
        pass  # checked at run time so generate-data configs stay valid
    return cfg


@dataclass
class ProblemSetup:
    prior: object
    likelihood: GaussianLikelihood
    model: ForwardModel
    arch: Architecture
    scaler: InputScaler
    true_parameter: Optional[np.ndarray]


def _sensor_layout(problem: str) -> SensorLayout:
    if problem == "heat-source":
        return SensorLayout.uniform(3, [0.25, 0.75])
    return SensorLayout.uniform(5, [0.25, 0.75, 1.0])


def build_exact_model(cfg: dict) -> ForwardModel:
    problem = cfg["problem"]
    if problem == "double-banana":
        return DoubleBananaModel()
    grid = FractionalGrid(**cfg["grid"])
    layout = _sensor_layout(problem)
    cls = HeatSourceModel if problem == "heat-source" else DiffusionCoefficientModel
    return cls(grid, layout)


def build_problem(cfg: dict) -> ProblemSetup:
    problem = cfg["problem"]
    model = build_exact_model(cfg)
    if problem == "double-banana":
        prior = StandardNormalPrior(2)
        likelihood = GaussianLikelihood(np.array([np.log(30.0)]), 0.3)
        truth = None
    else:
        if cfg.get("data_file") is None:
            raise ConfigError(f"problem {problem!r} needs a data_file (run generate-data first)")
        payload = load_data_file(cfg["data_file"])
        if payload["problem"] != model.name:
            raise ConfigError(
                f"data file holds {payload['problem']!r} observations, config wants {model.name!r}"
            )
        model = payload["model_cls"](payload["grid_obj"], payload["layout_obj"])
        prior = (
            UniformBoxPrior([0.0, 0.0], [1.0, 1.0])
            if problem == "heat-source"
            else LogNormalPrior(9)
        )
        likelihood = GaussianLikelihood(payload["observations"], payload["noise_std"])
        truth = payload["true_parameter"]
    shift, scale = prior.standardizer()
    arch = Architecture(
        input_dim=model.input_dim,
        output_dim=model.output_dim,
        hidden=tuple(cfg["architecture"]["hidden"]),
    )
    return ProblemSetup(prior, likelihood, model, arch, InputScaler(shift, scale), truth)


def generate_data(cfg: dict, out_path) -> dict:
    """Write the synthetic-data JSON for a PDE problem (``generate-data``)."""
    cfg = resolve_config(cfg)
    if cfg["problem"] == "double-banana":
        raise ConfigError("double-banana is analytic; no data file to generate")
    model = build_exact_model(cfg)
    return save_data_file(
        out_path,
        model,
        np.asarray(cfg["true_parameter"], dtype=float),
        cfg["noise_std"],
        cfg["fine_factor"],
        cfg["seeds"]["noise"],
    )


def sample_initial_design(cfg: dict, prior) -> np.ndarray:
    rng = np.random.default_rng(cfg["seeds"]["design"])
    design = cfg["initial_design"]
    n = design["count"]
    if design["sampling"] == "prior":
        return prior.sample(rng, n)
    lo = np.asarray(design["lo"], dtype=float)
    hi = np.asarray(design["hi"], dtype=float)
    return rng.uniform(lo, hi, size=(n, lo.shape[0]))


def checkpoint_iterations(cfg: dict) -> list[int]:
    ref = cfg["refinement"]
    total = ref["i_max"] * ref["t_inner"]
    marks = set(range(ref["t_inner"], total + 1, ref["t_inner"])) | {10, 100, total}
    return sorted(m for m in marks if 0 < m <= total)


def _offline_surrogate(cfg: dict, setup: ProblemSetup):
    """Initial design, its exact evaluations, and untrained parameters."""
    inputs = sample_initial_design(cfg, setup.prior)
    outputs = setup.model.evaluate_batch(inputs)
    trainset = TrainingSet(inputs, outputs)
    params0 = init_params(setup.arch, cfg["seeds"]["init"], scaler=setup.scaler)
    return trainset, params0


def _train_cfgs(cfg: dict) -> tuple[TrainConfig, TrainConfig]:
    tr = cfg["training"]
    offline = TrainConfig(
        learning_rate=tr["learning_rate"],
        reg_constant=tr["reg_constant"],
        epochs=tr["epochs_offline"],
        batch_size=tr["batch_size"],
    )
    refine = TrainConfig(
        learning_rate=tr["learning_rate"],
        reg_constant=tr["reg_constant"],
        epochs=tr["epochs_refine"],
        batch_size=tr["batch_size"],
    )
    return offline, refine


@dataclass
class RunResult:
    checkpoints: dict  # iteration -> (N, d) array
    final_particles: np.ndarray
    budget: EvalBudget
    trace: list
    surrogate: Optional[object]


def _run_segments(cfg, setup, score, particles, state) -> dict:
    """Advance the transport loop, snapshotting at the checkpoint cadence."""
    checkpoints = {}
    current = 0
    for mark in checkpoint_iterations(cfg):
        particles, state = run_svgd(particles, score, mark - current, state)
        checkpoints[mark] = particles.points.copy()
        current = mark
    return checkpoints


def execute_run(cfg: dict, setup: Optional[ProblemSetup] = None) -> RunResult:
    """Run the configured pipeline and return in-memory results."""
    if setup is None:
        setup = build_problem(cfg)
    method = cfg["method"]
    rng_particles = np.random.default_rng(cfg["seeds"]["particles"])
    particles = ParticleSet(setup.prior.sample(rng_particles, cfg["particles"]))
    state = AdaGradState(master_step=cfg["step_size"])
    ref_cfg = RefinementConfig(**cfg["refinement"])

    if method == "direct":
        if not setup.model.has_jacobian:
            raise ConfigError("direct method needs an exact Jacobian")
        start = setup.model.eval_count
        spec = PosteriorSpec(setup.prior, setup.likelihood, setup.model)
        checkpoints = _run_segments(cfg, setup, make_score_function(spec), particles, state)
        budget = EvalBudget(online_evals=setup.model.eval_count - start, offline_evals=0)
        final = checkpoints[max(checkpoints)]
        return RunResult(checkpoints, final, budget, [], None)

    offline_cfg, refine_cfg = _train_cfgs(cfg)
    trainset, params0 = _offline_surrogate(cfg, setup)

    if method == "prior-dnn":
        params = train(params0, trainset, offline_cfg, cfg["seeds"]["train"])
        spec = PosteriorSpec(setup.prior, setup.likelihood, SurrogateModel(params))
        checkpoints = _run_segments(cfg, setup, make_score_function(spec), particles, state)
        budget = EvalBudget(online_evals=0, offline_evals=trainset.size)
        final = checkpoints[max(checkpoints)]
        return RunResult(checkpoints, final, budget, [], params)

    online_start = setup.model.eval_count
    final_particles, params, trainset, budget, trace = run_lsvgd(
        particles,
        trainset,
        setup.model,
        setup.prior,
        setup.likelihood,
        ref_cfg,
        cfg["seeds"]["train"],
        surrogate_init=params0,
        offline_train_cfg=offline_cfg,
        refine_train_cfg=refine_cfg,
        adagrad=state,
    )
    assert setup.model.eval_count - online_start == budget.online_evals
    checkpoints = {rec["total_iterations"]: rec["particles"] for rec in trace}
    total = ref_cfg.i_max * ref_cfg.t_inner
    if total not in checkpoints:
        checkpoints[total] = final_particles.points.copy()
    return RunResult(checkpoints, final_particles.points.copy(), budget, trace, params)


def write_particles_csv(path, iteration: int, points: np.ndarray) -> None:
    points = np.atleast_2d(points)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "particle"] + [f"x{i + 1}" for i in range(points.shape[1])])
        for idx, row in enumerate(points):
            writer.writerow([iteration, idx] + [float(v) for v in row])


def read_particles_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 2
        rows = [[float(v) for v in line[2 : 2 + d]] for line in reader]
    return np.asarray(rows)


def _trace_record_json(rec: dict) -> dict:
    return {
        "outer_iteration": rec["outer_iteration"],
        "total_iterations": rec["total_iterations"],
        "error": rec["error"],
        "design_point": [float(v) for v in rec["design_point"]],
        "refined": rec["refined"],
        "points_added": [[float(v) for v in p] for p in rec["points_added"]],
        "n_added": len(rec["points_added"]),
        "pool_size": rec["pool_size"],
        "radius": rec["radius"],
        "radius_shrunk": rec["radius_shrunk"],
        "retrained": rec["retrained"],
        "single_point_no_retrain": rec["single_point_no_retrain"],
        "degenerate_indicator": rec["degenerate_indicator"],
        "online_evals": rec["online_evals"],
    }


def run_experiment(raw_cfg: dict, out_dir=None, reference_file=None) -> dict:
    """Execute a run and write manifest, checkpoints, trace, budget, metrics.

    Returns the manifest dict.  Rerunning with the same resolved config
    reproduces every CSV byte-for-byte.
    """
    cfg = resolve_config(raw_cfg)
    out = Path(out_dir) if out_dir is not None else Path(cfg["output_dir"] or ".")
    out.mkdir(parents=True, exist_ok=True)
    cfg["output_dir"] = str(out)

    t0 = time.perf_counter()
    result = execute_run(cfg)
    wall = time.perf_counter() - t0

    for iteration in sorted(result.checkpoints):
        write_particles_csv(
            out / f"particles_{iteration:06d}.csv", iteration, result.checkpoints[iteration]
        )
    if result.trace:
        with open(out / "trace.jsonl", "w") as fh:
            for rec in result.trace:
                fh.write(json.dumps(_trace_record_json(rec)) + "\n")
    if result.surrogate is not None:
        save_params(result.surrogate, out / "surrogate.json")

    budget = {
        "online_evals": result.budget.online_evals,
        "offline_evals": result.budget.offline_evals,
    }
    if cfg["method"] == "ldnn":
        budget["bound"] = RefinementConfig(**cfg["refinement"]).eval_bound
    with open(out / "budget.json", "w") as fh:
        json.dump(budget, fh, indent=1)

    metrics_rows = []
    if reference_file is not None:
        reference = read_particles_csv(reference_file)
        from .kernel import median_bandwidth

        h = median_bandwidth(reference)
        for iteration in sorted(result.checkpoints):
            metrics_rows.append((iteration, mmd(result.checkpoints[iteration], reference, h)))
        with open(out / "metrics.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "mmd"])
            writer.writerows(metrics_rows)

    manifest = {
        "config": cfg,
        "version": __version__,
        "wall_time_s": wall,
        "budget": budget,
        "final_iteration": max(result.checkpoints),
        "posterior_mean": [float(v) for v in result.final_particles.mean(axis=0)],
        "reference_file": str(reference_file) if reference_file else None,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    return manifest


def load_manifest(run_dir) -> dict:
    with open(Path(run_dir) / "manifest.json") as fh:
        return json.load(fh)


def compare_runs(run_dirs, reference_file, out_dir=None) -> list[dict]:
    """Tabulate final MMD, eval counts, and wall time across finished runs.

    All runs must share the problem and particle count.  Emits
    ``comparison.csv`` and per-iteration ``mmd_curves.csv`` when ``out_dir``
    is given.
    """
    from .kernel import median_bandwidth

    reference = read_particles_csv(reference_file)
    h = median_bandwidth(reference)

    manifests = [load_manifest(d) for d in run_dirs]
    problems = {m["config"]["problem"] for m in manifests}
    counts = {m["config"]["particles"] for m in manifests}
    if len(problems) > 1 or len(counts) > 1:
        raise ConfigError(f"runs disagree on problem/particles: {problems}, {counts}")

    rows, curves = [], []
    for run_dir, manifest in zip(run_dirs, manifests):
        run_dir = Path(run_dir)
        ckpts = sorted(run_dir.glob("particles_*.csv"))
        per_iter = []
        for path in ckpts:
            iteration = int(path.stem.split("_")[1])
            per_iter.append((iteration, mmd(read_particles_csv(path), reference, h)))
        per_iter.sort()
        final_iter, final_mmd = per_iter[-1]
        rows.append(
            {
                "method": manifest["config"]["method"],
                "run_dir": str(run_dir),
                "final_iteration": final_iter,
                "final_mmd": final_mmd,
                "online_evals": manifest["budget"]["online_evals"],
                "offline_evals": manifest["budget"]["offline_evals"],
                "wall_time_s": manifest["wall_time_s"],
            }
        )
        curves.extend(
            {"method": manifest["config"]["method"], "iteration": it, "mmd": v}
            for it, v in per_iter
        )

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "comparison.csv", "w", newline="") as fh:
            writer = csv.DictWriter(
                fh,
                fieldnames=[
                    "method",
                    "run_dir",
                    "final_iteration",
                    "final_mmd",
                    "online_evals",
                    "offline_evals",
                    "wall_time_s",
                ],
            )
            writer.writeheader()
            writer.writerows(rows)
        with open(out / "mmd_curves.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["method", "iteration", "mmd"])
            writer.writeheader()
            writer.writerows(curves)
    return rows


def double_banana_reference(n_particles=1000, n_iterations=2000, seed=0, step_size=0.1) -> np.ndarray:
    """Long direct transport run used as the reference sample set."""
    prior = StandardNormalPrior(2)
    spec = PosteriorSpec(prior, GaussianLikelihood(np.array([np.log(30.0)]), 0.3), DoubleBananaModel())
    particles = ParticleSet(prior.sample(np.random.default_rng(seed), n_particles))
    final, _ = run_svgd(
        particles, make_score_function(spec), n_iterations, AdaGradState(master_step=step_size)
    )
    return final.points


def heat_source_grid_reference(data_file, grid_n=40, n_samples=2000, seed=0) -> np.ndarray:
    """Importance resampling of the exact 2-D posterior from a tensor grid.

    Evaluates the exact (coarse-solver) posterior on a ``grid_n x grid_n``
    grid over the unit square, resamples nodes proportionally to the
    density, and jitters within cells.  Costs ``grid_n^2`` forward solves.
    """
    payload = load_data_file(data_file)
    model = payload["model_cls"](payload["grid_obj"], payload["layout_obj"])
    lik = GaussianLikelihood(payload["observations"], payload["noise_std"])
    ticks = (np.arange(grid_n) + 0.5) / grid_n
    xs, ys = np.meshgrid(ticks, ticks, indexing="ij")
    nodes = np.stack([xs.ravel(), ys.ravel()], axis=1)
    log_post = np.array([lik.log_density(model.evaluate(p)) for p in nodes])
    weights = np.exp(log_post - log_post.max())
    weights /= weights.sum()
    rng = np.random.default_rng(seed)
    idx = rng.choice(nodes.shape[0], size=n_samples, p=weights)
    jitter = rng.uniform(-0.5 / grid_n, 0.5 / grid_n, size=(n_samples, 2))
    return nodes[idx] + jitter
