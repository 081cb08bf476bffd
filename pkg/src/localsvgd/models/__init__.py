from .base import ForwardModel, SurrogateModel
from .banana import DoubleBananaModel, double_banana_forward, double_banana_jacobian
from .fractional import (
    FractionalGrid,
    SensorLayout,
    HeatSourceModel,
    DiffusionCoefficientModel,
    caputo_l1_coefficients,
    solve_fractional_heat,
    observe,
    permeability_field,
    DIFFUSION_RBF_CENTERS,
    RBF_LENGTH_SCALE,
)
from .synthetic import generate_synthetic_data, save_data_file, load_data_file

__all__ = [
    "ForwardModel",
    "SurrogateModel",
    "DoubleBananaModel",
    "double_banana_forward",
    "double_banana_jacobian",
    "FractionalGrid",
    "SensorLayout",
    "HeatSourceModel",
    "DiffusionCoefficientModel",
    "caputo_l1_coefficients",
    "solve_fractional_heat",
    "observe",
    "permeability_field",
    "DIFFUSION_RBF_CENTERS",
    "RBF_LENGTH_SCALE",
    "generate_synthetic_data",
    "save_data_file",
    "load_data_file",
]
