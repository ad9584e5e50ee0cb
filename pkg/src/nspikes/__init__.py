"""Least-energy spike solutions of competitive elliptic systems under symmetry constraints."""

from .asymptotics import competitor_energy, detect_spikes, epsilon_sweep, segregation_metrics
from .config import format_config, parse_config
from .energy import energy, nehari_residuals
from .minimizer import SolveOptions, SolveResult, initial_state, minimize, polish
from .model import Field, Grid, SystemParams, SystemState, read_field, validate_params, write_field
from .nehari import project_to_nehari
from .presets import preset
from .reference import equivariant_single_ground_state, radial_ground_state, soliton_1d
from .symmetry import equivariant_project, preset_symmetry

__version__ = "0.1.0"
