"""Configuration-model random graphs: edge exploration, limit paths,
large-deviation rates and rare-event Monte Carlo."""

__version__ = "0.1.0"

from .ctmc import BandControl, CTPath, importance_weight, log_importance_weight, simulate
from .degree_ld import DegreeConfigTarget, coeff_K, entropy_H, rate_I1, solve_beta
from .degree_model import DegreeModel, build_model, eval_generating, from_distribution, from_sequence
from .eea import ExcursionLog, ExplorationState, eea_run, transition_distribution
from .graph_gen import Multigraph, components_of, enumerate_matchings, uniform_matching
from .lln import LLNPath, lln_ode_oracle, lln_path, phase_and_rho
from .mc import EventSpec, EstimateReport, event_indicator, exact_probability, is_probability, mc_probability
from .rate import PathPair, cost_of_control, ell, feasibility, optimal_band_control, perturb_bands, rate_integral, skorokhod_map
