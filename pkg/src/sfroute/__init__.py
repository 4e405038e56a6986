"""Packet routing and jamming on Barabási-Albert scale-free networks."""

__version__ = "0.1.0"

from .graph import Network, build_ba, canonical_path, degree_histogram, make_rng  # noqa: E402
from .routing import Kind, Strategy, select_neighbor  # noqa: E402
from .dynamics import MetricSeries, SimConfig, SimState, degree_profile, run  # noqa: E402
from .analysis import estimate_eta, find_beta_c  # noqa: E402

__all__ = [
    "__version__",
    "Network",
    "build_ba",
    "canonical_path",
    "degree_histogram",
    "make_rng",
    "Kind",
    "Strategy",
    "select_neighbor",
    "MetricSeries",
    "SimConfig",
    "SimState",
    "degree_profile",
    "run",
    "estimate_eta",
    "find_beta_c",
]
