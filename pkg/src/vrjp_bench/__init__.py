"""Simulation, trajectory densities and partial-exchangeability checks for
vertex-reinforced jump processes and related linearly reinforced jump processes."""

from .characterization import (
    CanonicalForm, NotReducibleError, canonicalize, characterize, equivalent_pairs,
    exchangeability_report, freedman_check, lambda_estimate, reversibility_check,
)
from .config import ConfigError, Model, load_config, model_from_config
from .density import (
    DensityBreakdown, bin_probability, density_split, log_density_vrjp, log_density_x, log_density_y,
    log_jacobian, log_product_closed_form,
)
from .dynamics import RateError, RateFamily, TimeScale, TimeScaleError, check_compatible, rate_eval, timescale_eval
from .graph import (
    Graph, GraphError, complete_graph, cycle_graph, neighbors, path_graph, validate_strongly_connected,
)
from .simulator import (
    McEstimate, SimConfig, SimulationError, SkeletonEvent, StringEvent, mc_event_probabilities,
    mc_event_probability, simulate, simulate_many,
)
from .trajectory import (
    Trajectory, TrajectoryError, blocks_at, discretize, excursion_shuffle, is_equivalent, local_times,
    reorder_blocks, time_change, transition_counts,
)

__version__ = "0.1.0"
