"""Bridge graphs of Markov chains: coupled paths from every state at every time.

The package simulates the Doeblin graph of a chain driven by reproducible
keyed noise, builds finite windows of its bridge graph, estimates the
bi-recurrent path, runs coupling from the past, computes the slice chain
exactly and checks mass-transport identities by simulation.
"""

from .bridge import (
    BiRecurrentEstimate,
    BridgeSlab,
    MortalityDecomposition,
    Status,
    bridge_intersection,
    build_slab,
    decompose_mortality,
    estimate_birecurrent,
    slab_components,
)
from .cftp import CouplingResult, backward_coupling_time, cftp_sample, coupling, empirical_pi_check
from .doeblin import (
    estimate_graph_components,
    follow,
    merge_time,
    predict_components,
    return_time,
    state_path,
)
from .driver import (
    BUILTIN_NAMES,
    ChainSpec,
    NoiseMode,
    NoiseOracle,
    builtin,
    draw,
    load_spec,
    make_oracle,
    validate_spec,
)
from .errors import (
    BridgeGraphError,
    CouplingFailure,
    NotApplicable,
    NotReady,
    SpecError,
    UsageError,
)
from .mtp import (
    REGISTRY,
    TransportSpec,
    canonical_ball,
    cycle_visit_means,
    estimate_transport,
    estimate_transports,
    get_transport,
    lwc_distance,
    sample_root_sizebiased,
)
from .renewal import (
    PBMatrix,
    enumerate_SB,
    evolve_slice,
    pb_entry,
    pb_stationary,
    slice_hit_times,
)

__version__ = "0.1.0"
