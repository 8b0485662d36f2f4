"""ciskit: controlled invariant sets of discrete-time control-affine systems
via interval branch-and-bound refinement with polytopic reach-set
over-approximations, plus continuous invariance-enforcing input sets."""

from .algorithms import (
    ControllerTable,
    RunResult,
    RunStats,
    VerifyReport,
    accelerated,
    baseline_sampled,
    brute_force_cis,
    classify,
    feasible_inputs,
    fixpoint,
    symmetric_difference_volume,
    under_I,
    verify_invariance,
)
from .config import ConfigError, RunConfig, dumps_config, load_config
from .dynamics import (
    AffineDecomposition,
    SystemModel,
    WidthBounds,
    decompose_f0,
    decompose_g,
    make_decomposition,
    reach_P0,
    reach_fixed,
    reach_full,
    width_bounds,
)
from .expr import eval_gradient, eval_gradient_interval, eval_interval, eval_real, parse
from .geometry import Halfspace, Polytope, PolyUnion
from .intervals import Box, BoxUnion, DomainError, Interval, IntervalMatrix

__version__ = "0.1.0"
