"""Critical percolation on random regular graphs via the half-edge exploration walk."""

from .config_model import (
    DegreeSequence, Matching, MultiGraph, circulant_regular, contract, is_simple,
    percolate, sample_matching, sample_simple_regular,
)
from .errors import (
    InvalidInput, NoRoot, OutOfRange, OutOfRegime, PreconditionError, ProcessComplete,
    ResourceError, RRGPercError, SamplingFailure,
)
from .exploration import ExplorationState, explore, init, run_full, step

__version__ = "0.1.0"
