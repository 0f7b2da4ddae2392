"""Reduced Lie-group dynamics, vortex manifolds and bounded-control steering on SO(n)."""

__version__ = "0.1.0"

from . import control, inertia, liecore, reduction, stiefel_top, vortex  # noqa: E402,F401
from .control import ControlSystem, lie_rank, steer, two_generator_check, vortex_transfer  # noqa: E402,F401
from .inertia import InertiaOperator  # noqa: E402,F401
from .reduction import ReducedSystem, integrate  # noqa: E402,F401
from .stiefel_top import ControlSignal, StiefelState  # noqa: E402,F401
from .vortex import VortexBasis, darboux_decompose, isotropy_basis  # noqa: E402,F401
