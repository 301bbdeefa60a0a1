__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .types import ExperimentConfig, FieldParams, TrigTerm, RationalPoint, CAT_MAP  # noqa: E402
from .torus import ToralAutomorphism, OrbitTable, make_automorphism, enumerate_periodic_points  # noqa: E402
from .fields import FieldSpec, FieldSample, SpectralBasis, assemble_roof  # noqa: E402
from .trace import flat_trace, xi_for_regime  # noqa: E402
