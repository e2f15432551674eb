"""Phase-type and linear-phase-type laws for functional principal components."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DimensionError,
    DivergenceError,
    DomainError,
    FitError,
    IncompatibleSlopeError,
    LphError,
    NumericError,
    RepresentationError,
    SingularMatrixError,
    SymmetryError,
)
from .phasetype import PhaseType, erlang, exponential, hypoexponential, ph_new, ph_scale, ph_sum  # noqa: E402
from .lph import (  # noqa: E402
    LinearPhaseType,
    ProcessPointLaw,
    lph_from_ph,
    lph_scale,
    lph_shift,
    lph_sum,
    process_point_law,
)
from .emfit import EmConfig, EmTrace, em_estep_integrals, em_fit, loglik  # noqa: E402
from .fpca import BasisSpec, CurveSet, KLModel, eval_basis, fpca_fit, kl_truncate, psmooth, register  # noqa: E402
