"""Right-tail probabilities of Gaussian quadratic forms ``Q = X'AX``.

Typical use::

    from qform import QuadraticFormSpec, moments, fit, tail_probability

    spec = QuadraticFormSpec(sigma=S, mu=m)      # A defaults to the identity
    r = fit("MR", moments(spec))
    p = tail_probability(q, r)
"""

from .distributions import FParams, GammaParams, NoncentralChiSqParams
from .errors import QFormError
from .exact import InversionSettings, exact_tail, imhof, mc_tail
from .matchers import (
    ALL_METHODS,
    APPROXIMATE_METHODS,
    MatchResult,
    fit,
    match_hbe,
    match_ltz,
    match_ltz4,
    match_me,
    match_mr,
    match_sw,
    match_wood,
    tail_probability,
)
from .moments import (
    Cumulants,
    StandardizedMoments,
    cumulants,
    cumulants_fast_trace,
    cumulants_from_spectrum,
    cumulants_naive_trace,
    mean_variance_only,
    moments,
    standardize,
)
from .reduction import QuadraticFormSpec, SpectralForm, evaluate, evaluate_spectral, reduce

__version__ = "0.1.0"
