"""Scale mixtures of multivariate skew-normal distributions.

Canonical forms, closed-form Mardia indices and modes, with Monte-Carlo and
grid-search oracles for checking them.
"""

__version__ = "0.1.0"

from smsn.canonical import (  # noqa: E402
    CanonicalTransform,
    ScatterPair,
    canonical_cp,
    canonical_ics_omega_sigma,
    canonical_ics_sigma_kappa,
    ics_from_scatter,
    verify_canonical,
)
from smsn.distributions import (  # noqa: E402
    Custom,
    Degenerate,
    ScaleMixtureSN,
    SkewNormalParams,
    SkewT,
    Slash,
    affine_transform,
    dist_from_dict,
    make_params,
    marginal_shape,
    sample,
    smsn_density,
    sn_density,
    st_density,
)
from smsn.exceptions import (  # noqa: E402
    ConvergenceError,
    DegeneratePairError,
    MomentNotExistError,
    SMSNError,
    UnsupportedOperationError,
    ValidationError,
)
from smsn.mc_oracle import empirical_mardia, empirical_scatter_pair, grid_mode_search  # noqa: E402
from smsn.mode import ModeResult, smsn_mode, sn_mode, sn_mode_scalar, st_mode, st_mode_scalar  # noqa: E402
from smsn.moments import (  # noqa: E402
    MardiaIndices,
    analytic_kappa,
    canonical_moments,
    mardia_indices,
    mixing_moment,
    smsn_mean,
    smsn_mean_cov,
    sn_mardia,
    st_mardia,
    univariate_indices,
)
