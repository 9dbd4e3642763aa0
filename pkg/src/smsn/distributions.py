"""
Skew-normal parameters, mixing distributions and scale-mixture densities.

A d-dimensional skew-normal variate ``Z ~ SN_d(xi, Omega, alpha)`` has density

.. math::
    f(z) = 2 \\phi_d(z - \\xi; \\Omega) \\Phi(\\alpha^T \\omega^{-1} (z - \\xi))

where ``omega`` is the diagonal matrix of scale parameters and
``Omegabar = omega^{-1} Omega omega^{-1}`` is a correlation matrix.  A scale
mixture is ``Y = xi + omega S Z0`` with ``Z0 ~ SN_d(0, Omegabar, alpha)`` and
``S > 0`` an independent scalar (see :class:`MixingDistribution`).

Arrays stored on the frozen dataclasses are made read-only so instances can be
shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, special

from smsn.exceptions import (
    MomentNotExistError,
    UnsupportedOperationError,
    ValidationError,
)

SPD_RTOL = 1e-10
SYMMETRY_RTOL = 1e-10
COND_MAX = 1e12
QUAD_EPSREL = 1e-10

_LOG_2PI = math.log(2.0 * math.pi)

RandomLike = Union[None, int, np.random.Generator]


def _frozen(a: ArrayLike) -> NDArray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def as_generator(rng: RandomLike) -> np.random.Generator:
    """Return a ``numpy.random.Generator``; ints are used as seeds."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def check_spd(M: NDArray, name: str = "matrix") -> NDArray:
    """Symmetrize ``M`` and reject it unless it is positive definite.

    The threshold is scale free: the smallest eigenvalue must exceed
    ``SPD_RTOL`` times the largest absolute eigenvalue.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValidationError(f"{name} has non-finite entries")
    scale = max(np.max(np.abs(M)), np.finfo(float).tiny)
    if np.max(np.abs(M - M.T)) > SYMMETRY_RTOL * scale:
        raise ValidationError(f"{name} is not symmetric")
    M = 0.5 * (M + M.T)
    eig = np.linalg.eigvalsh(M)
    tol = SPD_RTOL * np.max(np.abs(eig))
    if eig[0] <= tol:
        raise ValidationError(
            f"{name} is not positive definite: smallest eigenvalue {float(eig[0]):.6g} <= {float(tol):.3g}"
        )
    return M


# ---------------------------------------------------------------------------
# skew-normal parameters
# ---------------------------------------------------------------------------


def delta_from_alpha(alpha: ArrayLike, Omegabar: ArrayLike) -> NDArray:
    """Map the shape vector ``alpha`` to ``delta = Omegabar alpha / sqrt(1 + alpha' Omegabar alpha)``."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    Omegabar = np.atleast_2d(np.asarray(Omegabar, dtype=float))
    if Omegabar.shape != (alpha.size, alpha.size):
        raise ValidationError("alpha and Omegabar dimensions disagree")
    Oa = Omegabar @ alpha
    return Oa / math.sqrt(1.0 + float(alpha @ Oa))


def alpha_from_delta(delta: ArrayLike, Omegabar: ArrayLike) -> NDArray:
    """Inverse of :func:`delta_from_alpha`.

    Raises
    ------
    ValidationError
        If ``delta' Omegabar^{-1} delta >= 1`` (outside the admissible region).
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    Omegabar = np.atleast_2d(np.asarray(Omegabar, dtype=float))
    if Omegabar.shape != (delta.size, delta.size):
        raise ValidationError("delta and Omegabar dimensions disagree")
    Oinv_d = np.linalg.solve(Omegabar, delta)
    q = float(delta @ Oinv_d)
    if q >= 1.0:
        raise ValidationError(
            f"delta is outside the admissible region: delta' Omegabar^-1 delta = {q!r} >= 1"
        )
    return Oinv_d / math.sqrt(1.0 - q)


@dataclass(frozen=True, eq=False)
class SkewNormalParams:
    """Parameters ``(xi, Omega, alpha)`` of ``SN_d`` plus derived quantities.

    Build instances with :func:`make_params`, which validates the inputs.

    Attributes
    ----------
    xi, Omega, alpha : ndarray
        Location ``(d,)``, scale ``(d, d)`` and shape ``(d,)``.
    omega : ndarray
        Square roots of ``diag(Omega)`` as a ``(d,)`` vector (the diagonal of
        the scale matrix).
    Omegabar : ndarray
        Correlation matrix ``omega^{-1} Omega omega^{-1}`` with unit diagonal.
    delta : ndarray
        ``Omegabar alpha / sqrt(1 + alpha' Omegabar alpha)``.
    alpha_star, delta_star : float
        ``sqrt(alpha' Omegabar alpha)`` and ``sqrt(delta' Omegabar^{-1} delta)``.
    """

    xi: NDArray
    Omega: NDArray
    alpha: NDArray
    omega: NDArray = field(init=False)
    Omegabar: NDArray = field(init=False)
    delta: NDArray = field(init=False)
    alpha_star: float = field(init=False)
    delta_star: float = field(init=False)

    def __post_init__(self):
        Omega = np.asarray(self.Omega, dtype=float)
        omega = np.sqrt(np.diag(Omega))
        Omegabar = Omega / np.outer(omega, omega)
        np.fill_diagonal(Omegabar, 1.0)
        Omegabar = 0.5 * (Omegabar + Omegabar.T)
        alpha = np.asarray(self.alpha, dtype=float)
        a2 = max(float(alpha @ Omegabar @ alpha), 0.0)
        alpha_star = math.sqrt(a2)
        if alpha_star == 0.0:
            delta = np.zeros_like(alpha)
            delta_star = 0.0
        else:
            delta = Omegabar @ alpha / math.sqrt(1.0 + a2)
            delta_star = alpha_star / math.sqrt(1.0 + a2)
        for name, value in [
            ("xi", self.xi),
            ("Omega", Omega),
            ("alpha", alpha),
            ("omega", omega),
            ("Omegabar", Omegabar),
            ("delta", delta),
        ]:
            object.__setattr__(self, name, _frozen(value))
        object.__setattr__(self, "alpha_star", alpha_star)
        object.__setattr__(self, "delta_star", delta_star)

    @property
    def d(self) -> int:
        return self.xi.size

    @property
    def omega_matrix(self) -> NDArray:
        return np.diag(self.omega)

    def to_dict(self) -> dict:
        return {
            "xi": self.xi.tolist(),
            "Omega": self.Omega.tolist(),
            "alpha": self.alpha.tolist(),
        }

    def __repr__(self):
        return (
            f"SkewNormalParams(xi={self.xi.tolist()}, Omega={self.Omega.tolist()}, "
            f"alpha={self.alpha.tolist()})"
        )


def make_params(xi: ArrayLike, Omega: ArrayLike, alpha: ArrayLike) -> SkewNormalParams:
    """Validate ``(xi, Omega, alpha)`` and build :class:`SkewNormalParams`.

    Raises
    ------
    ValidationError
        On dimension mismatch, non-finite input or a non-SPD ``Omega``.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    Omega = np.atleast_2d(np.asarray(Omega, dtype=float))
    if xi.ndim != 1 or alpha.ndim != 1:
        raise ValidationError("xi and alpha must be vectors")
    d = xi.size
    if alpha.size != d or Omega.shape != (d, d):
        raise ValidationError(
            f"dimension mismatch: xi {xi.shape}, Omega {Omega.shape}, alpha {alpha.shape}"
        )
    if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(alpha))):
        raise ValidationError("xi and alpha must be finite")
    Omega = check_spd(Omega, "Omega")
    return SkewNormalParams(xi=xi, Omega=Omega, alpha=alpha)


def marginal_shape(params: SkewNormalParams, head: Sequence[int]) -> NDArray:
    """Shape parameter of the marginal distribution of the components ``head``.

    ``head`` holds 0-based indices, ``1 <= len(head) < d``.  The corresponding
    sub-vector of ``delta`` is the marginal ``delta``.
    """
    d = params.d
    head = [int(i) for i in head]
    if not head or len(head) >= d or len(set(head)) != len(head):
        raise ValidationError(f"invalid index set {head} for d = {d}")
    if min(head) < 0 or max(head) >= d:
        raise ValidationError(f"index set {head} out of range for d = {d}")
    tail = [i for i in range(d) if i not in head]
    Ob = params.Omegabar
    O11 = Ob[np.ix_(head, head)]
    O12 = Ob[np.ix_(head, tail)]
    O22 = Ob[np.ix_(tail, tail)]
    a1 = params.alpha[head]
    a2 = params.alpha[tail]
    O22_1 = O22 - O12.T @ np.linalg.solve(O11, O12)
    return (a1 + np.linalg.solve(O11, O12 @ a2)) / math.sqrt(1.0 + float(a2 @ O22_1 @ a2))


def affine_transform(params: SkewNormalParams, A: ArrayLike, b: ArrayLike) -> SkewNormalParams:
    """Parameters of ``X = A' Z + b`` for ``Z ~ SN_d(params)`` and invertible ``A``.

    ``X ~ SN_d(A' xi + b, A' Omega A, omega_X A^{-1} omega^{-1} alpha)``.
    The same map applies to a scale mixture, since the mixing variable only
    multiplies ``Z - xi``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    d = params.d
    if A.shape != (d, d) or b.shape != (d,):
        raise ValidationError(f"A must be {d}x{d} and b length {d}")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_MAX:
        raise ValidationError(f"A is singular or ill-conditioned (condition {cond!r})")
    Omega_x = A.T @ params.Omega @ A
    Omega_x = 0.5 * (Omega_x + Omega_x.T)
    omega_x = np.sqrt(np.diag(Omega_x))
    alpha_x = omega_x * np.linalg.solve(A, params.alpha / params.omega)
    return SkewNormalParams(xi=A.T @ params.xi + b, Omega=Omega_x, alpha=alpha_x)


# ---------------------------------------------------------------------------
# mixing distributions
# ---------------------------------------------------------------------------


class MixingDistribution:
    """Law of the positive scalar ``S`` in ``Y = xi + omega S Z``.

    Subclasses provide ``moment``, ``pdf`` and ``sample``.  ``support_lower``
    is the left end of the support of ``S`` (used by quadrature).
    """

    name = "mixing"
    support_lower = 0.0

    def moment(self, m: float) -> float:
        raise NotImplementedError

    def moment_condition(self, m: float) -> Optional[str]:
        """Condition string under which ``E(S^m)`` exists, or None if always."""
        return None

    def has_moment(self, m: float) -> bool:
        try:
            self.moment(m)
        except MomentNotExistError:
            return False
        return True

    def logpdf(self, s):
        raise UnsupportedOperationError(f"{self.name} mixing has no density")

    def pdf(self, s):
        return np.exp(self.logpdf(s))

    @property
    def has_density(self) -> bool:
        return True

    def sample(self, rng: np.random.Generator, n: int) -> NDArray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise UnsupportedOperationError(f"{self.name} mixing cannot be serialized")


@dataclass(frozen=True)
class Degenerate(MixingDistribution):
    """``S = 1`` with probability one: the plain skew-normal."""

    name = "degenerate"
    support_lower = 1.0

    def moment(self, m: float) -> float:
        return 1.0

    def logpdf(self, s):
        raise UnsupportedOperationError("degenerate mixing has no density")

    @property
    def has_density(self) -> bool:
        return False

    def sample(self, rng, n):
        return np.ones(n)

    def to_dict(self):
        return {"type": "degenerate"}


@dataclass(frozen=True)
class SkewT(MixingDistribution):
    """``S = W^{-1/2}`` with ``W ~ Gamma(nu/2, rate=nu/2)``: the skew-t."""

    nu: float
    name = "skew_t"
    support_lower = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.nu) and self.nu > 0):
            raise ValidationError(f"degrees of freedom must be > 0, got {self.nu!r}")

    def moment_condition(self, m):
        return f"requires nu > {_fmt_num(m)}" if m > 0 else None

    def moment(self, m: float) -> float:
        if m == 0:
            return 1.0
        if m >= self.nu:
            raise MomentNotExistError(
                f"E(S^{_fmt_num(m)}) does not exist for nu = {self.nu!r}",
                self.moment_condition(m),
            )
        nu = self.nu
        return math.exp(
            0.5 * m * math.log(0.5 * nu) + special.gammaln(0.5 * (nu - m)) - special.gammaln(0.5 * nu)
        )

    def logpdf(self, s):
        s = np.asarray(s, dtype=float)
        nu = self.nu
        with np.errstate(divide="ignore"):
            w = s ** -2.0
            out = (
                math.log(2.0)
                - 3.0 * np.log(s)
                + 0.5 * nu * math.log(0.5 * nu)
                - special.gammaln(0.5 * nu)
                + (0.5 * nu - 1.0) * np.log(w)
                - 0.5 * nu * w
            )
        return np.where(s > 0, out, -np.inf)

    def sample(self, rng, n):
        return rng.gamma(0.5 * self.nu, 2.0 / self.nu, size=n) ** -0.5

    def to_dict(self):
        return {"type": "skew_t", "nu": self.nu}


@dataclass(frozen=True)
class Slash(MixingDistribution):
    """``S = U^{-1/q}`` with ``U ~ Uniform(0, 1)``: the skew-slash."""

    q: float
    name = "slash"
    support_lower = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.q) and self.q > 0):
            raise ValidationError(f"slash parameter q must be > 0, got {self.q!r}")

    def moment_condition(self, m):
        return f"requires q > {_fmt_num(m)}" if m > 0 else None

    def moment(self, m: float) -> float:
        if m == 0:
            return 1.0
        if m >= self.q:
            raise MomentNotExistError(
                f"E(S^{_fmt_num(m)}) does not exist for q = {self.q!r}",
                self.moment_condition(m),
            )
        return self.q / (self.q - m)

    def logpdf(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            out = math.log(self.q) - (self.q + 1.0) * np.log(s)
        return np.where(s >= 1.0, out, -np.inf)

    def sample(self, rng, n):
        return rng.uniform(size=n) ** (-1.0 / self.q)

    def to_dict(self):
        return {"type": "slash", "q": self.q}


@dataclass(frozen=True)
class Custom(MixingDistribution):
    """User-supplied mixing variable.

    Parameters
    ----------
    moment_fn : callable
        ``moment_fn(m) -> E(S^m)``, exact (analytic or user quadrature).  It
        should raise :class:`MomentNotExistError` for infinite moments.
    pdf_fn : callable, optional
        Vectorized density of ``S``.  Needed by quadrature-based routines.
    sampler : callable, optional
        ``sampler(rng, n) -> ndarray`` of positive draws.
    support_lower : float
        Left end of the support of ``S``.
    """

    moment_fn: Callable[[float], float]
    pdf_fn: Optional[Callable] = None
    sampler: Optional[Callable] = None
    support_lower: float = 0.0
    name = "custom"

    def moment(self, m):
        if m == 0:
            return 1.0
        return float(self.moment_fn(m))

    def moment_condition(self, m):
        return f"requires E(S^{_fmt_num(m)}) < inf" if m > 0 else None

    @property
    def has_density(self):
        return self.pdf_fn is not None

    def logpdf(self, s):
        if self.pdf_fn is None:
            raise UnsupportedOperationError("custom mixing was built without a density")
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(self.pdf_fn(np.asarray(s, dtype=float)), dtype=float))

    def sample(self, rng, n):
        if self.sampler is None:
            raise UnsupportedOperationError("custom mixing was built without a sampler")
        return np.asarray(self.sampler(rng, n), dtype=float)


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


@dataclass(frozen=True, eq=False)
class ScaleMixtureSN:
    """``Y = xi + omega S Z0`` with ``Z0 ~ SN_d(0, Omegabar, alpha)``."""

    params: SkewNormalParams
    mixing: MixingDistribution = field(default_factory=Degenerate)

    @property
    def d(self) -> int:
        return self.params.d

    def to_dict(self) -> dict:
        out = self.params.to_dict()
        out["mixing"] = self.mixing.to_dict()
        return out


def mixing_from_dict(spec: Optional[dict]) -> MixingDistribution:
    if spec is None:
        return Degenerate()
    kind = spec.get("type", "degenerate")
    if kind == "degenerate":
        return Degenerate()
    if kind == "skew_t":
        if "nu" not in spec:
            raise ValidationError("skew_t mixing requires 'nu'")
        return SkewT(float(spec["nu"]))
    if kind == "slash":
        if "q" not in spec:
            raise ValidationError("slash mixing requires 'q'")
        return Slash(float(spec["q"]))
    raise ValidationError(f"unknown mixing type {kind!r}")


def dist_from_dict(spec: dict) -> ScaleMixtureSN:
    """Build a :class:`ScaleMixtureSN` from the JSON interchange document."""
    try:
        xi, Omega, alpha = spec["xi"], spec["Omega"], spec["alpha"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"distribution spec is missing field {exc}") from None
    try:
        params = make_params(xi, Omega, alpha)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed parameter arrays: {exc}") from None
    return ScaleMixtureSN(params, mixing_from_dict(spec.get("mixing")))


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


def _prep_points(params: SkewNormalParams, z: ArrayLike):
    z = np.asarray(z, dtype=float)
    single = z.ndim <= 1
    z = np.atleast_1d(z).reshape(-1, params.d) if single else z
    if z.shape[-1] != params.d:
        raise ValidationError(f"points must have {params.d} columns")
    return z - params.xi, single


def _quad_and_logdet(params: SkewNormalParams, x: NDArray):
    L = np.linalg.cholesky(params.Omega)
    w = np.linalg.solve(L, x.T)
    Q = np.sum(w * w, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return Q, logdet


def sn_logpdf(params: SkewNormalParams, z: ArrayLike):
    """Log of :func:`sn_density`."""
    x, single = _prep_points(params, z)
    Q, logdet = _quad_and_logdet(params, x)
    d = params.d
    lin = x @ (params.alpha / params.omega)
    out = math.log(2.0) - 0.5 * (d * _LOG_2PI + logdet + Q) + special.log_ndtr(lin)
    return float(out[0]) if single else out


def sn_density(params: SkewNormalParams, z: ArrayLike):
    """Skew-normal density ``2 phi_d(z - xi; Omega) Phi(alpha' omega^{-1} (z - xi))``.

    ``z`` may be a single point ``(d,)`` or an array of points ``(n, d)``.
    """
    return np.exp(sn_logpdf(params, z))


def st_logpdf(params: SkewNormalParams, nu: float, y: ArrayLike):
    """Log of :func:`st_density`."""
    if not nu > 0:
        raise ValidationError(f"degrees of freedom must be > 0, got {nu!r}")
    x, single = _prep_points(params, y)
    Q, logdet = _quad_and_logdet(params, x)
    d = params.d
    log_td = (
        special.gammaln(0.5 * (nu + d))
        - special.gammaln(0.5 * nu)
        - 0.5 * d * math.log(nu * math.pi)
        - 0.5 * logdet
        - 0.5 * (nu + d) * np.log1p(Q / nu)
    )
    w = (x @ (params.alpha / params.omega)) * np.sqrt((nu + d) / (Q + nu))
    out = math.log(2.0) + log_td + np.log(special.stdtr(nu + d, w))
    return float(out[0]) if single else out


def st_density(params: SkewNormalParams, nu: float, y: ArrayLike):
    """Skew-t density ``2 t_d(y - xi; nu) T_1(w; nu + d)``.

    ``w = alpha' omega^{-1} (y - xi) sqrt((nu + d) / (Q_y + nu))`` with
    ``Q_y = (y - xi)' Omega^{-1} (y - xi)``.
    """
    return np.exp(st_logpdf(params, nu, y))


def mixture_quad(
    mixing: MixingDistribution,
    log_weight: Callable[[float], float],
    factor: Optional[Callable[[float], float]] = None,
    epsrel: float = QUAD_EPSREL,
) -> float:
    """``int f_S(s) exp(log_weight(s)) factor(s) ds`` over the support of ``S``.

    The support ``(lo, inf)`` is mapped to ``(0, 1)`` by ``s = lo + u / (1 - u)``
    and integrated adaptively; ``factor`` may change sign.
    """
    lo = mixing.support_lower

    def g(u):
        if u <= 0.0 or u >= 1.0:
            return 0.0
        s = lo + u / (1.0 - u)
        val = log_weight(s) + float(mixing.logpdf(s)) - 2.0 * math.log1p(-u)
        if val < -745.0:
            return 0.0
        out = math.exp(val)
        return out * factor(s) if factor is not None else out

    # split at s = lo + 1, where the mass of every built-in law sits
    total = 0.0
    for a, b in [(0.0, 0.5), (0.5, 1.0)]:
        val, _ = integrate.quad(g, a, b, epsabs=0.0, epsrel=epsrel, limit=500)
        total += val
    return total


def smsn_density(dist: ScaleMixtureSN, y: ArrayLike, epsrel: float = QUAD_EPSREL):
    """Density of a scale mixture, marginalizing ``S`` by 1-D quadrature.

    ``f(y) = int 2 s^{-d} phi_d((y - xi)/s; Omega) Phi(alpha' omega^{-1}(y - xi)/s) f_S(s) ds``.
    Degenerate mixing is evaluated directly.
    """
    params, mixing = dist.params, dist.mixing
    if isinstance(mixing, Degenerate):
        return sn_density(params, y)
    if not mixing.has_density:
        raise UnsupportedOperationError(f"{mixing.name} mixing has no density")
    x, single = _prep_points(params, y)
    Q, logdet = _quad_and_logdet(params, x)
    lin = x @ (params.alpha / params.omega)
    d = params.d
    const = math.log(2.0) - 0.5 * (d * _LOG_2PI + logdet)
    out = np.empty(len(x))
    for i in range(len(x)):
        qi, li = float(Q[i]), float(lin[i])

        def log_integrand(s, qi=qi, li=li):
            return const - d * math.log(s) - 0.5 * qi / (s * s) + float(special.log_ndtr(li / s))

        out[i] = mixture_quad(mixing, log_integrand, epsrel=epsrel)
    return float(out[0]) if single else out


def sn_density_gradient(params: SkewNormalParams, z: ArrayLike) -> NDArray:
    """Analytic gradient of :func:`sn_density` at a single point."""
    z = np.asarray(z, dtype=float)
    x = z - params.xi
    a = params.alpha / params.omega
    Oinv_x = np.linalg.solve(params.Omega, x)
    Q = float(x @ Oinv_x)
    logdet = np.linalg.slogdet(params.Omega)[1]
    phi_d = math.exp(-0.5 * (params.d * _LOG_2PI + logdet + Q))
    u = float(a @ x)
    return 2.0 * phi_d * (-Oinv_x * special.ndtr(u) + a * math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi))


def st_density_gradient(params: SkewNormalParams, nu: float, y: ArrayLike) -> NDArray:
    """Analytic gradient of :func:`st_density` at a single point."""
    y = np.asarray(y, dtype=float)
    d = params.d
    x = y - params.xi
    a = params.alpha / params.omega
    Oinv_x = np.linalg.solve(params.Omega, x)
    Q = float(x @ Oinv_x)
    logdet = np.linalg.slogdet(params.Omega)[1]
    td = math.exp(
        special.gammaln(0.5 * (nu + d))
        - special.gammaln(0.5 * nu)
        - 0.5 * d * math.log(nu * math.pi)
        - 0.5 * logdet
        - 0.5 * (nu + d) * math.log1p(Q / nu)
    )
    c = math.sqrt((nu + d) / (Q + nu))
    lin = float(a @ x)
    w = lin * c
    T = float(special.stdtr(nu + d, w))
    t1 = _t_pdf(w, nu + d)
    grad_td = -td * (nu + d) / (nu + Q) * Oinv_x
    grad_w = c * a - lin * c * Oinv_x / (Q + nu)
    return 2.0 * (grad_td * T + td * t1 * grad_w)


def _t_pdf(x: float, df: float) -> float:
    return math.exp(
        special.gammaln(0.5 * (df + 1.0))
        - special.gammaln(0.5 * df)
        - 0.5 * math.log(df * math.pi)
        - 0.5 * (df + 1.0) * math.log1p(x * x / df)
    )


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample_sn_standard(params: SkewNormalParams, n: int, rng: RandomLike = None) -> NDArray:
    """Draw ``n`` rows of ``Z0 ~ SN_d(0, Omegabar, alpha)``.

    Uses the (d+1)-dimensional Gaussian with correlation ``[[1, delta'], [delta, Omegabar]]``
    and flips the sign of the row whenever the latent coordinate is negative.
    """
    rng = as_generator(rng)
    d = params.d
    corr = np.empty((d + 1, d + 1))
    corr[0, 0] = 1.0
    corr[0, 1:] = corr[1:, 0] = params.delta
    corr[1:, 1:] = params.Omegabar
    L = np.linalg.cholesky(corr)
    X = rng.standard_normal((n, d + 1)) @ L.T
    Z = X[:, 1:]
    Z[X[:, 0] < 0] *= -1.0
    return Z


def sample(dist: ScaleMixtureSN, n: int, rng: RandomLike = None) -> NDArray:
    """Draw an ``(n, d)`` sample from ``Y = xi + omega S Z0``.

    ``rng`` is a ``numpy.random.Generator`` owned by the caller (an int is
    used as a seed).  Results are reproducible for a fixed seed.
    """
    if n < 1:
        raise ValidationError(f"sample size must be >= 1, got {n}")
    rng = as_generator(rng)
    params = dist.params
    Z = sample_sn_standard(params, n, rng)
    S = np.asarray(dist.mixing.sample(rng, n), dtype=float)
    return params.xi + (S[:, None] * Z) * params.omega
