"""
Closed-form moments and skewness/kurtosis indices for scale mixtures.

Everything here is expressed through the moments ``E(S^m)`` of the mixing
variable and the shape summary ``delta_star``.  The work is done in canonical
coordinates ``Y* = S Z*`` where ``Z*_1 ~ SN_1(0, 1, alpha_star)`` and the other
components are independent ``N(0, 1)``.

Index existence is part of the result: an index whose mixing moment is
infinite is ``None`` and its entry in ``conditions`` says what is required.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import special

from smsn.distributions import MixingDistribution, ScaleMixtureSN
from smsn.exceptions import MomentNotExistError, ValidationError

B2 = 2.0 / math.pi  # squared mean of the half-normal, (2/pi)
B = math.sqrt(B2)


def mixing_moment(mixing: MixingDistribution, m: float) -> float:
    """Exact ``E(S^m)``; raises :class:`MomentNotExistError` when it is infinite.

    For the skew-t, ``E(S^m) = (nu/2)^{m/2} Gamma((nu - m)/2) / Gamma(nu/2)``,
    evaluated through log-gamma differences.
    """
    if m < 0:
        raise ValidationError(f"moment order must be nonnegative, got {m!r}")
    return mixing.moment(m)


def _condition(mixing: MixingDistribution, m: int) -> str:
    cond = mixing.moment_condition(m)
    return cond if cond is not None else "none"


def smsn_mean(dist: ScaleMixtureSN) -> NDArray:
    """``E(Y) = xi + E(S) sqrt(2/pi) omega delta``; needs only ``E(S) < inf``."""
    p = dist.params
    return p.xi + mixing_moment(dist.mixing, 1) * B * p.omega * p.delta


def smsn_mean_cov(dist: ScaleMixtureSN) -> Tuple[NDArray, NDArray]:
    """Mean vector and covariance matrix of the scale mixture.

    ``E(Y) = xi + E(S) sqrt(2/pi) omega delta`` and
    ``var(Y) = omega (E(S^2) Omegabar - (2/pi) E(S)^2 delta delta') omega``.
    """
    p = dist.params
    s1 = mixing_moment(dist.mixing, 1)
    s2 = mixing_moment(dist.mixing, 2)
    wd = p.omega * p.delta
    mean = p.xi + s1 * B * wd
    cov = s2 * p.Omega - B2 * s1 * s1 * np.outer(wd, wd)
    return mean, 0.5 * (cov + cov.T)


def sn_standard_moment(k: int, delta: float) -> float:
    """``E(Z^k)`` for ``Z ~ SN_1(0, 1, alpha)`` with ``delta = alpha / sqrt(1 + alpha^2)``.

    Uses ``Z = delta |U0| + sqrt(1 - delta^2) U1`` with independent standard normals.
    """
    rest = max(1.0 - delta * delta, 0.0)
    total = 0.0
    for j in range(k + 1):
        m = k - j
        if m % 2:
            continue
        abs_mom = 2.0 ** (0.5 * j) * math.exp(special.gammaln(0.5 * (j + 1))) / math.sqrt(math.pi)
        norm_mom = float(special.factorial2(m - 1)) if m > 0 else 1.0
        total += math.comb(k, j) * delta**j * rest ** (0.5 * m) * abs_mom * norm_mom
    return total


# ---------------------------------------------------------------------------
# univariate indices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnivariateIndices:
    """Pearson skewness ``gamma1`` and excess kurtosis ``gamma2`` of a 1-D mixture."""

    gamma1: Optional[float]
    gamma2: Optional[float]
    conditions: Dict[str, dict] = field(default_factory=dict)


def univariate_indices(mixing: MixingDistribution, delta: float) -> UnivariateIndices:
    """Skewness and excess kurtosis of ``Y = S Z``, ``Z ~ SN_1(0, 1, alpha)``.

    Evaluates the closed forms in terms of ``E(S^k)``, ``k <= 4``, with
    ``sigma_Y^2 = E(S^2) - (2/pi) E(S)^2 delta^2``.  An index whose moments
    do not exist is returned as ``None``.
    """
    if not -1.0 < delta < 1.0:
        raise ValidationError(f"delta must lie in (-1, 1), got {delta!r}")
    conditions = {}
    s = {}
    for k in (1, 2, 3, 4):
        try:
            s[k] = mixing_moment(mixing, k)
        except MomentNotExistError:
            break
    if 2 not in s:
        raise MomentNotExistError(
            "univariate indices need a finite variance", _condition(mixing, 2)
        )
    s1, s2 = s[1], s[2]
    var = s2 - B2 * s1 * s1 * delta * delta
    g1 = g2 = None
    conditions["gamma1"] = {"requires": _condition(mixing, 3), "exists": 3 in s}
    conditions["gamma2"] = {"requires": _condition(mixing, 4), "exists": 4 in s}
    if 3 in s:
        s3 = s[3]
        g1 = (
            B * (s1**3 * (4.0 / math.pi) - s3) * delta**3
            - 3.0 * B * (s1 * s2 - s3) * delta
        ) / var**1.5
    if 4 in s:
        s3, s4 = s[3], s[4]
        g2 = (
            (8.0 / math.pi) * (s1 * s3 - (3.0 / math.pi) * s1**4) * delta**4
            - (24.0 / math.pi) * (s1 * s3 - s2 * s1 * s1) * delta**2
            + 3.0 * (s4 - s2 * s2)
        ) / var**2
    return UnivariateIndices(g1, g2, conditions)


# ---------------------------------------------------------------------------
# Mardia indices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MardiaIndices:
    """Mardia skewness ``gamma1d = beta1d`` and excess kurtosis ``gamma2d = beta2d - d(d+2)``.

    ``gamma1d``/``gamma2d`` are ``None`` when the mixing moments they need are
    infinite; ``conditions`` records what each index requires and whether it
    holds.  ``kurtosis_terms`` splits ``beta2d`` into the univariate kurtosis
    of the skewed canonical component, the kurtosis of the symmetric block and
    the cross term.
    """

    gamma1d: Optional[float]
    gamma2d: Optional[float]
    conditions: Dict[str, dict]
    alpha_star: float
    delta_star: float
    d: int
    kurtosis_terms: Optional[Dict[str, float]] = None

    @property
    def beta2d(self) -> Optional[float]:
        return None if self.gamma2d is None else self.gamma2d + self.d * (self.d + 2)

    def to_dict(self) -> dict:
        return {
            "gamma1d": self.gamma1d,
            "gamma2d": self.gamma2d,
            "conditions": self.conditions,
            "alpha_star": self.alpha_star,
            "delta_star": self.delta_star,
        }


def _delta_star(alpha_star: float) -> float:
    return alpha_star / math.sqrt(1.0 + alpha_star * alpha_star)


def sn_mardia(alpha_star: float, d: int = 1) -> MardiaIndices:
    """Mardia indices of ``SN_d``; they depend on the parameters only via ``alpha_star``."""
    if alpha_star < 0:
        raise ValidationError("alpha_star must be nonnegative")
    a2 = alpha_star * alpha_star
    if math.isinf(a2):
        r = 2.0 / (math.pi - 2.0)
    else:
        r = 2.0 * a2 / (math.pi + (math.pi - 2.0) * a2)
    g1 = ((4.0 - math.pi) / 2.0) ** 2 * r**3
    g2 = 2.0 * (math.pi - 3.0) * r**2
    conditions = {
        "gamma1d": {"requires": "none", "exists": True},
        "gamma2d": {"requires": "none", "exists": True},
    }
    return MardiaIndices(g1, g2, conditions, alpha_star, _delta_star(alpha_star), d)


@dataclass(frozen=True)
class CanonicalMoments:
    """Non-zero low-order moments of the canonical form ``Y* = S Z*``.

    ``third`` holds ``E(Y1*^3)`` (key ``"111"``) and ``E(Y1* Yi*^2)`` (``"1ii"``);
    ``fourth`` holds ``E(Yi*^4)`` (``"iiii"``) and ``E(Yi*^2 Yj*^2)`` (``"iijj"``).
    Entries whose mixing moment is infinite are ``None``.
    """

    mu_star: float
    sigma_star_sq: Optional[float]
    sigma_sq: Optional[float]
    third: Dict[str, Optional[float]]
    fourth: Dict[str, Optional[float]]
    delta_star: float


def canonical_moments(dist: ScaleMixtureSN) -> CanonicalMoments:
    """Mean, variances and the non-zero third/fourth moments of the canonical form."""
    mixing = dist.mixing
    ds = dist.params.delta_star
    s1 = mixing_moment(mixing, 1)

    def opt(k):
        return mixing_moment(mixing, k) if mixing.has_moment(k) else None

    s2, s3, s4 = opt(2), opt(3), opt(4)
    mu = s1 * B * ds
    third = {
        "111": None if s3 is None else s3 * B * ds * (3.0 - ds * ds),
        "1ii": None if s3 is None else s3 * B * ds,
    }
    fourth = {
        "iiii": None if s4 is None else 3.0 * s4,
        "iijj": None if s4 is None else s4,
    }
    return CanonicalMoments(
        mu_star=mu,
        sigma_star_sq=None if s2 is None else s2 - B2 * s1 * s1 * ds * ds,
        sigma_sq=s2,
        third=third,
        fourth=fourth,
        delta_star=ds,
    )


def mardia_indices(dist: ScaleMixtureSN) -> MardiaIndices:
    """Mardia skewness and excess kurtosis of a scale mixture of skew-normals.

    Built from :func:`canonical_moments`; the indices are affine invariant so
    the canonical form suffices.  With ``mu_1ii = E[(Y1* - mu*) Yi*^2]`` and
    ``mu_11ii = E[(Y1* - mu*)^2 Yi*^2]``::

        gamma1d = gamma1*^2 + 3 (d-1) mu_1ii^2 / (sigma*^2 sigma^4)
        beta2d  = beta2* + (d^2 - 1) E(S^4)/E(S^2)^2 + 2 (d-1) mu_11ii / (sigma*^2 sigma^2)

    where ``sigma^2 = E(S^2)``.
    """
    p, mixing = dist.params, dist.mixing
    d = p.d
    conditions = {
        "gamma1d": {"requires": _condition(mixing, 3), "exists": mixing.has_moment(3)},
        "gamma2d": {"requires": _condition(mixing, 4), "exists": mixing.has_moment(4)},
    }
    if not mixing.has_moment(2):
        return MardiaIndices(None, None, conditions, p.alpha_star, p.delta_star, d)
    cm = canonical_moments(dist)
    mu, vs, v = cm.mu_star, cm.sigma_star_sq, cm.sigma_sq
    g1 = g2 = None
    terms = None
    if cm.third["111"] is not None:
        mu111 = cm.third["111"] - 3.0 * mu * v + 2.0 * mu**3
        mu1ii = cm.third["1ii"] - mu * v
        g1 = mu111**2 / vs**3 + 3.0 * (d - 1) * mu1ii**2 / (vs * v * v)
    if cm.fourth["iiii"] is not None:
        s4 = cm.fourth["iijj"]
        mu1111 = cm.fourth["iiii"] - 4.0 * mu * cm.third["111"] + 6.0 * mu * mu * v - 3.0 * mu**4
        mu11ii = s4 - 2.0 * mu * cm.third["1ii"] + mu * mu * v
        terms = {
            "univariate": mu1111 / vs**2,
            "symmetric_block": (d - 1) * (d + 1) * s4 / v**2,
            "cross": 2.0 * (d - 1) * mu11ii / (vs * v),
        }
        g2 = terms["univariate"] + terms["symmetric_block"] + terms["cross"] - d * (d + 2)
    return MardiaIndices(g1, g2, conditions, p.alpha_star, p.delta_star, d, terms)


def st_mardia(alpha_star: float, nu: float, d: int) -> MardiaIndices:
    """Mardia indices of the d-dimensional skew-t in explicit form.

    Uses ``mu* = delta* sqrt(nu/pi) Gamma((nu-1)/2)/Gamma(nu/2)``,
    ``sigma*^2 = nu/(nu-2) - mu*^2`` and the univariate skew-t skewness
    ``gamma1*`` and kurtosis ``beta2*``::

        gamma1d = gamma1*^2 + 3 (d-1) mu*^2 / ((nu-3)^2 sigma*^2)              nu > 3
        gamma2d = beta2* + (d^2-1)(nu-2)/(nu-4)
                  + 2 (d-1)/sigma*^2 [nu/(nu-4) - (nu-1) mu*^2/(nu-3)] - d(d+2)   nu > 4
    """
    if alpha_star < 0:
        raise ValidationError("alpha_star must be nonnegative")
    if not nu > 0:
        raise ValidationError(f"degrees of freedom must be > 0, got {nu!r}")
    ds = _delta_star(alpha_star)
    conditions = {
        "gamma1d": {"requires": "requires nu > 3", "exists": nu > 3},
        "gamma2d": {"requires": "requires nu > 4", "exists": nu > 4},
    }
    g1 = g2 = None
    if nu > 3:
        mu = ds * math.sqrt(nu / math.pi) * math.exp(
            special.gammaln(0.5 * (nu - 1.0)) - special.gammaln(0.5 * nu)
        )
        mu2 = mu * mu
        vs = nu / (nu - 2.0) - mu2
        g1_star = mu * (nu * (3.0 - ds * ds) / (nu - 3.0) - 3.0 * nu / (nu - 2.0) + 2.0 * mu2) / vs**1.5
        g1 = g1_star**2 + 3.0 * (d - 1) * mu2 / ((nu - 3.0) ** 2 * vs)
        if nu > 4:
            b2_star = (
                3.0 * nu * nu / ((nu - 2.0) * (nu - 4.0))
                - 4.0 * mu2 * nu * (3.0 - ds * ds) / (nu - 3.0)
                + 6.0 * mu2 * nu / (nu - 2.0)
                - 3.0 * mu2 * mu2
            ) / vs**2
            g2 = (
                b2_star
                + (d * d - 1.0) * (nu - 2.0) / (nu - 4.0)
                + 2.0 * (d - 1) / vs * (nu / (nu - 4.0) - (nu - 1.0) * mu2 / (nu - 3.0))
                - d * (d + 2)
            )
    return MardiaIndices(g1, g2, conditions, alpha_star, ds, d)


# ---------------------------------------------------------------------------
# kurtosis scatter matrix
# ---------------------------------------------------------------------------


def canonical_central_moment(dist: ScaleMixtureSN, powers) -> float:
    """``E[prod_k (Y*_k - mu*_k)^{powers_k}]`` for the canonical form.

    Generic route used for the kurtosis scatter matrix: expands the first
    coordinate around ``mu*`` and factors ``E(S^m) E(Z*^(m))`` over the
    independent components of ``Z*``.
    """
    powers = [int(e) for e in powers]
    rest = powers[1:]
    if any(e % 2 for e in rest):
        return 0.0
    ds = dist.params.delta_star
    mu = mixing_moment(dist.mixing, 1) * B * ds
    sym = 1.0
    for e in rest:
        sym *= float(special.factorial2(e - 1)) if e > 0 else 1.0
    even = sum(rest)
    e1 = powers[0]
    total = 0.0
    for t in range(e1 + 1):
        coef = math.comb(e1, t) * (-mu) ** (e1 - t)
        if coef == 0.0:
            continue
        total += coef * mixing_moment(dist.mixing, t + even) * sn_standard_moment(t, ds)
    return total * sym


def canonical_kappa(dist: ScaleMixtureSN, exponent: int = 1) -> NDArray:
    """Kurtosis scatter ``E{[x' Sigma^{-1} x]^exponent x x'}`` of the centred canonical form."""
    if exponent not in (1, 2):
        raise ValidationError("kurtosis scatter exponent must be 1 or 2")
    d = dist.d
    order = 2 * exponent + 2
    mixing_moment(dist.mixing, order)  # fail early with the right condition
    cm = canonical_moments(dist)
    var = np.full(d, cm.sigma_sq)
    var[0] = cm.sigma_star_sq
    w = 1.0 / var
    K = np.zeros((d, d))
    for a in range(d):
        for b in range(a, d):
            acc = 0.0
            for ks in itertools.product(range(d), repeat=exponent):
                powers = np.zeros(d, dtype=int)
                powers[a] += 1
                powers[b] += 1
                weight = 1.0
                for k in ks:
                    powers[k] += 2
                    weight *= w[k]
                acc += weight * canonical_central_moment(dist, powers)
            K[a, b] = K[b, a] = acc
    return K


def analytic_kappa(dist: ScaleMixtureSN, exponent: int = 1) -> NDArray:
    """Kurtosis scatter ``K = E{[(Y-mu)' Sigma^{-1} (Y-mu)]^exponent (Y-mu)(Y-mu)'}``.

    Computed in canonical coordinates, where it is diagonal, and mapped back
    with the canonical transform ``H``: ``K = H^{-T} K* H^{-1}``.  The default
    exponent 1 satisfies ``tr(Sigma^{-1} K) = beta2d``; exponent 2 needs
    ``E(S^6)``.
    """
    from smsn.canonical import cp_matrix

    H = cp_matrix(dist.params)
    Kc = canonical_kappa(dist, exponent)
    Hinv = np.linalg.inv(H)
    K = Hinv.T @ Kc @ Hinv
    return 0.5 * (K + K.T)
