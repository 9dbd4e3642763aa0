"""
Canonical-form transforms.

A canonical form of ``Y`` is ``Y* = H'(Y - xi)`` whose skew-normal part has
scale ``I_d`` and shape ``(alpha_star, 0, ..., 0)``: one skewed component,
the rest symmetric.  Three routes to ``H`` are provided:

``CP``
    ``H = omega^{-1} C^{-1} P`` with ``C'C = Omegabar`` and ``P`` orthogonal
    with first column proportional to ``C alpha``.
``ICS_OmegaSigma``
    invariant co-ordinate selection on the scatter pair ``(Omega, Sigma)``.
``ICS_SigmaKappa``
    invariant co-ordinate selection on ``(Sigma, K)`` with ``K`` the kurtosis
    scatter (analytic from :mod:`smsn.moments` or empirical).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from smsn.distributions import (
    ScaleMixtureSN,
    SkewNormalParams,
    affine_transform,
    check_spd,
)
from smsn.exceptions import DegeneratePairError, MomentNotExistError, ValidationError
from smsn.moments import B, canonical_moments, mixing_moment, smsn_mean_cov

CP = "CP"
ICS_OMEGA_SIGMA = "ICS_OmegaSigma"
ICS_SIGMA_KAPPA = "ICS_SigmaKappa"

TIE_RTOL = 1e-11
DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class ScatterPair:
    """Two scatter matrices; ``V1`` must be SPD."""

    V1: NDArray
    V2: NDArray
    labels: Tuple[str, str] = ("V1", "V2")


@dataclass(frozen=True, eq=False)
class CanonicalTransform:
    """Transform ``H`` with ``Y* = H'(Y - xi)`` in canonical form.

    ``canonical_params`` are the skew-normal parameters of ``H'(Z - xi)``
    obtained by actually applying ``H``; ``eigenvalues`` are aligned with the
    columns of ``H`` (empty for ``CP``).
    """

    H: NDArray
    canonical_params: SkewNormalParams
    method: str
    eigenvalues: NDArray = field(default_factory=lambda: np.empty(0))
    scatter: Optional[ScatterPair] = None
    fallback: Optional[str] = None

    @property
    def alpha_star(self) -> float:
        return self.canonical_params.alpha_star

    def to_dict(self) -> dict:
        return {
            "H": self.H.tolist(),
            "alpha_star": self.alpha_star,
            "eigenvalues": np.asarray(self.eigenvalues).tolist(),
            "method": self.method,
        }


def spd_sqrt(V: NDArray, inverse: bool = False) -> NDArray:
    """Unique SPD square root of ``V`` (or its inverse) via the spectral decomposition."""
    V = check_spd(V)
    lam, U = np.linalg.eigh(V)
    r = lam**-0.5 if inverse else np.sqrt(lam)
    R = (U * r) @ U.T
    return 0.5 * (R + R.T)


def _orient_columns(H: NDArray) -> NDArray:
    """Make the first non-negligible entry of every column positive."""
    H = H.copy()
    for j in range(H.shape[1]):
        col = H[:, j]
        big = np.abs(col) > 1e-12 * np.max(np.abs(col))
        if col[np.argmax(big)] < 0:
            H[:, j] = -col
    return H


def _break_ties(lam: NDArray, Q: NDArray) -> NDArray:
    """Replace eigenvectors of tied eigenvalues by a basis built in coordinate order.

    Within a tied block the basis is arbitrary; projecting ``e_1, e_2, ...``
    onto the eigenspace and orthonormalizing makes it deterministic.
    """
    d = lam.size
    scale = max(np.max(np.abs(lam)), np.finfo(float).tiny)
    Q = Q.copy()
    start = 0
    while start < d:
        stop = start + 1
        while stop < d and lam[stop] - lam[start] <= TIE_RTOL * scale:
            stop += 1
        k = stop - start
        if k > 1:
            block = Q[:, start:stop]
            proj = block @ block.T
            basis = []
            for j in range(d):
                v = proj[:, j].copy()
                for b in basis:
                    v -= (b @ v) * b
                nv = np.linalg.norm(v)
                if nv > 1e-6:
                    basis.append(v / nv)
                if len(basis) == k:
                    break
            Q[:, start:stop] = np.column_stack(basis)
        start = stop
    return Q


def ics_from_scatter(pair: ScatterPair) -> Tuple[NDArray, NDArray]:
    """Simultaneously diagonalize a scatter pair.

    Returns ``H = V1^{-1/2} Q`` and ascending eigenvalues ``lam`` where
    ``Q diag(lam) Q'`` is the spectral decomposition of
    ``M = V1^{-1/2} V2 V1^{-1/2}``, so that ``H' V1 H = I`` and
    ``H' V2 H = diag(lam)``.  Columns of ``H`` are eigenvectors of
    ``V1^{-1} V2``; signs follow the first-nonzero-entry-positive rule.
    """
    V1 = check_spd(pair.V1, pair.labels[0])
    V2 = np.asarray(pair.V2, dtype=float)
    if V2.shape != V1.shape:
        raise ValidationError("scatter matrices must have the same shape")
    if np.max(np.abs(V2 - V2.T)) > 1e-8 * max(np.max(np.abs(V2)), np.finfo(float).tiny):
        raise ValidationError(f"{pair.labels[1]} is not symmetric")
    R = spd_sqrt(V1, inverse=True)
    M = R @ (0.5 * (V2 + V2.T)) @ R
    lam, Q = np.linalg.eigh(0.5 * (M + M.T))
    Q = _break_ties(lam, Q)
    return _orient_columns(R @ Q), lam


def cp_matrix(params: SkewNormalParams) -> NDArray:
    """``H = omega^{-1} C^{-1} P`` of the CP route (``P = I`` when ``alpha = 0``)."""
    d = params.d
    C = np.linalg.cholesky(params.Omegabar).T  # C'C = Omegabar
    v = C @ params.alpha
    nv = np.linalg.norm(v)
    P = np.eye(d)
    if nv > 0:
        v = v / nv
        u = -v
        u[0] += 1.0
        nu2 = u @ u
        if nu2 > 1e-30:
            P = P - 2.0 * np.outer(u, u) / nu2  # Householder map taking e1 to v
    return np.linalg.solve(C, P) / params.omega[:, None]


def _params_of(obj) -> SkewNormalParams:
    return obj.params if isinstance(obj, ScaleMixtureSN) else obj


def _transformed(params: SkewNormalParams, H: NDArray) -> SkewNormalParams:
    return affine_transform(params, H, -H.T @ params.xi)


def canonical_cp(params) -> CanonicalTransform:
    """Canonical transform by a Cholesky factor of ``Omegabar`` and a rotation.

    Accepts :class:`SkewNormalParams` or :class:`ScaleMixtureSN`.
    """
    params = _params_of(params)
    H = cp_matrix(params)
    return CanonicalTransform(H, _transformed(params, H), CP)


def _skew_first_sign(params: SkewNormalParams, H: NDArray) -> NDArray:
    # flip the skew column so the canonical shape entry is nonnegative
    a = np.linalg.solve(H, params.alpha / params.omega)
    if a[0] < 0:
        H = H.copy()
        H[:, 0] = -H[:, 0]
    return H


def canonical_ics_omega_sigma(dist: ScaleMixtureSN) -> CanonicalTransform:
    """Canonical transform by ICS on ``(Omega, Sigma)``.

    Relative eigenvalues are ``E(S^2) - (2/pi) E(S)^2 delta*^2`` (skew
    direction, first column) and ``E(S^2)`` with multiplicity ``d - 1``.
    When the spectrum is numerically flat but ``alpha != 0`` the CP route is
    used instead.
    """
    params = dist.params
    try:
        _, Sigma = smsn_mean_cov(dist)
    except MomentNotExistError as exc:
        raise MomentNotExistError(
            f"ICS on (Omega, Sigma) needs a finite covariance: {exc}", exc.condition
        ) from None
    pair = ScatterPair(params.Omega, Sigma, ("Omega", "Sigma"))
    H, lam = ics_from_scatter(pair)
    if params.d > 1 and params.alpha_star > 0 and lam[-1] - lam[0] < DEGENERATE_RTOL * abs(lam[-1]):
        ct = canonical_cp(params)
        return CanonicalTransform(ct.H, ct.canonical_params, CP, fallback="flat (Omega, Sigma) spectrum")
    H = _skew_first_sign(params, H)
    return CanonicalTransform(H, _transformed(params, H), ICS_OMEGA_SIGMA, lam, pair)


def _standardized_third(dist: ScaleMixtureSN, H: NDArray, Sigma: NDArray) -> NDArray:
    """Standardized third central moment of each coordinate of ``H'(Y - xi)``."""
    p, mixing = dist.params, dist.mixing
    c = H.T @ (p.omega * p.delta)
    var = np.einsum("ij,jk,ki->i", H.T, Sigma, H)
    if not mixing.has_moment(3):
        return np.abs(c) / np.sqrt(var)
    s1, s2, s3 = (mixing_moment(mixing, k) for k in (1, 2, 3))
    v = np.einsum("ij,jk,ki->i", H.T, p.Omega, H)
    mu = s1 * B * c
    third = s3 * B * (3.0 * v * c - c**3) - 3.0 * mu * s2 * v + 2.0 * mu**3
    return third / var**1.5


def canonical_ics_sigma_kappa(
    dist: ScaleMixtureSN,
    kappa: NDArray,
    sigma: Optional[NDArray] = None,
) -> CanonicalTransform:
    """Canonical transform by ICS on ``(Sigma, K)``.

    ``kappa`` is the kurtosis scatter (analytic or empirical); ``sigma``
    defaults to the analytic covariance.  ``H`` is normalized by
    ``H' Sigma H = I``.  The column whose transformed coordinate has the
    largest standardized third moment in magnitude is the skew direction and
    is moved to position 1.

    Raises
    ------
    DegeneratePairError
        When ``Sigma`` and ``K`` are proportional but ``alpha != 0``.
    """
    params = dist.params
    if sigma is None:
        _, sigma = smsn_mean_cov(dist)
    pair = ScatterPair(sigma, kappa, ("Sigma", "K"))
    H, lam = ics_from_scatter(pair)
    d = params.d
    flat = lam[-1] - lam[0] <= DEGENERATE_RTOL * abs(lam[-1])
    if d > 1 and flat:
        if params.alpha_star > 0:
            raise DegeneratePairError(
                "Sigma and K are proportional; the pair cannot identify the skew direction"
            )
        return CanonicalTransform(H, _transformed(params, H), ICS_SIGMA_KAPPA, lam, pair)
    skew = int(np.argmax(np.abs(_standardized_third(dist, H, sigma))))
    order = [skew] + [j for j in range(d) if j != skew]
    H, lam = H[:, order], lam[order]
    H = _skew_first_sign(params, H)
    return CanonicalTransform(H, _transformed(params, H), ICS_SIGMA_KAPPA, lam, pair)


@dataclass(frozen=True)
class CanonicalReport:
    """Deviations found by :func:`verify_canonical`.

    ``checks`` maps a check name to ``{"deviation", "location", "passed"}``;
    ``location`` is the index of the worst entry.
    """

    checks: Dict[str, dict]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def to_dict(self) -> dict:
        return {"passed": self.passed, "tolerance": self.tolerance, "checks": self.checks}


def verify_canonical(
    ct: CanonicalTransform, dist: ScaleMixtureSN, tol: Optional[float] = None
) -> CanonicalReport:
    """Check that ``ct.H`` really produces a canonical form of ``dist``.

    Checks: ``shape`` (transformed shape is ``(alpha*, 0, ..., 0)``),
    ``covariance`` (``H' Sigma H`` is diagonal with the canonical variances
    ``sigma*^2, E(S^2), ...`` times the column scales ``diag(H' Omega H)``),
    ``skew_row`` (first row of ``H^{-1}`` parallel to ``omega delta``) and, for
    ``CP``/``ICS_OmegaSigma``, ``omega_identity`` (``H' Omega H = I``).
    """
    if isinstance(dist, SkewNormalParams):
        dist = ScaleMixtureSN(dist)
    if tol is None:
        tol = 1e-10 if ct.method == CP else 1e-8
    params = dist.params
    H = ct.H
    d = params.d
    checks = {}

    def record(name, dev_array):
        dev_array = np.abs(np.atleast_1d(dev_array)).ravel()
        loc = int(np.argmax(dev_array))
        dev = float(dev_array[loc])
        checks[name] = {"deviation": dev, "location": loc, "passed": bool(dev <= tol)}

    shape = _transformed(params, H).alpha
    target = np.zeros(d)
    target[0] = params.alpha_star
    record("shape", shape - target)

    HOH = H.T @ params.Omega @ H
    if dist.mixing.has_moment(2):
        _, Sigma = smsn_mean_cov(dist)
        cm = canonical_moments(dist)
        var = np.full(d, cm.sigma_sq)
        var[0] = cm.sigma_star_sq
        expected = np.diag(np.diag(HOH) * var)
        record("covariance", H.T @ Sigma @ H - expected)

    wd = params.omega * params.delta
    row = np.linalg.inv(H)[0]
    if np.linalg.norm(wd) > 0:
        u = wd / np.linalg.norm(wd)
        resid = row - (row @ u) * u
        record("skew_row", resid / np.linalg.norm(row))
    else:
        record("skew_row", 0.0)

    if ct.method in (CP, ICS_OMEGA_SIGMA):
        record("omega_identity", HOH - np.eye(d))
    else:
        record("omega_diagonal", HOH - np.diag(np.diag(HOH)))
    return CanonicalReport(checks, tol)
