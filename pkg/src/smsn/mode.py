"""
Modes of skew-normal, skew-t and general scale-mixture distributions.

In canonical coordinates the mode is ``(y0, 0, ..., 0)``, so only a scalar
equation has to be solved; mapping back gives

    mode = xi + (y0 / delta_star) omega delta

i.e. mode, mean and location all lie on the line through ``xi`` with
direction ``omega delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from numpy.typing import NDArray
from scipy import optimize, special

from smsn.distributions import (
    Degenerate,
    ScaleMixtureSN,
    SkewNormalParams,
    SkewT,
    mixture_quad,
    smsn_density,
    sn_density_gradient,
    st_density_gradient,
)
from smsn.exceptions import ConvergenceError, UnsupportedOperationError, ValidationError

PROVEN = "proven"
NOT_PROVEN = "not_proven"

DELTA_STAR_MIN = 1e-12
MODE_QUAD_EPSREL = 1e-10
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ModeResult:
    """Mode of a distribution and how it was obtained.

    ``direction`` is ``omega delta / delta_star`` (zero when ``delta = 0``).
    ``sign_changes`` lists bracketing intervals of every sign change of the
    scalar function found while scanning (general mixtures only).
    """

    mode: NDArray
    scalar_root: float
    direction: NDArray
    residual_gradient_norm: float
    uniqueness: str
    sign_changes: List[tuple] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode.tolist(),
            "scalar_root": self.scalar_root,
            "uniqueness": self.uniqueness,
            "gradient_norm": self.residual_gradient_norm,
        }
        if self.sign_changes:
            out["sign_changes"] = [list(iv) for iv in self.sign_changes]
        return out


def _expand_bracket(f: Callable[[float], float], hi: float = 1.0, max_doublings: int = 200):
    """Double ``hi`` until ``f(hi) > 0``; ``f(0) < 0`` is assumed."""
    for _ in range(max_doublings):
        if f(hi) > 0:
            return hi
        hi *= 2.0
    raise ConvergenceError("could not bracket the root of the scalar mode equation")


def _solve(f: Callable[[float], float], lo: float, hi: float, xtol: float) -> float:
    root = optimize.brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    # brentq returns one end of the final bracket; keep the better neighbour
    cands = [root, np.nextafter(root, -np.inf), np.nextafter(root, np.inf)]
    return min(cands, key=lambda y: abs(f(y)))


def sn_mode_equation(y: float, alpha_star: float) -> float:
    """Left-hand side of ``y Phi(a y) - a phi(a y) = 0`` (``a = alpha_star``)."""
    u = alpha_star * y
    return y * special.ndtr(u) - alpha_star * math.exp(-0.5 * u * u) / _SQRT_2PI


def sn_mode_scalar(alpha_star: float) -> float:
    """Mode of the scalar ``SN_1(0, 1, alpha_star)``, the unique root of :func:`sn_mode_equation`."""
    if alpha_star < 0:
        raise ValidationError("alpha_star must be nonnegative")
    if alpha_star == 0:
        return 0.0
    f = lambda y: sn_mode_equation(y, alpha_star)  # noqa: E731
    hi = _expand_bracket(f, hi=min(1.0, 10.0 / alpha_star))
    return _solve(f, 0.0, hi, xtol=np.finfo(float).tiny)


def _t_pdf(x: float, df: float) -> float:
    return math.exp(
        special.gammaln(0.5 * (df + 1.0))
        - special.gammaln(0.5 * df)
        - 0.5 * math.log(df * math.pi)
        - 0.5 * (df + 1.0) * math.log1p(x * x / df)
    )


def st_mode_equation(y: float, alpha_star: float, nu: float, d: int) -> float:
    """Left-hand side of the scalar skew-t mode equation.

    ``y T1(w; nu+d) - t1(w; nu+d) nu alpha_star / ((nu + y^2)^{1/2} (nu + d)^{1/2})``
    with ``w = alpha_star y sqrt((nu + d) / (nu + y^2))``.
    """
    df = nu + d
    w = alpha_star * y * math.sqrt(df / (nu + y * y))
    return y * special.stdtr(df, w) - _t_pdf(w, df) * nu * alpha_star / (
        math.sqrt(nu + y * y) * math.sqrt(df)
    )


def st_mode_scalar(alpha_star: float, nu: float, d: int) -> float:
    """Root ``y0 >= 0`` of :func:`st_mode_equation`, the canonical skew-t mode."""
    if alpha_star < 0:
        raise ValidationError("alpha_star must be nonnegative")
    if not nu > 0:
        raise ValidationError(f"degrees of freedom must be > 0, got {nu!r}")
    if alpha_star == 0:
        return 0.0
    f = lambda y: st_mode_equation(y, alpha_star, nu, d)  # noqa: E731
    hi = _expand_bracket(f, hi=min(1.0, 10.0 / alpha_star))
    return _solve(f, 0.0, hi, xtol=np.finfo(float).tiny)


def _direction(params: SkewNormalParams) -> NDArray:
    if params.delta_star < DELTA_STAR_MIN:
        return np.zeros(params.d)
    return params.omega * params.delta / params.delta_star


def _place(params: SkewNormalParams, root: float) -> NDArray:
    return params.xi + root * _direction(params)


def sn_mode(params: SkewNormalParams) -> ModeResult:
    """Unique mode ``xi + (m0 / delta_star) omega delta`` of ``SN_d``."""
    if isinstance(params, ScaleMixtureSN):
        params = params.params
    root = 0.0 if params.delta_star < DELTA_STAR_MIN else sn_mode_scalar(params.alpha_star)
    mode = _place(params, root)
    grad = np.linalg.norm(sn_density_gradient(params, mode))
    return ModeResult(mode, root, _direction(params), float(grad), PROVEN)


def st_mode(params: SkewNormalParams, nu: float) -> ModeResult:
    """Unique mode ``xi + (y0 / delta_star) omega delta`` of ``ST_d(xi, Omega, alpha, nu)``."""
    if not nu > 0:
        raise ValidationError(f"degrees of freedom must be > 0, got {nu!r}")
    root = 0.0 if params.delta_star < DELTA_STAR_MIN else st_mode_scalar(params.alpha_star, nu, params.d)
    mode = _place(params, root)
    grad = np.linalg.norm(st_density_gradient(params, nu, mode))
    return ModeResult(mode, root, _direction(params), float(grad), PROVEN)


def fd_gradient(
    fun: Callable[[NDArray], float], x: NDArray, scale: Optional[NDArray] = None
) -> NDArray:
    """Five-point central differences with step ``1e-3 scale_i``.

    ``scale`` should be the spread of the function along each coordinate
    (e.g. ``omega``); it defaults to ``1 + |x_i|``.  The truncation error is
    ``O(h^4)``.
    """
    x = np.asarray(x, dtype=float)
    scale = 1.0 + np.abs(x) if scale is None else np.broadcast_to(np.asarray(scale, dtype=float), x.shape)
    g = np.empty_like(x)
    for i in range(x.size):
        h = 1e-3 * scale[i]
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (8.0 * (fun(x + e) - fun(x - e)) - (fun(x + 2 * e) - fun(x - 2 * e))) / (12.0 * h)
    return g


def smsn_mode_equation(y: float, dist: ScaleMixtureSN, epsrel: float = MODE_QUAD_EPSREL) -> float:
    """Scalar mode function of a general mixture, up to a positive constant.

    ``int s^{-d-1} phi(y/s) {(y/s) Phi(a y/s) - a phi(a y/s)} f_S(s) ds``
    with ``a = alpha_star``, by quadrature over the mixing density.
    """
    a = dist.params.alpha_star
    d = dist.d

    def log_weight(s):
        u = y / s
        return -(d + 1) * math.log(s) - 0.5 * u * u

    def brace(s):
        u = y / s
        v = a * u
        return u * special.ndtr(v) - a * math.exp(-0.5 * v * v) / _SQRT_2PI

    return mixture_quad(dist.mixing, log_weight, brace, epsrel=epsrel)


def smsn_mode(
    dist: ScaleMixtureSN,
    method: str = "auto",
    scan_points: int = 200,
) -> ModeResult:
    """Mode of a scale mixture of skew-normals.

    With ``method="auto"`` the degenerate and skew-t mixings use the exact
    routines.  Otherwise the scalar function of :func:`smsn_mode_equation`
    is bracketed, scanned for sign changes on ``[0, 2 B]`` (``B`` the first
    bracket end) and the first sign change is refined.  Uniqueness is not
    established for general mixtures; every sign change found is reported.
    """
    params, mixing = dist.params, dist.mixing
    if method not in ("auto", "quadrature"):
        raise ValidationError(f"unknown mode method {method!r}")
    if method == "auto":
        if isinstance(mixing, Degenerate):
            return sn_mode(params)
        if isinstance(mixing, SkewT):
            return st_mode(params, mixing.nu)
    if isinstance(mixing, Degenerate):
        return sn_mode(params)
    if not mixing.has_density:
        raise UnsupportedOperationError(f"{mixing.name} mixing has no density")

    def density(x):
        return smsn_density(dist, x)

    if params.delta_star < DELTA_STAR_MIN:
        mode = params.xi.copy()
        grad = np.linalg.norm(fd_gradient(density, mode, params.omega))
        return ModeResult(mode, 0.0, _direction(params), float(grad), NOT_PROVEN)

    f = lambda y: smsn_mode_equation(y, dist)  # noqa: E731
    hi = _expand_bracket(f, hi=min(1.0, 10.0 / params.alpha_star))
    grid = np.linspace(0.0, 2.0 * hi, scan_points + 1)
    vals = np.array([f(y) for y in grid])
    changes = [
        (float(grid[i]), float(grid[i + 1]))
        for i in range(scan_points)
        if np.sign(vals[i]) != np.sign(vals[i + 1])
    ]
    if not changes:
        raise ConvergenceError("no sign change of the scalar mode function was found")
    lo, up = changes[0]
    root = optimize.brentq(f, lo, up, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    mode = _place(params, root)
    grad = np.linalg.norm(fd_gradient(density, mode, params.omega))
    return ModeResult(mode, float(root), _direction(params), float(grad), NOT_PROVEN, changes)
