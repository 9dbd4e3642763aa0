"""
Empirical estimators used as independent oracles.

The bootstrap works on moment sums: for every chunk of rows the monomials of
degree <= 4 are formed once and multiplied by the multinomial resampling
counts of all replicates.  Counts are drawn per chunk from generators seeded
by ``(seed, chunk index)``, so the result does not depend on how chunks are
scheduled across worker threads.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from smsn.exceptions import ValidationError

N_BOOT = 200
CHUNK = 16384


@dataclass
class EmpiricalReport:
    """Point estimates with Monte-Carlo standard errors."""

    estimate: Dict[str, float]
    mc_se: Dict[str, float]
    n: int
    seed: Optional[int]
    extra: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"estimate": self.estimate, "mc_se": self.mc_se, "n": self.n, "seed": self.seed}
        out.update(self.extra)
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def read_samples_csv(path) -> NDArray:
    """Read a header-less CSV with one observation per row."""
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows:
        raise ValidationError(f"{path} contains no observations")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValidationError(f"{path} has rows of different lengths")
    return np.array(rows)


def write_samples_csv(samples: NDArray, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    for row in np.atleast_2d(samples):
        writer.writerow(["%.17g" % v for v in row])


def _check_samples(samples: ArrayLike) -> NDArray:
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    if n <= d + 1:
        raise ValidationError(f"need more than d + 1 = {d + 1} observations, got {n}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("samples contain non-finite values")
    return X


def _standardize(X: NDArray) -> NDArray:
    # the statistics are affine invariant; this only improves conditioning
    Xc = X - X.mean(axis=0)
    sd = Xc.std(axis=0)
    if np.any(sd <= 0):
        raise ValidationError("sample covariance is singular")
    return Xc / sd


class _Monomials:
    """Index bookkeeping for all monomials of degree 1..4 in d variables."""

    def __init__(self, d: int):
        self.d = d
        self.terms = [c for k in range(1, 5) for c in itertools.combinations_with_replacement(range(d), k)]
        self.pos = {t: i for i, t in enumerate(self.terms)}

    def evaluate(self, X: NDArray) -> NDArray:
        out = np.empty((X.shape[0], len(self.terms)))
        for i, t in enumerate(self.terms):
            if len(t) == 1:
                out[:, i] = X[:, t[0]]
            else:
                out[:, i] = out[:, self.pos[t[:-1]]] * X[:, t[-1]]
        return out

    def tensors(self, raw: NDArray):
        """Full symmetric raw-moment tensors of orders 1..4 from monomial means.

        ``raw`` has shape ``(..., n_terms)``.
        """
        d = self.d
        batch = raw.shape[:-1]
        out = []
        for k in range(1, 5):
            T = np.empty(batch + (d,) * k)
            for idx in itertools.product(range(d), repeat=k):
                T[(Ellipsis,) + idx] = raw[..., self.pos[tuple(sorted(idx))]]
            out.append(T)
        return out


def _mardia_from_raw(mono: _Monomials, raw: NDArray) -> Tuple[NDArray, NDArray]:
    """Sample Mardia ``b1d``/``b2d`` from raw moments (batched)."""
    M1, M2, M3, M4 = mono.tensors(raw)
    m = M1
    C2 = M2 - np.einsum("...i,...j->...ij", m, m)
    C3 = (
        M3
        - np.einsum("...i,...jk->...ijk", m, M2)
        - np.einsum("...j,...ik->...ijk", m, M2)
        - np.einsum("...k,...ij->...ijk", m, M2)
        + 2.0 * np.einsum("...i,...j,...k->...ijk", m, m, m)
    )
    mm = np.einsum("...i,...j->...ij", m, m)
    C4 = (
        M4
        - np.einsum("...i,...jkl->...ijkl", m, M3)
        - np.einsum("...j,...ikl->...ijkl", m, M3)
        - np.einsum("...k,...ijl->...ijkl", m, M3)
        - np.einsum("...l,...ijk->...ijkl", m, M3)
        + np.einsum("...ij,...kl->...ijkl", mm, M2)
        + np.einsum("...ik,...jl->...ijkl", mm, M2)
        + np.einsum("...il,...jk->...ijkl", mm, M2)
        + np.einsum("...jk,...il->...ijkl", mm, M2)
        + np.einsum("...jl,...ik->...ijkl", mm, M2)
        + np.einsum("...kl,...ij->...ijkl", mm, M2)
        - 3.0 * np.einsum("...ij,...kl->...ijkl", mm, mm)
    )
    # resamples of tiny samples can be singular; those replicates become nan
    ok = np.linalg.cond(C2) < 1e12
    eye = np.broadcast_to(np.eye(mono.d), C2.shape)
    P = np.linalg.inv(np.where(ok[..., None, None], C2, eye))
    b1 = np.einsum("...ijk,...lmn,...il,...jm,...kn->...", C3, C3, P, P, P, optimize=True)
    b2 = np.einsum("...ij,...kl,...ijkl->...", P, P, C4)
    return np.where(ok, b1, np.nan), np.where(ok, b2, np.nan)


def empirical_mardia(
    samples: ArrayLike,
    n_boot: int = N_BOOT,
    seed: Optional[int] = 0,
    workers: int = 1,
) -> EmpiricalReport:
    """Sample Mardia skewness ``b1d`` and kurtosis ``b2d`` with bootstrap s.e.

    ``b1d = sum_{ijk} m_ijk^2`` over the third moments of the standardized
    sample and ``b2d`` is the mean fourth power of the Mahalanobis norm, both
    with the divisor-n covariance.  Estimates of the excess kurtosis
    ``b2d - d(d+2)`` are reported as ``g2d``.
    """
    X = _standardize(_check_samples(samples))
    n, d = X.shape
    try:
        np.linalg.cholesky(X.T @ X / n)
    except np.linalg.LinAlgError:
        raise ValidationError("sample covariance is singular") from None
    mono = _Monomials(d)
    starts = list(range(0, n, CHUNK))
    sizes = np.array([min(CHUNK, n - s) for s in starts])
    master = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    totals = master.multinomial(n, sizes / n, size=n_boot) if n_boot else None

    def work(c):
        block = mono.evaluate(X[starts[c] : starts[c] + sizes[c]])
        full = block.sum(axis=0)
        if not n_boot:
            return full, None
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, c)))
        t = totals[:, c]
        idx = rng.integers(0, sizes[c], size=int(t.sum()))
        lab = np.repeat(np.arange(n_boot), t)
        counts = np.bincount(lab * sizes[c] + idx, minlength=n_boot * sizes[c])
        counts = counts.reshape(n_boot, sizes[c]).astype(float)
        return full, counts @ block

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, range(len(starts))))
    else:
        parts = [work(c) for c in range(len(starts))]
    full = np.zeros(len(mono.terms))
    boot = np.zeros((n_boot, len(mono.terms)))
    for f, b in parts:  # fixed order keeps the sums bit-identical
        full += f
        if b is not None:
            boot += b
    b1, b2 = _mardia_from_raw(mono, full / n)
    estimate = {"b1d": float(b1), "b2d": float(b2), "g2d": float(b2) - d * (d + 2)}
    if n_boot:
        bb1, bb2 = _mardia_from_raw(mono, boot / n)
        se = {"b1d": float(np.nanstd(bb1, ddof=1)), "b2d": float(np.nanstd(bb2, ddof=1))}
    else:
        se = {"b1d": math.nan, "b2d": math.nan}
    se["g2d"] = se["b2d"]
    return EmpiricalReport(estimate, se, n, seed, {"d": d, "n_boot": n_boot})


@dataclass
class ScatterEstimate:
    """Sample covariance, sample kurtosis scatter and CLT s.e. of its entries."""

    Sigma: NDArray
    Kappa: NDArray
    kappa_se: NDArray
    exponent: int


def empirical_scatter_pair(samples: ArrayLike, exponent: int = 1) -> ScatterEstimate:
    """Sample ``Sigma`` and ``K = mean{[x' Sigma^{-1} x]^exponent x x'}`` of centred data."""
    if exponent not in (1, 2):
        raise ValidationError("kurtosis scatter exponent must be 1 or 2")
    X = _check_samples(samples)
    n, d = X.shape
    Xc = X - X.mean(axis=0)
    Sigma = Xc.T @ Xc / n
    try:
        L = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError:
        raise ValidationError("sample covariance is singular") from None
    W = np.linalg.solve(L, Xc.T)
    q = np.sum(W * W, axis=0) ** exponent
    Kappa = (Xc * q[:, None]).T @ Xc / n
    second = ((Xc * q[:, None]) ** 2).T @ (Xc**2) / n
    kappa_se = np.sqrt(np.maximum(second - Kappa**2, 0.0) / n)
    return ScatterEstimate(0.5 * (Sigma + Sigma.T), 0.5 * (Kappa + Kappa.T), kappa_se, exponent)


def grid_mode_search(
    density: Callable[[NDArray], NDArray],
    center: ArrayLike,
    radius: float,
    step: float,
) -> NDArray:
    """Grid argmax of ``density`` over the cube ``center +/- radius``.

    ``density`` must accept an ``(n, d)`` array of points.  The coarse
    argmax is refined once on a grid of spacing ``step / 10`` spanning one
    coarse step either side.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    d = center.size
    if d > 3:
        raise ValidationError("grid mode search supports d <= 3 only")
    if not (radius > 0 and step > 0):
        raise ValidationError("radius and step must be positive")

    def argmax_on(c, half, h):
        m = int(round(half / h))
        axis = np.arange(-m, m + 1) * h
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        pts = c + np.stack([g.ravel() for g in mesh], axis=1)
        vals = np.asarray(density(pts))
        return pts[int(np.argmax(vals))]

    coarse = argmax_on(center, radius, step)
    return argmax_on(coarse, step, step / 10.0)
