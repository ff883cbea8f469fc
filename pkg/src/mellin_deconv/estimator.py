"""Spectral cut-off density estimator for multiplicative deconvolution.

The estimator inverts ``M̂_c(t) / M_c[g](t)`` over the cuboid ``Q_k``, where
``M̂_c`` is the empirical Mellin transform of the contaminated sample and
``g`` the known noise density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import Distribution, ProductModel, SampleMatrix, as_product
from .mellin import TWO_PI, FrequencyFunction
from .quadrature import (
    CutoffVector,
    MellinContext,
    QuadratureConfig,
    axis_nodes,
    log_grid,
    simpson_weights,
    tensor_weights,
)

__all__ = [
    "empirical_mellin",
    "empirical_mellin_mesh",
    "delta_g",
    "DensityEstimate",
    "estimate_at",
    "estimate_on_grid",
    "RiskDecomposition",
    "theoretical_risk",
    "sigma_moment",
    "minimax_cutoff_schedule",
    "weighted_risk_mellin",
    "weighted_risk_spatial",
]

_CHUNK = 256


def _sample(sample, d: int | None = None) -> SampleMatrix:
    s = sample if isinstance(sample, SampleMatrix) else SampleMatrix(sample)
    if d is not None and s.d != d:
        raise ValueError(f"sample has {s.d} columns, expected {d}")
    return s


def empirical_mellin(sample, ctx: MellinContext, t):
    """``n^-1 sum_j prod_i Y_ji^(c_i - 1 + i t_i)`` at one or several frequencies."""
    Y = _sample(sample, ctx.d)
    logs = np.log(np.asarray(Y))
    t_arr = np.asarray(t, dtype=float)
    single = t_arr.ndim == 0 or (t_arr.ndim == 1 and (ctx.d > 1 or t_arr.size == 1))
    t_arr = t_arr.reshape(-1, ctx.d)
    expo = (ctx.c_array - 1.0)[None, :] + 1j * t_arr
    vals = np.exp(logs @ expo.T).mean(axis=0)
    return complex(vals[0]) if single else vals


def empirical_mellin_mesh(sample, ctx: MellinContext, axes: Sequence[np.ndarray]) -> np.ndarray:
    """Empirical Mellin transform on the tensor mesh spanned by ``axes``.

    Uses the product structure ``Y^(s) = prod_i Y_i^(s_i)``: one ``n × m_i``
    factor per axis, contracted over the sample index.
    """
    Y = _sample(sample, ctx.d)
    logs = np.log(np.asarray(Y))
    c = ctx.c_array
    factors = [np.exp(np.multiply.outer(logs[:, j], (c[j] - 1.0) + 1j * np.asarray(ax))) for j, ax in enumerate(axes)]
    n = Y.n
    if ctx.d == 1:
        return factors[0].mean(axis=0)
    if ctx.d == 2:
        return (factors[0].T @ factors[1]) / n
    letters = "abcdefghijklmnopqrstuvwxyz"
    expr = ",".join("z" + letters[j] for j in range(ctx.d)) + "->" + letters[: ctx.d]
    return np.einsum(expr, *factors, optimize=True) / n


def _noise_on_axes(noise, ctx: MellinContext, axes, tol_zero: float) -> np.ndarray:
    prod = as_product(noise, ctx.d)
    factors = prod.axis_mellin(ctx.c, axes)
    for j, (f, ax) in enumerate(zip(factors, axes)):
        small = np.abs(f) < tol_zero
        if np.any(small):
            t_bad = float(ax[np.argmax(small)])
            raise ValueError(
                f"noise Mellin transform vanishes (|M_c[g]| < {tol_zero:g}) on axis {j} at t={t_bad}"
            )
    out = factors[0]
    for f in factors[1:]:
        out = np.multiply.outer(out, f)
    return out


def delta_g(noise, ctx: MellinContext, k, quad: QuadratureConfig = QuadratureConfig()) -> float:
    """``Δ_g(k) = (2π)^-d ∫_{Q_k} |M_c[g](t)|^-2 dt``."""
    k = CutoffVector(k, ctx.d)
    axes, weights = zip(*(axis_nodes(kj, quad.step_t) for kj in k))
    g = _noise_on_axes(noise, ctx, axes, quad.tol_zero)
    return float(np.sum(tensor_weights(weights) / (g.real**2 + g.imag**2)) / TWO_PI**ctx.d)


class DensityEstimate:
    """The spectral cut-off estimate ``f̂_k`` for one sample.

    Node values of ``M̂_c / M_c[g]`` on the Simpson grid of ``Q_k`` are
    computed once at construction; evaluation afterwards is read-only.
    Values may be negative: the estimator does not preserve positivity.
    """

    def __init__(
        self,
        sample,
        noise,
        ctx: MellinContext,
        k,
        quad: QuadratureConfig = QuadratureConfig(),
        transform: FrequencyFunction | None = None,
    ):
        self.ctx = ctx
        self.k = CutoffVector(k, ctx.d)
        self.quad = quad
        self.noise = as_product(noise, ctx.d)
        self.sample = None if sample is None else _sample(sample, ctx.d)
        axes, weights = zip(*(axis_nodes(kj, quad.step_t) for kj in self.k))
        self.axes = [np.asarray(a) for a in axes]
        self.weights = tensor_weights(weights)
        g = _noise_on_axes(self.noise, ctx, self.axes, quad.tol_zero)
        if transform is None:
            if self.sample is None:
                raise ValueError("need a sample or an explicit transform")
            m_hat = empirical_mellin_mesh(self.sample, ctx, self.axes)
        else:
            mesh = np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)
            m_hat = transform(mesh)
        self.ratio = m_hat / g
        self._finish()

    @classmethod
    def from_nodes(cls, axes, weights, ratio, noise, ctx, k, quad, sample=None) -> "DensityEstimate":
        """Assemble an estimate from precomputed node values (no recomputation)."""
        self = cls.__new__(cls)
        self.ctx, self.quad = ctx, quad
        self.k = CutoffVector(k, ctx.d)
        self.noise = as_product(noise, ctx.d)
        self.sample = sample
        self.axes = [np.asarray(a) for a in axes]
        self.weights = np.asarray(weights)
        self.ratio = np.asarray(ratio)
        self._finish()
        return self

    def _finish(self):
        self._coef = self.weights * self.ratio / TWO_PI**self.ctx.d
        self._coef.setflags(write=False)

    @property
    def d(self) -> int:
        return self.ctx.d

    def _kernels(self, x: np.ndarray) -> list[np.ndarray]:
        """``x_j^(-c_j - i t_j)`` for each axis; shape ``(n_points, n_nodes_j)``."""
        c = self.ctx.c_array
        logs = np.log(x)
        return [np.exp(-np.multiply.outer(logs[:, j], c[j] + 1j * ax)) for j, ax in enumerate(self.axes)]

    def __call__(self, x) -> np.ndarray:
        return self.on_grid(x)

    def at(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.on_grid(x.reshape(1, -1))[0])

    def on_grid(self, points) -> np.ndarray:
        """Estimate at a list of points; each value is computed independently
        of the others, so results match pointwise calls bit for bit."""
        pts = np.asarray(points, dtype=float)
        if pts.size == 0:
            return np.empty(0)
        if self.d == 1 and (pts.ndim <= 1 or pts.shape[-1] != 1):
            pts = pts.reshape(-1, 1)
        pts = pts.reshape(-1, self.d)
        if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
            raise ValueError("evaluation points must be strictly positive and finite")
        out = np.empty(len(pts))
        coef = self._coef
        for start in range(0, len(pts), _CHUNK):
            block = pts[start : start + _CHUNK]
            kern = self._kernels(block)
            if self.d == 1:
                out[start : start + len(block)] = (kern[0] * coef).sum(axis=-1).real
                continue
            for i in range(len(block)):
                out[start + i] = self._point_complex(kern, i).real
        return out

    def on_mesh(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        """Estimate on the tensor grid ``axes[0] × ... × axes[d-1]``.

        Uses matrix products, so values agree with :meth:`on_grid` only up to
        rounding.
        """
        axes = [np.asarray(a, dtype=float).ravel() for a in axes]
        if len(axes) != self.d:
            raise ValueError(f"need {self.d} axes")
        c = self.ctx.c_array
        out = self._coef
        for j, (ax, t) in enumerate(zip(axes, self.axes)):
            if np.any(ax <= 0):
                raise ValueError("mesh coordinates must be strictly positive")
            kern = np.exp(-np.multiply.outer(np.log(ax), c[j] + 1j * t))
            out = np.tensordot(out, kern, axes=([0], [1]))
        return out.real

    def imaginary_residue(self, points) -> float:
        """Largest imaginary part of the inverse integral over ``points``."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.d)
        kern = self._kernels(pts)
        return max(abs(self._point_complex(kern, i).imag) for i in range(len(pts)))

    def _point_complex(self, kern, i) -> complex:
        acc = self._coef
        for j in range(self.d - 1, -1, -1):
            acc = (acc * kern[j][i]).sum(axis=-1)
        return complex(acc)


def estimate_at(est: DensityEstimate, x) -> float:
    return est.at(x)


def estimate_on_grid(est: DensityEstimate, x_grid) -> list[float]:
    return est.on_grid(x_grid).tolist()


@dataclass(frozen=True)
class RiskDecomposition:
    """Bias/variance split of the weighted L² risk at a fixed cut-off."""

    bias_sq: float
    variance_bound: float
    sigma: float

    def __post_init__(self):
        for name in ("bias_sq", "variance_bound", "sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> float:
        return self.bias_sq + self.variance_bound


def sigma_moment(f_model, noise, ctx: MellinContext) -> float:
    """``σ = E[Y^(2c-2)] = E[X^(2c-2)] E[U^(2c-2)]`` from closed forms."""
    f = as_product(f_model, ctx.d)
    g = as_product(noise, ctx.d)
    p = 2.0 * ctx.c_array - 2.0
    try:
        return f.moment(p) * g.moment(p)
    except ValueError as exc:
        raise ValueError(
            f"σ = E[Y^(2c-2)] diverges for c={list(ctx.c)} ({exc}); choose a different c"
        ) from None


def _axis_power_integrals(comp: Distribution, c: float, k: float, k_max: float, step: float):
    """``(∫_{|t|<=k} |M|^2, ∫_{k<|t|<=k_max} |M|^2)`` for one univariate factor."""
    t_in, w_in = axis_nodes(k, step)
    inside = float(np.sum(w_in * np.abs(comp.mellin(c, t_in)) ** 2))
    if k_max <= k:
        return inside, 0.0
    # complement [k, k_max] on one side; symmetric in t
    half = k_max - k
    n = max(2, int(math.ceil(half / step)))
    n += n % 2
    t_out = np.linspace(k, k_max, n + 1)
    outside = 2.0 * float(np.sum(simpson_weights(n, half / n) * np.abs(comp.mellin(c, t_out)) ** 2))
    return inside, outside


def _outside_mass(f: ProductModel, ctx: MellinContext, k: CutoffVector, k_max, step: float) -> float:
    """``∫_{Q_kmax \\ Q_k} |M_c[f]|²`` for a tensor-product target.

    ``prod(in + out) - prod(in)`` is expanded into telescoping terms that are
    each non-negative.
    """
    k_max = CutoffVector(k_max, ctx.d)
    inside, outside = [], []
    for j, comp in enumerate(f.components):
        i_j, o_j = _axis_power_integrals(comp, ctx.c[j], k[j], max(k_max[j], k[j]), step)
        inside.append(i_j)
        outside.append(o_j)
    total = 0.0
    for j in range(ctx.d):
        term = outside[j]
        for i in range(ctx.d):
            if i < j:
                term *= inside[i]
            elif i > j:
                term *= inside[i] + outside[i]
        total += term
    return total


def theoretical_risk(
    f_model,
    noise,
    ctx: MellinContext,
    k,
    n: int,
    quad: QuadratureConfig = QuadratureConfig(),
    k_max: float | Sequence[float] = 200.0,
) -> RiskDecomposition:
    """Bias ``||f - f_k||²`` and variance bound ``σ Δ_g(k) / n``.

    The bias is the mass of ``|M_c[f]|²`` outside ``Q_k`` but inside
    ``Q_{k_max}``, assembled axis by axis for tensor-product targets.
    """
    k = CutoffVector(k, ctx.d)
    f = as_product(f_model, ctx.d)
    bias = _outside_mass(f, ctx, k, k_max, quad.step_t) / TWO_PI**ctx.d
    sigma = sigma_moment(f, noise, ctx)
    var = sigma * delta_g(noise, ctx, k, quad) / n
    return RiskDecomposition(bias_sq=bias, variance_bound=var, sigma=sigma)


def minimax_cutoff_schedule(s, gamma, n: int) -> CutoffVector:
    """``k_i = n^(1 / (2 s_i + s_i sum_j (2 γ_j + 1) / s_j))``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    if s.shape != gamma.shape:
        raise ValueError("s and gamma must have the same length")
    if np.any(s <= 0) or np.any(gamma < 0):
        raise ValueError("s must be positive and gamma non-negative")
    total = np.sum((2.0 * gamma + 1.0) / s)
    expo = 1.0 / (2.0 * s + s * total)
    return CutoffVector(float(n) ** expo)


# -- risks against a known target ----------------------------------------------------


def weighted_risk_mellin(est: DensityEstimate, target, k_max: float | Sequence[float] = 200.0) -> float:
    """``||f - f̂_k||²`` via Plancherel, using the target's closed-form transform.

    Inside ``Q_k`` this integrates ``|M̂/M_g - M_c[f]|²`` on the estimate's own
    nodes; the outside mass of ``|M_c[f]|²`` is added from the tensor factors.
    """
    ctx = est.ctx
    f = as_product(target, ctx.d)
    factors = f.axis_mellin(ctx.c, est.axes)
    mf = factors[0]
    for fac in factors[1:]:
        mf = np.multiply.outer(mf, fac)
    diff = est.ratio - mf
    inner = float(np.sum(est.weights * (diff.real**2 + diff.imag**2)))
    outside = _outside_mass(f, ctx, est.k, k_max, est.quad.step_t)
    return (inner + outside) / TWO_PI**ctx.d


def risk_window(target, pad_decades: float = 15.0, tail: float = 1e-3) -> list[tuple[float, float]]:
    """Spatial window for risk integrals: target quantile range padded in log scale.

    The estimate's cut-off edges make it decay only like ``1/|log x|``, so
    the window extends well beyond the target's support.
    """
    f = as_product(target)
    pad = 10.0**pad_decades
    out = []
    for comp in f.components:
        lo, hi = comp.support
        q_lo = float(comp.ppf(tail)) if lo <= 0 else lo
        q_hi = float(comp.ppf(1.0 - tail)) if not math.isfinite(hi) else hi
        out.append((q_lo / pad, q_hi * pad))
    return out


def weighted_risk_spatial(
    est: DensityEstimate,
    target,
    window: Sequence[tuple[float, float]] | None = None,
    points_per_decade: int | None = None,
    clip_negative: bool = False,
) -> float:
    """``∫ (f - f̂_k)² x^(2c-1) dx`` by Simpson quadrature in ``log x``."""
    ctx = est.ctx
    f = as_product(target, ctx.d)
    window = window or risk_window(f)
    ppd = points_per_decade or est.quad.points_per_decade
    axes, weights = zip(*(log_grid(lo, hi, ppd) for lo, hi in window))
    c = ctx.c_array
    if ctx.d == 1:
        x = axes[0]
        fhat = est.on_grid(x)
        truth = f.components[0].pdf(x)
    else:
        fhat = est.on_mesh(axes)
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        truth = f.pdf(mesh)
    if clip_negative:
        fhat = np.maximum(fhat, 0.0)
    w = tensor_weights(weights)
    wt = np.ones(())
    for j, ax in enumerate(axes):
        wt = np.multiply.outer(wt, ax ** (2.0 * c[j] - 1.0))
    err = truth - fhat
    return float(np.sum(w * wt * err * err))
