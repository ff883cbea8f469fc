"""Numerical Mellin-transform machinery.

Forward transforms, weighted norms and multiplicative convolutions are
spatial integrals computed by Simpson's rule in ``u = log x``; inverse
transforms and Plancherel norms are frequency integrals over cuboids ``Q_k``
computed by tensor-product Simpson rules on the anchored grid of
:mod:`mellin_deconv.quadrature`.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence, Union

import numpy as np

from .quadrature import (
    CutoffVector,
    MellinContext,
    QuadratureConfig,
    SetDifference,
    axis_nodes,
    log_grid,
    tensor_weights,
)

__all__ = [
    "FrequencyFunction",
    "mellin_forward",
    "mellin_inverse",
    "mult_convolve",
    "MultiplicativeConvolution",
    "plancherel_norm_sq",
    "weighted_l2_norm_sq",
    "sobolev_seminorm_sq",
    "frequency_mesh",
    "spatial_window",
]

TWO_PI = 2.0 * math.pi


class FrequencyFunction:
    """A map ``t ∈ R^d -> C`` evaluated on arrays of shape ``(..., d)``.

    ``conjugate_symmetric`` marks transforms of real-valued functions, for
    which ``H(-t) = conj(H(t))``.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], d: int, conjugate_symmetric: bool = False):
        self.fn = fn
        self.d = int(d)
        self.conjugate_symmetric = bool(conjugate_symmetric)

    @classmethod
    def from_model(cls, model, ctx: MellinContext) -> "FrequencyFunction":
        """Closed-form Mellin transform of a catalog model."""
        from .distributions import as_product

        prod = as_product(model, ctx.d)
        c = ctx.c
        for comp, cj in zip(prod.components, c):
            comp.check_c(cj)
        return cls(lambda t: prod.mellin(c, t), ctx.d, conjugate_symmetric=True)

    @classmethod
    def zero(cls, d: int) -> "FrequencyFunction":
        return cls(lambda t: np.zeros(np.shape(t)[:-1], dtype=complex), d, conjugate_symmetric=True)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if t.ndim == 0 or t.shape[-1] != self.d:
            if self.d == 1:
                t = t[..., None]
            else:
                raise ValueError(f"frequency points must have last dimension {self.d}")
        return np.asarray(self.fn(t), dtype=complex)

    def symmetry_defect(self, t) -> float:
        """``max |H(-t) - conj H(t)|`` over sampled points."""
        t = np.asarray(t, dtype=float)
        return float(np.max(np.abs(self(-t) - np.conj(self(t)))))


def _as_point(x, d: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.size == 1 and d > 1:
        arr = np.repeat(arr, d)
    if arr.shape != (d,):
        raise ValueError(f"{name} must have {d} entries")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def frequency_mesh(k: CutoffVector, step: float) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Per-axis nodes, the stacked mesh of shape ``(n_1, ..., n_d, d)`` and tensor weights."""
    axes, weights = zip(*(axis_nodes(kj, step) for kj in k))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return list(axes), mesh, tensor_weights(weights)


def _checked(values: np.ndarray, points: np.ndarray, what: str) -> np.ndarray:
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        where = points[tuple(idx)]
        raise FloatingPointError(f"{what} is not finite at grid point {np.round(where, 12).tolist()}")
    return values


# -- spatial windows -----------------------------------------------------------------


def _support_of(h, d: int) -> list[tuple[float, float]]:
    sup = getattr(h, "support", None)
    if sup is None:
        return [(0.0, math.inf)] * d
    if d == 1 and isinstance(sup, tuple) and len(sup) == 2 and not isinstance(sup[0], tuple):
        return [sup]
    return [tuple(s) for s in sup]


def _graded_axes(h, d: int) -> list[bool]:
    """Axes with a finite support end inside ``(0, inf)``, where densities may be singular."""
    return [(lo > 0) or math.isfinite(hi) for lo, hi in _support_of(h, d)]


def spatial_window(
    h, d: int, quad: QuadratureConfig, sample: np.ndarray | None = None
) -> list[tuple[float, float]]:
    """Per-axis integration window ``[lo, hi]`` for a function on ``(0, inf)^d``.

    A bounded support is used as-is; unbounded ends fall back to ``x_max``
    (explicit or calibrated from ``sample``) and ``x_max * x_min_ratio``.
    """
    support = _support_of(h, d)
    need_xmax = any(not math.isfinite(hi) for _, hi in support)
    x_max = quad.resolve_x_max(d, sample) if need_xmax else None
    out = []
    for j, (lo, hi) in enumerate(support):
        hi_j = hi if math.isfinite(hi) else float(x_max[j])
        lo_j = max(lo, hi_j * quad.x_min_ratio)
        if not lo_j < hi_j:
            raise ValueError(f"empty spatial window on axis {j}: [{lo_j}, {hi_j}]")
        out.append((lo_j, hi_j))
    return out


# densities are evaluated on open supports; keep quadrature nodes strictly inside
_INSET = 1e-13


def _spatial_grid(window, ppd: int, graded=None):
    graded = graded or [False] * len(window)
    window = [(lo * (1.0 + _INSET), hi * (1.0 - _INSET)) for lo, hi in window]
    axes, weights = zip(*(log_grid(lo, hi, ppd, graded=gr) for (lo, hi), gr in zip(window, graded)))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return list(axes), mesh, tensor_weights(weights)


def _eval_spatial(h, mesh: np.ndarray, what: str) -> np.ndarray:
    d = mesh.shape[-1]
    pts = mesh[..., 0] if d == 1 else mesh
    vals = np.asarray(h(pts), dtype=float)
    if d == 1 and vals.shape != mesh.shape[:-1]:
        vals = vals.reshape(mesh.shape[:-1])
    return _checked(vals, mesh, what)


# -- operations ---------------------------------------------------------------------


def mellin_forward(
    h,
    ctx: MellinContext,
    t,
    quad: QuadratureConfig = QuadratureConfig(),
    sample: np.ndarray | None = None,
):
    """Quadrature value of ``∫ x^(c-1+it) h(x) dx`` over the spatial window.

    ``h`` is a callable on points (an array of shape ``(..., d)``, or a plain
    array of abscissae when ``d = 1``); an optional ``support`` attribute
    tightens the window. ``t`` may be one frequency vector or an array of them
    with shape ``(m, d)``; the result is then an array of length ``m``.
    """
    d = ctx.d
    t_arr = np.asarray(t, dtype=float)
    single = t_arr.ndim == 0 or (t_arr.ndim == 1 and (d > 1 or t_arr.size == 1))
    t_arr = t_arr.reshape(-1, d)
    if not np.all(np.isfinite(t_arr)):
        raise ValueError("t must be finite")
    window = spatial_window(h, d, quad, sample)
    axes, mesh, w = _spatial_grid(window, quad.points_per_decade, _graded_axes(h, d))
    vals = _eval_spatial(h, mesh, "integrand h(x)")
    base = w * vals
    logs = [np.log(a) for a in axes]
    c = ctx.c_array
    out = np.empty(len(t_arr), dtype=complex)
    for i, ti in enumerate(t_arr):
        acc = base.astype(complex)
        for j in range(d):
            factor = np.exp((c[j] - 1.0 + 1j * ti[j]) * logs[j])
            shape = [1] * d
            shape[j] = -1
            acc = acc * factor.reshape(shape)
        out[i] = acc.sum()
    return complex(out[0]) if single else out


def mellin_inverse(
    H: FrequencyFunction,
    ctx: MellinContext,
    k,
    x,
    quad: QuadratureConfig = QuadratureConfig(),
    full_output: bool = False,
):
    """Real part of ``(2π)^-d ∫_{Q_k} x^(-c-it) H(t) dt``.

    With ``full_output=True`` returns ``(value, imaginary_part)``; the
    imaginary part vanishes up to rounding when ``H`` is conjugate symmetric.
    """
    k = CutoffVector(k, ctx.d)
    x = _as_point(x, ctx.d, "x")
    if np.any(x <= 0):
        raise ValueError("x must be strictly positive")
    axes, mesh, w = frequency_mesh(k, quad.step_t)
    vals = _checked(H(mesh), mesh, "H")
    kern = np.ones((), dtype=complex)
    c = ctx.c_array
    for j, tj in enumerate(axes):
        kern = np.multiply.outer(kern, np.exp(-(c[j] + 1j * tj) * math.log(x[j])))
    total = np.sum(w * kern * vals) / TWO_PI**ctx.d
    if full_output:
        return float(total.real), float(total.imag)
    return float(total.real)


class MultiplicativeConvolution:
    """Callable density ``y -> ∫ h1(y/x) h2(x) x^-1 dx`` evaluated by quadrature."""

    def __init__(self, h1, h2, d: int, quad: QuadratureConfig = QuadratureConfig()):
        self.h1, self.h2, self.d, self.quad = h1, h2, int(d), quad
        s1, s2 = _support_of(h1, self.d), _support_of(h2, self.d)
        self.support = [(a1 * a2, b1 * b2) for (a1, b1), (a2, b2) in zip(s1, s2)]

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.d == 1 and (y.ndim == 0 or y.shape[-1] != 1):
            y = y[..., None]
        flat = y.reshape(-1, self.d)
        out = np.array([_convolve_at(self.h1, self.h2, yi, self.quad) for yi in flat])
        return out.reshape(y.shape[:-1])


def _convolve_at(h1, h2, y: np.ndarray, quad: QuadratureConfig) -> float:
    d = y.size
    s1, s2 = _support_of(h1, d), _support_of(h2, d)
    need = any(not math.isfinite(b) for _, b in s1 + s2)
    x_max = quad.resolve_x_max(d) if need else None
    window = []
    for j in range(d):
        a1, b1 = s1[j]
        a2, b2 = s2[j]
        b1 = b1 if math.isfinite(b1) else float(x_max[j])
        b2 = b2 if math.isfinite(b2) else float(x_max[j])
        # h1(y/x) != 0 requires a1 < y/x < b1
        hi = min(b2, y[j] / a1) if a1 > 0 else b2
        lo = max(a2, y[j] / b1)
        lo = max(lo, hi * quad.x_min_ratio)
        if not lo * (1.0 + 4.0 * _INSET) < hi:
            return 0.0
        window.append((lo, hi))
    axes, mesh, w = _spatial_grid(window, quad.points_per_decade, [True] * d)
    ratio = y / mesh
    inner = _eval_spatial(h1, ratio, "h1(y/x)") * _eval_spatial(h2, mesh, "h2(x)")
    return float(np.sum(w * inner / np.prod(mesh, axis=-1)))


def mult_convolve(h1, h2, y, quad: QuadratureConfig = QuadratureConfig()) -> float:
    """Multiplicative convolution ``(h1 * h2)(y)`` at one point ``y``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y <= 0):
        raise ValueError("y must be strictly positive")
    return _convolve_at(h1, h2, y, quad)


def _region_weights(region, ctx: MellinContext, step: float):
    """Mesh and non-negative tensor weights for a cuboid or a set difference."""
    if isinstance(region, SetDifference):
        outer, inner = region.outer, region.inner
        axes, mesh, w_out = frequency_mesh(outer, step)
        if region.is_empty:
            return mesh, np.zeros_like(w_out)
        w_in_axes = []
        for j, tj in enumerate(axes):
            t_in, w_in = axis_nodes(inner[j], step)
            full = np.zeros_like(tj)
            idx = np.searchsorted(tj, t_in)
            if idx.max(initial=0) >= tj.size or not np.allclose(tj[idx], t_in, rtol=0, atol=1e-12):
                raise ValueError(
                    "inner cuboid nodes are not a subset of the outer grid; "
                    "use cut-offs on the anchored grid (e.g. integers)"
                )
            full[idx] = w_in
            w_in_axes.append(full)
        w_in_t = tensor_weights(w_in_axes)
        return mesh, w_out - w_in_t
    k = CutoffVector(region, ctx.d)
    _, mesh, w = frequency_mesh(k, step)
    return mesh, w


def plancherel_norm_sq(H: FrequencyFunction, region, ctx: MellinContext, quad: QuadratureConfig = QuadratureConfig()) -> float:
    """``(2π)^-d ∫_region |H(t)|^2 dt`` for a cuboid or a :class:`SetDifference`.

    A set difference is integrated with weights ``w_outer - w_inner`` on the
    outer grid; these are non-negative, so the result is too, and they vanish
    identically when the difference is empty.
    """
    mesh, w = _region_weights(region, ctx, quad.step_t)
    if not np.any(w):
        return 0.0
    vals = _checked(H(mesh), mesh, "H")
    return float(np.sum(w * (vals.real**2 + vals.imag**2)) / TWO_PI**ctx.d)


def weighted_l2_norm_sq(h, ctx: MellinContext, quad: QuadratureConfig = QuadratureConfig(), sample=None) -> float:
    """``∫ h(x)^2 x^(2c-1) dx`` over the spatial window."""
    d = ctx.d
    window = spatial_window(h, d, quad, sample)
    axes, mesh, w = _spatial_grid(window, quad.points_per_decade, _graded_axes(h, d))
    vals = _eval_spatial(h, mesh, "h(x)")
    weight = np.prod(mesh ** (2.0 * ctx.c_array - 1.0), axis=-1)
    return float(np.sum(w * vals * vals * weight))


def sobolev_seminorm_sq(
    H: FrequencyFunction,
    s,
    ctx: MellinContext,
    k_max,
    quad: QuadratureConfig = QuadratureConfig(),
) -> float:
    """Truncated anisotropic Mellin-Sobolev seminorm.

    ``sum_j (2π)^-d ∫_{Q_kmax} (1 + t_j^2)^(s_j) |H(t)|^2 dt``.
    """
    s = _as_point(s, ctx.d, "s")
    if np.any(s < 0):
        raise ValueError("smoothness s must be non-negative")
    k_max = CutoffVector(k_max, ctx.d)
    _, mesh, w = frequency_mesh(k_max, quad.step_t)
    vals = _checked(H(mesh), mesh, "H")
    power = w * (vals.real**2 + vals.imag**2)
    total = 0.0
    for j in range(ctx.d):
        total += float(np.sum(power * (1.0 + mesh[..., j] ** 2) ** s[j]))
    return total / TWO_PI**ctx.d
