"""Shared containers and quadrature grids for Mellin-domain computations.

Frequency integrals use tensor-product composite Simpson rules on a grid
anchored at ``t = 0``; spatial integrals use Simpson's rule in ``u = log x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

__all__ = [
    "MellinContext",
    "QuadratureConfig",
    "CutoffVector",
    "SetDifference",
    "anchored_step",
    "axis_nodes",
    "simpson_weights",
    "log_grid",
    "tensor_weights",
]


@dataclass(frozen=True)
class MellinContext:
    """Dimension ``d`` and development point ``c`` of the Mellin transform."""

    c: tuple[float, ...]

    def __init__(self, c: Union[float, Sequence[float]], d: int | None = None):
        c_arr = np.atleast_1d(np.asarray(c, dtype=float))
        if c_arr.ndim != 1:
            raise ValueError("c must be a scalar or a vector")
        if d is not None:
            if d < 1:
                raise ValueError("dimension d must be >= 1")
            if c_arr.size == 1 and d > 1:
                c_arr = np.repeat(c_arr, d)
            elif c_arr.size != d:
                raise ValueError(f"c has {c_arr.size} entries, expected d={d}")
        if c_arr.size < 1:
            raise ValueError("c must have at least one entry")
        if not np.all(np.isfinite(c_arr)):
            raise ValueError("c must be finite")
        object.__setattr__(self, "c", tuple(float(v) for v in c_arr))

    @property
    def d(self) -> int:
        return len(self.c)

    @property
    def c_array(self) -> np.ndarray:
        return np.asarray(self.c, dtype=float)


@dataclass(frozen=True)
class QuadratureConfig:
    """Numerical knobs for frequency and spatial quadrature.

    ``x_max`` may be ``"auto"``: it is then calibrated as twice the 99.9%
    empirical quantile of a sample, per axis. The spatial window is
    ``(x_max * x_min_ratio, x_max]`` unless a density's support is tighter.
    """

    step_t: float = 0.05
    points_per_decade: int = 200
    x_max: Union[float, str] = "auto"
    x_min_ratio: float = 1e-6
    tol_zero: float = 1e-12

    def __post_init__(self):
        if not self.step_t > 0:
            raise ValueError("step_t must be positive")
        if not self.tol_zero > 0:
            raise ValueError("tol_zero must be positive")
        if int(self.points_per_decade) < 2:
            raise ValueError("points_per_decade must be >= 2")
        if not 0 < self.x_min_ratio < 1:
            raise ValueError("x_min_ratio must lie in (0, 1)")
        if isinstance(self.x_max, str):
            if self.x_max != "auto":
                raise ValueError("x_max must be a positive number or 'auto'")
        elif not (self.x_max > 0 and math.isfinite(self.x_max)):
            raise ValueError("x_max must be positive and finite")

    def with_(self, **changes) -> "QuadratureConfig":
        return replace(self, **changes)

    def resolve_x_max(self, d: int, sample: np.ndarray | None = None) -> np.ndarray:
        """Per-axis spatial truncation point."""
        if self.x_max != "auto":
            return np.full(d, float(self.x_max))
        if sample is None:
            raise ValueError("x_max='auto' needs a sample to calibrate from")
        data = np.asarray(sample, dtype=float).reshape(len(sample), -1)
        return 2.0 * np.quantile(data, 0.999, axis=0)


@dataclass(frozen=True)
class CutoffVector:
    """Positive cut-off ``k`` defining the cuboid ``Q_k = prod_j [-k_j, k_j]``."""

    k: tuple[float, ...]

    def __init__(self, k: Union[float, Sequence[float], "CutoffVector"], d: int | None = None):
        if isinstance(k, CutoffVector):
            k = k.k
        arr = np.atleast_1d(np.asarray(k, dtype=float))
        if d is not None and arr.size == 1 and d > 1:
            arr = np.repeat(arr, d)
        if d is not None and arr.size != d:
            raise ValueError(f"cut-off has {arr.size} entries, expected d={d}")
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("cut-off must be a non-empty vector")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValueError(f"cut-off entries must be positive and finite, got {arr.tolist()}")
        object.__setattr__(self, "k", tuple(float(v) for v in arr))

    @property
    def d(self) -> int:
        return len(self.k)

    def __iter__(self):
        return iter(self.k)

    def __len__(self):
        return len(self.k)

    def __getitem__(self, i):
        return self.k[i]

    def meet(self, other: "CutoffVector") -> "CutoffVector":
        """Componentwise minimum ``k ∧ k'``."""
        return CutoffVector(np.minimum(self.k, CutoffVector(other).k))

    def dominates(self, other: "CutoffVector") -> bool:
        return all(a >= b for a, b in zip(self.k, CutoffVector(other).k))


@dataclass(frozen=True)
class SetDifference:
    """The region ``Q_outer \\ Q_{inner ∧ outer}``.

    Built from a pair ``(k, k')`` as ``SetDifference.between(k, k')`` which
    yields ``Q_{k'} \\ Q_{k ∧ k'}``.
    """

    outer: CutoffVector
    inner: CutoffVector = field()

    def __post_init__(self):
        outer = CutoffVector(self.outer)
        inner = outer.meet(CutoffVector(self.inner))
        object.__setattr__(self, "outer", outer)
        object.__setattr__(self, "inner", inner)

    @classmethod
    def between(cls, k, k_prime) -> "SetDifference":
        return cls(CutoffVector(k_prime), CutoffVector(k))

    @property
    def is_empty(self) -> bool:
        return self.inner.k == self.outer.k


def anchored_step(step: float) -> float:
    """Largest spacing <= ``step`` that splits ``[0, 1]`` into an even number of panels.

    With this spacing every integer cut-off lies on the grid and is reached by
    an even number of Simpson intervals, so nested cuboids share nodes.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    m = math.ceil(1.0 / (2.0 * step) - 1e-12)
    return 1.0 / (2 * max(m, 1))


def simpson_weights(n_intervals: int, h: float) -> np.ndarray:
    """Composite Simpson weights for ``n_intervals`` (even) panels of width ``h``."""
    if n_intervals < 2 or n_intervals % 2:
        raise ValueError("Simpson's rule needs an even, positive number of intervals")
    w = np.empty(n_intervals + 1)
    w[0] = w[-1] = 1.0
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def _half_axis(k: float, step: float) -> tuple[np.ndarray, np.ndarray]:
    h = anchored_step(step)
    n_steps = int(math.floor(k / h + 1e-9))
    n_even = n_steps - (n_steps % 2)
    nodes = h * np.arange(n_even + 1, dtype=float)
    weights = simpson_weights(n_even, h) if n_even else np.zeros(1)
    rest = k - n_even * h
    if rest > 1e-9 * h:
        a = n_even * h
        nodes = np.concatenate([nodes, [0.5 * (a + k), k]])
        weights = np.concatenate([weights, [0.0, 0.0]])
        weights[-3:] += np.array([1.0, 4.0, 1.0]) * (rest / 6.0)
    return nodes, weights


def axis_nodes(k: float, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Simpson nodes and weights on ``[-k, k]``.

    Nodes are the anchored multiples of :func:`anchored_step` up to the last
    even multiple below ``k``, plus a single closing Simpson panel when ``k``
    is not itself on the grid.
    """
    if not (k > 0 and math.isfinite(k)):
        raise ValueError(f"cut-off must be positive and finite, got {k}")
    pos, w_pos = _half_axis(float(k), step)
    nodes = np.concatenate([-pos[:0:-1], pos])
    weights = np.concatenate([w_pos[:0:-1], w_pos])
    weights[len(pos) - 1] = 2.0 * w_pos[0]
    return nodes, weights


def tensor_weights(weights: Sequence[np.ndarray]) -> np.ndarray:
    out = np.asarray(weights[0], dtype=float)
    for w in weights[1:]:
        out = np.multiply.outer(out, w)
    return out


def log_grid(
    lo: float, hi: float, points_per_decade: int, min_intervals: int = 64, graded: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes ``x`` and weights for ``dx`` on ``[lo, hi]``, uniform in ``log x``.

    The returned weights already include the Jacobian ``x`` of ``dx = x du``.
    Narrow windows still receive ``min_intervals`` panels. The default is
    Simpson's rule in ``u = log x``. With ``graded`` the nodes follow
    ``u = u_lo + L (3 s^2 - 2 s^3)`` and composite Gauss-Legendre is applied
    in ``s``: this turns endpoint singularities like ``|u - u_lo|^(-1/2)`` into
    smooth integrands and never evaluates the endpoints themselves.
    """
    if not (0 < lo < hi):
        raise ValueError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    decades = math.log10(hi / lo)
    n = max(int(min_intervals), int(math.ceil(decades * points_per_decade)))
    n += n % 2
    u_lo, u_hi = math.log(lo), math.log(hi)
    length = u_hi - u_lo
    if graded:
        s, ws = _composite_gauss(max(8, n // 4), _GAUSS_ORDER)
        u = u_lo + length * (3.0 * s**2 - 2.0 * s**3)
        w = ws * length * 6.0 * s * (1.0 - s)
        x = np.exp(u)
        return x, w * x
    u = np.linspace(u_lo, u_hi, n + 1)
    w = simpson_weights(n, length / n)
    x = np.exp(u)
    x[0], x[-1] = lo, hi
    return x, w * x


_GAUSS_ORDER = 8


def _composite_gauss(panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``panels`` equal pieces of ``[0, 1]``."""
    g, wg = np.polynomial.legendre.leggauss(order)
    left = np.arange(panels) / panels
    half = 0.5 / panels
    nodes = (left[:, None] + half * (g[None, :] + 1.0)).ravel()
    weights = np.tile(wg * half, panels)
    return nodes, weights
