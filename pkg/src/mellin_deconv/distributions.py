"""Catalog of target and noise densities on the positive half-line.

Every family exposes its density, CDF and quantile function, a seeded
sampler, the closed-form Mellin transform ``M_c[g](t) = E[X^(c-1+it)]`` and,
for noise use, its polynomial decay exponent. Multivariate models are tensor
products of univariate families (:class:`ProductModel`).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
from scipy import special

__all__ = [
    "Distribution",
    "Beta1b",
    "Uniform01",
    "ScaledLogGamma",
    "Gamma",
    "Weibull",
    "LogNormal",
    "ScaledBeta",
    "NoNoise",
    "ProductModel",
    "DecayProfile",
    "SampleMatrix",
    "as_product",
    "density",
    "mellin_closed_form",
    "sample",
    "contaminate",
    "decay_profile",
    "parse_model",
    "stream_rng",
]


def stream_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the stream ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class DecayProfile:
    """Polynomial decay class of a noise Mellin transform ([G1])."""

    kind: str
    _gamma: tuple[float, ...] | None = None

    @property
    def smooth(self) -> bool:
        return self.kind == "smooth"

    @property
    def gamma(self) -> tuple[float, ...]:
        if not self.smooth or self._gamma is None:
            raise ValueError(
                "noise is super smooth (exponential Mellin decay); no polynomial "
                "decay exponent gamma exists"
            )
        return self._gamma


class Distribution:
    """Base class for univariate families.

    Subclasses implement ``_pdf``, ``_cdf``, ``_ppf``, ``_draw``, ``_mellin``
    on positive arguments and declare ``support`` and the Mellin validity
    window ``c_window`` (open interval).
    """

    name: str = "distribution"
    support: tuple[float, float] = (0.0, math.inf)

    def params(self) -> dict:
        raise NotImplementedError

    @property
    def c_window(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def spec(self) -> str:
        body = ",".join(f"{k}={_fmt(v)}" for k, v in self.params().items())
        return f"{self.name}({body})"

    def __repr__(self):
        return self.spec()

    # -- density and friends -------------------------------------------------
    def __call__(self, x) -> np.ndarray:
        return self.pdf(x)

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        lo, hi = self.support
        inside = (x > lo) & (x < hi)
        out[inside] = self._pdf(x[inside])
        return out

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        out = np.where(x >= hi, 1.0, 0.0)
        inside = (x > lo) & (x < hi)
        out[inside] = self._cdf(x[inside])
        return out

    def ppf(self, q) -> np.ndarray:
        return self._ppf(np.asarray(q, dtype=float))

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self._draw(int(n), rng)

    # -- Mellin ----------------------------------------------------------------
    def check_c(self, c: float) -> None:
        lo, hi = self.c_window
        if not lo < c < hi:
            raise ValueError(
                f"{self.spec()}: Mellin transform requires {_fmt(lo)} < c < {_fmt(hi)}, got c={c}"
            )

    def mellin(self, c: float, t) -> np.ndarray:
        self.check_c(c)
        s = (c - 1.0) + 1j * np.asarray(t, dtype=float)
        return self._mellin(s)

    def moment(self, p: float) -> float:
        """``E[X^p]`` from the Mellin transform at ``c = p + 1``, ``t = 0``."""
        return float(np.real(self.mellin(p + 1.0, 0.0)))

    def decay(self) -> DecayProfile:
        return DecayProfile("super_smooth")

    def _mellin(self, s):
        raise NotImplementedError


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _cgamma_ratio(a, b):
    """``Gamma(a) / Gamma(b)`` for complex arguments via log-gamma."""
    return np.exp(special.loggamma(a) - special.loggamma(b))


class Beta1b(Distribution):
    """``Beta(1, b)`` density ``b (1-x)^(b-1)`` on (0, 1)."""

    name = "beta"
    support = (0.0, 1.0)

    def __init__(self, b: int = 1):
        if int(b) != b or b < 1:
            raise ValueError("Beta1b requires a positive integer b")
        self.b = int(b)

    def params(self):
        return {"b": self.b}

    @property
    def c_window(self):
        return (0.0, math.inf)

    def _pdf(self, x):
        return self.b * (1.0 - x) ** (self.b - 1)

    def _cdf(self, x):
        return 1.0 - (1.0 - x) ** self.b

    def _ppf(self, q):
        return 1.0 - (1.0 - q) ** (1.0 / self.b)

    def _draw(self, n, rng):
        v = rng.random(n)
        return 1.0 - (1.0 - v) ** (1.0 / self.b)

    def _mellin(self, s):
        out = np.ones_like(s)
        for j in range(1, self.b + 1):
            out = out * (j / (s + j))
        return out

    def decay(self):
        return DecayProfile("smooth", (float(self.b),))


class Uniform01(Beta1b):
    """Uniform density on (0, 1); identical to ``Beta1b(1)``."""

    name = "uniform"

    def __init__(self):
        super().__init__(1)

    def params(self):
        return {}


class ScaledLogGamma(Distribution):
    """Scaled log-gamma: ``log X - mu ~ Gamma(a, rate=lambda)``.

    Density ``lambda^a e^(lambda mu) x^(-lambda-1) (log x - mu)^(a-1) / Gamma(a)``
    on ``(e^mu, inf)``.

    ``a = 1`` gives a Pareto law with scale ``exp(mu)`` and index ``lambda``.
    """

    name = "slgamma"

    def __init__(self, mu: float = 0.0, a: float = 1.0, lam: float = 1.0):
        if not (a > 0 and lam > 0):
            raise ValueError("ScaledLogGamma requires a > 0 and lambda > 0")
        self.mu, self.a, self.lam = float(mu), float(a), float(lam)
        self.support = (math.exp(self.mu), math.inf)

    def params(self):
        return {"mu": self.mu, "a": self.a, "lambda": self.lam}

    @property
    def c_window(self):
        return (-math.inf, self.lam + 1.0)

    def _pdf(self, x):
        z = np.log(x) - self.mu
        return np.exp(
            self.a * np.log(self.lam)
            + self.lam * self.mu
            - special.gammaln(self.a)
            - (self.lam + 1.0) * np.log(x)
            + (self.a - 1.0) * np.log(z)
        )

    def _cdf(self, x):
        return special.gammainc(self.a, self.lam * (np.log(x) - self.mu))

    def _ppf(self, q):
        return np.exp(self.mu + special.gammaincinv(self.a, q) / self.lam)

    def _draw(self, n, rng):
        if self.a == 1.0:
            # inverse CDF of the Pareto law
            return np.exp(self.mu) * (1.0 - rng.random(n)) ** (-1.0 / self.lam)
        return np.exp(self.mu + rng.standard_gamma(self.a, n) / self.lam)

    def _mellin(self, s):
        # normalized law; the factor lambda^a is 1 in the lambda = 1 cases
        return np.exp(self.mu * s) * (1.0 - s / self.lam) ** (-self.a)

    def decay(self):
        return DecayProfile("smooth", (self.a,))


class Gamma(Distribution):
    """Gamma density with ``shape`` and ``scale``."""

    name = "gamma"

    def __init__(self, shape: float = 1.0, scale: float = 1.0):
        if not (shape > 0 and scale > 0):
            raise ValueError("Gamma requires shape > 0 and scale > 0")
        self.shape, self.scale = float(shape), float(scale)

    def params(self):
        return {"shape": self.shape, "scale": self.scale}

    @property
    def c_window(self):
        return (1.0 - self.shape, math.inf)

    def _pdf(self, x):
        z = x / self.scale
        return np.exp((self.shape - 1.0) * np.log(z) - z - special.gammaln(self.shape)) / self.scale

    def _cdf(self, x):
        return special.gammainc(self.shape, x / self.scale)

    def _ppf(self, q):
        return self.scale * special.gammaincinv(self.shape, q)

    def _draw(self, n, rng):
        return self.scale * rng.standard_gamma(self.shape, n)

    def _mellin(self, s):
        return self.scale**s * _cgamma_ratio(self.shape + s, self.shape + 0j)


class Weibull(Distribution):
    """Weibull density ``m x^(m-1) exp(-x^m)`` (unit scale)."""

    name = "weibull"

    def __init__(self, m: float = 1.0):
        if not m > 0:
            raise ValueError("Weibull requires m > 0")
        self.m = float(m)

    def params(self):
        return {"m": self.m}

    @property
    def c_window(self):
        return (1.0 - self.m, math.inf)

    def _pdf(self, x):
        return self.m * x ** (self.m - 1.0) * np.exp(-(x**self.m))

    def _cdf(self, x):
        return -np.expm1(-(x**self.m))

    def _ppf(self, q):
        return (-np.log1p(-q)) ** (1.0 / self.m)

    def _draw(self, n, rng):
        return (-np.log1p(-rng.random(n))) ** (1.0 / self.m)

    def _mellin(self, s):
        # (s/m) Gamma(s/m) written as Gamma(1 + s/m) to stay finite at s = 0
        return np.exp(special.loggamma(1.0 + s / self.m))


class LogNormal(Distribution):
    """Log-normal density: ``log X ~ N(mu, lambda^2)``."""

    name = "lognormal"

    def __init__(self, mu: float = 0.0, lam: float = 1.0):
        if not lam > 0:
            raise ValueError("LogNormal requires lambda > 0")
        self.mu, self.lam = float(mu), float(lam)

    def params(self):
        return {"mu": self.mu, "lambda": self.lam}

    def _pdf(self, x):
        z = (np.log(x) - self.mu) / self.lam
        return np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * self.lam * x)

    def _cdf(self, x):
        return special.ndtr((np.log(x) - self.mu) / self.lam)

    def _ppf(self, q):
        return np.exp(self.mu + self.lam * special.ndtri(q))

    def _draw(self, n, rng):
        return np.exp(self.mu + self.lam * rng.standard_normal(n))

    def _mellin(self, s):
        return np.exp(self.mu * s + 0.5 * self.lam**2 * s * s)


class ScaledBeta(Distribution):
    """``scale * Beta(p, q)``, supported on (0, scale).

    Used for the bounded simulation target ``140 (x/2)^3 (1 - x/2)^4`` on
    (0, 2), i.e. ``ScaledBeta(4, 5, 2)``.
    """

    name = "scaledbeta"

    def __init__(self, p: float = 1.0, q: float = 1.0, scale: float = 1.0):
        if not (p > 0 and q > 0 and scale > 0):
            raise ValueError("ScaledBeta requires p, q, scale > 0")
        self.p, self.q, self.scale = float(p), float(q), float(scale)
        self.support = (0.0, self.scale)

    def params(self):
        return {"p": self.p, "q": self.q, "scale": self.scale}

    @property
    def c_window(self):
        return (1.0 - self.p, math.inf)

    def _pdf(self, x):
        z = x / self.scale
        return np.exp(
            (self.p - 1.0) * np.log(z) + (self.q - 1.0) * np.log1p(-z) - special.betaln(self.p, self.q)
        ) / self.scale

    def _cdf(self, x):
        return special.betainc(self.p, self.q, x / self.scale)

    def _ppf(self, q):
        return self.scale * special.betaincinv(self.p, self.q, q)

    def _draw(self, n, rng):
        return self.scale * rng.beta(self.p, self.q, n)

    def _mellin(self, s):
        pq = self.p + self.q + 0j
        return self.scale**s * _cgamma_ratio(self.p + s, self.p + 0j) * _cgamma_ratio(pq, pq + s)

    def decay(self):
        return DecayProfile("smooth", (self.q,))


class NoNoise(Distribution):
    """Degenerate error ``U = 1`` (direct observations); ``M_c ≡ 1``."""

    name = "none"
    support = (1.0, 1.0)

    def params(self):
        return {}

    def pdf(self, x):
        raise ValueError("NoNoise is a point mass at 1 and has no Lebesgue density")

    def cdf(self, x):
        return np.where(np.asarray(x, dtype=float) >= 1.0, 1.0, 0.0)

    def ppf(self, q):
        return np.ones_like(np.asarray(q, dtype=float))

    def _draw(self, n, rng):
        return np.ones(n)

    def _mellin(self, s):
        return np.ones_like(s)

    def decay(self):
        return DecayProfile("smooth", (0.0,))


class ProductModel:
    """Tensor product of univariate families, one per axis."""

    def __init__(self, components: Iterable[Distribution]):
        comps = tuple(components)
        if not comps:
            raise ValueError("ProductModel needs at least one component")
        for comp in comps:
            if not isinstance(comp, Distribution):
                raise TypeError(f"not a univariate family: {comp!r}")
        self.components = comps

    @property
    def d(self) -> int:
        return len(self.components)

    @property
    def support(self) -> list[tuple[float, float]]:
        return [comp.support for comp in self.components]

    def spec(self) -> list[str]:
        return [comp.spec() for comp in self.components]

    def __repr__(self):
        return " ⊗ ".join(self.spec())

    def __call__(self, x) -> np.ndarray:
        return self.pdf(x)

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.d:
            raise ValueError(f"points must have last dimension {self.d}")
        out = np.ones(x.shape[:-1])
        for j, comp in enumerate(self.components):
            out = out * comp.pdf(x[..., j])
        return out

    def mellin(self, c: Sequence[float], t) -> np.ndarray:
        """Closed-form transform at points ``t`` of shape ``(..., d)``."""
        c = _as_vector(c, self.d)
        t = np.asarray(t, dtype=float)
        if self.d == 1 and (t.ndim == 0 or t.shape[-1] != 1):
            t = t[..., None]
        out = np.ones(t.shape[:-1], dtype=complex)
        for j, comp in enumerate(self.components):
            out = out * comp.mellin(c[j], t[..., j])
        return out

    def axis_mellin(self, c: Sequence[float], axes: Sequence[np.ndarray]) -> list[np.ndarray]:
        """Per-axis closed-form factors on 1-D node arrays."""
        c = _as_vector(c, self.d)
        return [comp.mellin(c[j], axes[j]) for j, comp in enumerate(self.components)]

    def moment(self, p: Sequence[float]) -> float:
        """``E[prod_j X_j^(p_j)]``."""
        p = _as_vector(p, self.d)
        return float(np.prod([comp.moment(p[j]) for j, comp in enumerate(self.components)]))

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.column_stack([comp.draw(n, rng) for comp in self.components])

    def decay(self) -> DecayProfile:
        profiles = [comp.decay() for comp in self.components]
        if all(p.smooth for p in profiles):
            return DecayProfile("smooth", tuple(p.gamma[0] for p in profiles))
        return DecayProfile("super_smooth")


Model = Union[Distribution, ProductModel]


def as_product(model: Model | Sequence[Distribution], d: int | None = None) -> ProductModel:
    """Normalize a family, a list of families or a product to a ProductModel.

    A single univariate family is replicated over ``d`` axes when ``d`` is
    given.
    """
    if isinstance(model, ProductModel):
        prod = model
    elif isinstance(model, Distribution):
        prod = ProductModel([model] * (d or 1))
    else:
        prod = ProductModel(model)
    if d is not None and prod.d != d:
        raise ValueError(f"model has {prod.d} axes, expected {d}")
    return prod


def _as_vector(v, d: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.size == 1 and d > 1:
        arr = np.repeat(arr, d)
    if arr.size != d:
        raise ValueError(f"expected {d} entries, got {arr.size}")
    return arr


class SampleMatrix(np.ndarray):
    """``n × d`` array of strictly positive observations."""

    def __new__(cls, data):
        arr = np.array(data, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError("a sample must be a non-empty n × d array")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValueError("sample entries must be strictly positive and finite")
        return arr.view(cls)

    @property
    def n(self) -> int:
        return self.shape[0]

    @property
    def d(self) -> int:
        return self.shape[1]


# -- module-level operations -----------------------------------------------------


def density(model: Model, x) -> np.ndarray | float:
    """Density value(s); points have shape ``(..., d)`` or are scalars when d = 1."""
    prod = as_product(model)
    out = prod.pdf(x)
    return float(out) if np.ndim(out) == 0 else out


def mellin_closed_form(model: Model, c, t):
    """Exact Mellin transform ``M_c[g](t)``; raises ValueError outside the c-window."""
    if isinstance(model, Distribution):
        out = model.mellin(float(np.squeeze(c)), t)
    else:
        out = as_product(model).mellin(c, t)
    return complex(out) if np.ndim(out) == 0 else out


def sample(model: Model, n: int, seed: int, *stream: int) -> SampleMatrix:
    """``n`` i.i.d. draws, deterministic in ``(seed, *stream)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = stream_rng(seed, *stream)
    return SampleMatrix(as_product(model).draw(n, rng))


def contaminate(x_sample, u_sample) -> SampleMatrix:
    """Multiplicative contamination ``Y = X ∘ U`` (entrywise)."""
    x = SampleMatrix(x_sample)
    u = SampleMatrix(u_sample)
    if x.shape != u.shape:
        raise ValueError(f"shape mismatch: X is {x.shape}, U is {u.shape}")
    return SampleMatrix(np.asarray(x) * np.asarray(u))


def decay_profile(model: Model) -> DecayProfile:
    return model.decay()


# -- model specification strings -------------------------------------------------

_SPEC_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$")

_FAMILIES = {
    "beta": (Beta1b, {"b": "b"}),
    "uniform": (Uniform01, {}),
    "slgamma": (ScaledLogGamma, {"mu": "mu", "a": "a", "lambda": "lam"}),
    "gamma": (Gamma, {"shape": "shape", "scale": "scale"}),
    "weibull": (Weibull, {"m": "m"}),
    "lognormal": (LogNormal, {"mu": "mu", "lambda": "lam"}),
    "scaledbeta": (ScaledBeta, {"p": "p", "q": "q", "scale": "scale"}),
    "none": (NoNoise, {}),
}
_ALIASES = {"nonoise": "none", "direct": "none", "pareto": "slgamma", "loggamma": "slgamma"}
_ALIAS_DEFAULTS = {"pareto": {"mu": 0.0, "a": 1.0, "lambda": 1.0}, "loggamma": {"mu": 0.0}}


def parse_model(spec: Union[str, Distribution]) -> Distribution:
    """Parse ``family(param=value,...)``, e.g. ``gamma(shape=4,scale=2)``.

    ``pareto()`` is ``slgamma(mu=0,a=1,lambda=1)``; ``loggamma(a=..,lambda=..)``
    is ``slgamma`` with ``mu=0``.
    """
    if isinstance(spec, Distribution):
        return spec
    m = _SPEC_RE.match(spec)
    if not m:
        raise ValueError(f"malformed model spec {spec!r}; expected family(param=value,...)")
    family = m.group(1).lower()
    kwargs: dict[str, float] = {}
    body = m.group(2).strip()
    if body:
        for item in body.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"malformed parameter {item!r} in {spec!r}")
            try:
                kwargs[key.strip().lower()] = float(value)
            except ValueError:
                raise ValueError(f"parameter {key.strip()!r} in {spec!r} is not a number") from None
    if family in _ALIASES:
        defaults = dict(_ALIAS_DEFAULTS.get(family, {}))
        if family == "pareto" and kwargs:
            defaults.update(kwargs)
            if defaults["a"] != 1.0:
                raise ValueError("pareto() has a fixed a=1")
        defaults.update(kwargs)
        kwargs = defaults
        family = _ALIASES[family]
    if family not in _FAMILIES:
        raise ValueError(f"unknown family {family!r}; known: {sorted(set(_FAMILIES) | set(_ALIASES))}")
    cls, names = _FAMILIES[family]
    unknown = set(kwargs) - set(names)
    if unknown:
        raise ValueError(f"unknown parameter(s) {sorted(unknown)} for {family}")
    args = {names[k]: v for k, v in kwargs.items()}
    if cls is Beta1b and "b" in args:
        if args["b"] != int(args["b"]):
            raise ValueError("beta(b=...) requires an integer b")
        args["b"] = int(args["b"])
    return cls(**args)
