"""Seeded Monte-Carlo studies of the spectral cut-off estimator.

An :class:`ExperimentConfig` fixes target and noise models, the development
point, sample size, cut-off rule and evaluation grid. :func:`run_experiment`
draws one contaminated sample per replicate from independent RNG streams,
estimates, evaluates and scores against the known target; results depend on
the configuration only, never on worker count or scheduling.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np
import yaml

from . import __version__
from .distributions import ProductModel, as_product, contaminate, mellin_closed_form, parse_model, sample
from .estimator import DensityEstimate, weighted_risk_mellin, weighted_risk_spatial
from .mellin import mellin_forward
from .quadrature import MellinContext, QuadratureConfig
from .selection import SelectionConfig, SelectionTrace, select_cutoff

__all__ = [
    "ExperimentConfig",
    "ReplicateResult",
    "RunReport",
    "RateTable",
    "run_experiment",
    "run_replicate",
    "rate_study",
    "transforms_report",
    "figure_recipes",
    "figure_panels",
    "load_config",
    "dump_config",
    "fmt_float",
]

MODES = ("fixed", "power", "adaptive")
RISK_METHODS = ("auto", "spatial", "mellin")
_QUAD_KEYS = {f.name for f in fields(QuadratureConfig)}


def fmt_float(v) -> str:
    """Shortest round-trip decimal representation, independent of locale."""
    return repr(float(v))


@dataclass
class ExperimentConfig:
    """Everything that determines a simulation run.

    ``target`` and ``noise`` hold one model spec string per axis. ``mode`` is
    ``fixed`` (cut-off ``k``), ``power`` (``k_j = n^k_exponent``) or
    ``adaptive`` (data-driven selection with ``chi1``, ``chi2``, ``grid_cap``).
    ``eval_range`` lists ``[lo, hi]`` per axis; when omitted it is derived from
    the target quantiles. ``quad`` overrides :class:`QuadratureConfig` fields.
    """

    target: list
    noise: list
    c: list
    n: int
    name: str = "experiment"
    replicates: int = 50
    seed: int = 0
    mode: str = "fixed"
    k: Optional[list] = None
    k_exponent: Optional[float] = None
    chi1: float = 1.2
    chi2: Optional[float] = None
    grid_cap: int = 50
    eval_points: Optional[list] = None
    eval_range: Optional[list] = None
    eval_log: Optional[bool] = None
    quad: dict = field(default_factory=dict)
    risk_method: str = "auto"
    oracle: bool = False
    nonneg_clip: bool = False
    workers: int = 1
    outputs: Optional[str] = None

    def __post_init__(self):
        self.target = _as_list(self.target)
        self.noise = _as_list(self.noise)
        d = len(self.target)
        if d < 1:
            raise ValueError("target needs at least one axis")
        if len(self.noise) == 1 and d > 1:
            self.noise = self.noise * d
        if len(self.noise) != d:
            raise ValueError(f"target has {d} axes but noise has {len(self.noise)}")
        self.c = [float(v) for v in _as_list(self.c)]
        if len(self.c) == 1 and d > 1:
            self.c = self.c * d
        if len(self.c) != d:
            raise ValueError(f"c has {len(self.c)} entries, expected {d}")
        self.n = int(self.n)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        self.replicates = int(self.replicates)
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        self.seed = int(self.seed)
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "fixed":
            if self.k is None:
                raise ValueError("fixed mode needs k")
            self.k = [float(v) for v in _as_list(self.k)]
            if len(self.k) == 1 and d > 1:
                self.k = self.k * d
            if len(self.k) != d or min(self.k) <= 0:
                raise ValueError("k must hold one positive cut-off per axis")
        if self.mode == "power" and not (self.k_exponent and self.k_exponent > 0):
            raise ValueError("power mode needs a positive k_exponent")
        self.chi1 = float(self.chi1)
        self.chi2 = None if self.chi2 is None else float(self.chi2)
        if self.risk_method not in RISK_METHODS:
            raise ValueError(f"risk_method must be one of {RISK_METHODS}")
        unknown = set(self.quad) - _QUAD_KEYS
        if unknown:
            raise ValueError(f"unknown quadrature override(s): {sorted(unknown)}")
        if self.eval_points is not None:
            self.eval_points = [int(v) for v in _as_list(self.eval_points)]
            if len(self.eval_points) == 1 and d > 1:
                self.eval_points = self.eval_points * d
            if len(self.eval_points) != d or min(self.eval_points) < 1:
                raise ValueError("eval_points must hold one positive count per axis")
        if self.eval_range is not None:
            rng = [list(map(float, r)) for r in self.eval_range]
            if len(rng) != d or any(len(r) != 2 or not 0 < r[0] < r[1] for r in rng):
                raise ValueError("eval_range must hold one [lo, hi] pair with 0 < lo < hi per axis")
            self.eval_range = rng
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")
        self.workers = int(self.workers)
        # build the models once to surface spec errors early
        self.target_model()
        self.noise_model()
        self.selection_config()
        self.quad_config()

    # -- derived objects ---------------------------------------------------------
    @property
    def d(self) -> int:
        return len(self.target)

    def target_model(self) -> ProductModel:
        return ProductModel([parse_model(s) for s in self.target])

    def noise_model(self) -> ProductModel:
        return ProductModel([parse_model(s) for s in self.noise])

    def context(self) -> MellinContext:
        return MellinContext(self.c)

    def quad_config(self) -> QuadratureConfig:
        return QuadratureConfig(**self.quad)

    def selection_config(self) -> SelectionConfig:
        return SelectionConfig(chi1=self.chi1, chi2=self.chi2, grid_cap=self.grid_cap, nonneg_clip=self.nonneg_clip)

    def resolved_risk_method(self) -> str:
        if self.risk_method != "auto":
            return self.risk_method
        return "spatial" if self.d == 1 else "mellin"

    def cutoff(self) -> Optional[tuple]:
        if self.mode == "fixed":
            return tuple(self.k)
        if self.mode == "power":
            return tuple([float(self.n) ** self.k_exponent] * self.d)
        return None

    def eval_axes(self) -> list[np.ndarray]:
        """Per-axis evaluation abscissae (linear for d = 1, log-spaced otherwise)."""
        log = self.eval_log if self.eval_log is not None else self.d > 1
        points = self.eval_points or [400 if self.d == 1 else 60] * self.d
        ranges = self.eval_range or default_eval_range(self.target_model(), log)
        axes = []
        for (lo, hi), m in zip(ranges, points):
            axes.append(np.geomspace(lo, hi, m) if log else np.linspace(lo, hi, m))
        return axes

    # -- serialization -----------------------------------------------------------
    def to_dict(self) -> dict:
        out = asdict(self)
        out["quad"] = dict(self.quad)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**data)

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def content_hash(self) -> str:
        """SHA-256 of the canonical JSON form of the configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _as_list(v) -> list:
    if v is None:
        return []
    if isinstance(v, (str, int, float)):
        return [v]
    return list(v)


def default_eval_range(target: ProductModel, log: bool) -> list[list[float]]:
    """Per-axis range covering the bulk of the target (0.1% to 99.9% quantiles)."""
    out = []
    for comp in target.components:
        lo_s, hi_s = comp.support
        hi = hi_s if math.isfinite(hi_s) else float(comp.ppf(0.999))
        if log:
            lo = max(lo_s, float(comp.ppf(0.001)))
        else:
            lo = max(lo_s, hi / 400.0) if lo_s == 0 else lo_s
        out.append([lo, hi])
    return out


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at the top level")
    return ExperimentConfig.from_dict(data)


def dump_config(config: ExperimentConfig, path: Optional[str] = None) -> str:
    text = yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


# -- replicates -----------------------------------------------------------------------


@dataclass
class ReplicateResult:
    index: int
    k: tuple
    risk: float
    values: np.ndarray
    trace: Optional[SelectionTrace] = None
    extremes: dict = field(default_factory=dict)
    oracle_risk: Optional[float] = None


def _risk(est: DensityEstimate, target, method: str, clip: bool) -> float:
    if method == "mellin":
        return weighted_risk_mellin(est, target)
    return weighted_risk_spatial(est, target, clip_negative=clip)


def run_replicate(config: ExperimentConfig, r: int) -> ReplicateResult:
    """One replicate: draw X on stream ``(seed, r, 0)`` and U on ``(seed, r, 1)``."""
    try:
        return _run_replicate(config, r)
    except (ValueError, FloatingPointError) as exc:
        raise type(exc)(f"replicate {r}: {exc}") from exc


def _run_replicate(config: ExperimentConfig, r: int) -> ReplicateResult:
    target, noise = config.target_model(), config.noise_model()
    ctx, quad = config.context(), config.quad_config()
    X = sample(target, config.n, config.seed, r, 0)
    U = sample(noise, config.n, config.seed, r, 1)
    Y = contaminate(X, U)
    method = config.resolved_risk_method()
    trace, extremes, oracle = None, {}, None
    if config.mode == "adaptive":
        trace, cache = select_cutoff(Y, noise, ctx, config.selection_config(), quad)
        k = trace.k_selected
        est = cache.estimate(k)
        table = cache.risk_table(target)
        extremes = {
            "k_min": float(table[(0,) * config.d]),
            "k_max": float(table[tuple(a - 1 for a in trace.k_max)]),
            "k_selected": float(table[tuple(a - 1 for a in k)]),
        }
        if config.oracle:
            idx = np.asarray(trace.grid) - 1
            oracle = float(np.min(table[tuple(idx.T)]))
    else:
        k = config.cutoff()
        est = DensityEstimate(Y, noise, ctx, k, quad)
    risk = _risk(est, target, method, config.nonneg_clip)
    axes = config.eval_axes()
    values = est.on_grid(axes[0]) if config.d == 1 else est.on_mesh(axes)
    if config.nonneg_clip:
        values = np.maximum(values, 0.0)
    return ReplicateResult(r, tuple(k), risk, values, trace, extremes, oracle)


# -- reports ----------------------------------------------------------------------------


@dataclass
class RunReport:
    config: ExperimentConfig
    replicates: list
    eval_axes: list
    truth: np.ndarray
    wall_time: float = 0.0

    @property
    def risks(self) -> np.ndarray:
        return np.array([rep.risk for rep in self.replicates])

    @property
    def cutoffs(self) -> np.ndarray:
        return np.array([rep.k for rep in self.replicates])

    def extreme_risks(self, key: str) -> np.ndarray:
        return np.array([rep.extremes[key] for rep in self.replicates])

    @property
    def oracle_risks(self) -> np.ndarray:
        return np.array([rep.oracle_risk for rep in self.replicates], dtype=float)

    def summary(self) -> dict:
        risks = self.risks
        q25, med, q75 = np.quantile(risks, [0.25, 0.5, 0.75])
        out = {
            "replicates": len(risks),
            "risk_mean": float(np.mean(risks)),
            "risk_median": float(med),
            "risk_q25": float(q25),
            "risk_q75": float(q75),
            "risk_std": float(np.std(risks, ddof=1)) if len(risks) > 1 else 0.0,
        }
        if self.config.mode == "adaptive":
            for key in ("k_selected", "k_min", "k_max"):
                out[f"median_risk_{key}"] = float(np.median(self.extreme_risks(key)))
            if self.config.oracle:
                out["median_risk_oracle"] = float(np.median(self.oracle_risks))
        return out

    def pointwise(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pointwise median and quartiles of the evaluated estimates."""
        stack = np.stack([rep.values for rep in self.replicates])
        q25, med, q75 = np.quantile(stack, [0.25, 0.5, 0.75], axis=0)
        return med, q25, q75

    def manifest(self) -> dict:
        return {
            "name": self.config.name,
            "package_version": __version__,
            "config_sha256": self.config.content_hash(),
            "config": self.config.to_dict(),
            "eval_range": [[float(a[0]), float(a[-1])] for a in self.eval_axes],
            "risk_method": self.config.resolved_risk_method(),
            "wall_time_seconds": self.wall_time,
        }

    def write(self, outdir: str, plot_script: bool = False) -> list[str]:
        """Write CSV tables, the config echo and the manifest into ``outdir``."""
        os.makedirs(outdir, exist_ok=True)
        d = self.config.d
        kcols = [f"k{j + 1}" for j in range(d)]
        written = []

        rows = []
        extra = []
        if self.config.mode == "adaptive":
            extra = ["risk_k_selected", "risk_k_min", "risk_k_max"]
            if self.config.oracle:
                extra.append("risk_oracle")
        for rep in self.replicates:
            row = [str(rep.index)] + [fmt_float(v) for v in rep.k] + [fmt_float(rep.risk)]
            if extra:
                row += [fmt_float(rep.extremes[key]) for key in ("k_selected", "k_min", "k_max")]
                if self.config.oracle:
                    row.append(fmt_float(rep.oracle_risk))
            rows.append(row)
        written.append(_write_csv(outdir, "risks.csv", ["replicate", *kcols, "risk", *extra], rows))

        summary = self.summary()
        written.append(
            _write_csv(outdir, "summary.csv", ["statistic", "value"], [[k, _fmt_any(v)] for k, v in summary.items()])
        )

        med, q25, q75 = self.pointwise()
        xcols = [f"x{j + 1}" for j in range(d)]
        mesh = np.stack(np.meshgrid(*self.eval_axes, indexing="ij"), axis=-1).reshape(-1, d)
        cols = [a.ravel() for a in (self.truth, med, q25, q75)]
        rows = [[fmt_float(v) for v in (*mesh[i], *(c[i] for c in cols))] for i in range(len(mesh))]
        written.append(_write_csv(outdir, "median.csv", [*xcols, "truth", "median", "q25", "q75"], rows))

        if self.config.mode == "adaptive":
            rows = []
            for rep in self.replicates:
                for k, v, a, obj, chosen in rep.trace.rows():
                    rows.append(
                        [str(rep.index), *map(str, k), fmt_float(v), fmt_float(a), fmt_float(obj), str(int(chosen))]
                    )
            header = ["replicate", *kcols, "v_hat", "a_hat", "objective", "selected"]
            written.append(_write_csv(outdir, "traces.csv", header, rows))

        path = os.path.join(outdir, "config.yaml")
        dump_config(self.config, path)
        written.append(path)
        path = os.path.join(outdir, "manifest.json")
        manifest = self.manifest()
        manifest["files_sha256"] = {os.path.basename(p): _sha256(p) for p in written if p.endswith(".csv")}
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        written.append(path)
        if plot_script:
            written.append(_write_plot_script(outdir, d))
        return written


def _fmt_any(v) -> str:
    return str(v) if isinstance(v, (int, np.integer)) else fmt_float(v)


def _write_csv(outdir: str, name: str, header: Sequence[str], rows) -> str:
    path = os.path.join(outdir, name)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    return path


def _sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _write_plot_script(outdir: str, d: int) -> str:
    path = os.path.join(outdir, "plot.gp")
    if d == 1:
        body = (
            "set datafile separator ','\n"
            "set key autotitle columnhead\n"
            "set terminal pngcairo size 800,500\n"
            "set output 'median.png'\n"
            "plot 'median.csv' using 1:3:4 with filledcurves fs transparent solid 0.2 title 'quartiles', \\\n"
            "     '' using 1:2 with lines lw 2 lc rgb 'black' title 'true density', \\\n"
            "     '' using 1:3 with lines lw 2 lc rgb 'red' title 'pointwise median'\n"
        )
    else:
        body = (
            "set datafile separator ','\n"
            "set terminal pngcairo size 1000,500\n"
            "set output 'median.png'\n"
            "set multiplot layout 1,2\n"
            "set logscale xy\n"
            "set title 'true density'\n"
            "splot 'median.csv' every ::1 using 1:2:3 with points pt 7 ps 0.3 notitle\n"
            "set title 'pointwise median'\n"
            "splot 'median.csv' every ::1 using 1:2:4 with points pt 7 ps 0.3 notitle\n"
            "unset multiplot\n"
        )
    with open(path, "w") as fh:
        fh.write(body)
    return path


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Run all replicates and collect risks, pointwise summaries and traces."""
    start = time.perf_counter()
    indices = range(config.replicates)
    if config.workers > 1 and config.replicates > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            reps = list(pool.map(run_replicate, [config] * config.replicates, indices))
    else:
        reps = [run_replicate(config, r) for r in indices]
    reps.sort(key=lambda rep: rep.index)
    axes = config.eval_axes()
    target = config.target_model()
    if config.d == 1:
        truth = target.components[0].pdf(axes[0])
    else:
        truth = target.pdf(np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1))
    report = RunReport(config, reps, axes, truth)
    report.wall_time = time.perf_counter() - start
    return report


# -- rate studies -----------------------------------------------------------------------


@dataclass
class RateTable:
    n: list
    mean_risk: list
    median_risk: list
    slope: float
    slope_ci: tuple
    risks: list = field(repr=False, default_factory=list)

    def rows(self):
        for n, mean, med in zip(self.n, self.mean_risk, self.median_risk):
            yield n, mean, med

    def write(self, path: str) -> str:
        with open(path, "w", newline="\n") as fh:
            fh.write("n,mean_risk,median_risk\n")
            for n, mean, med in self.rows():
                fh.write(f"{n},{fmt_float(mean)},{fmt_float(med)}\n")
            fh.write(f"# slope,{fmt_float(self.slope)}\n")
            fh.write(f"# slope_ci95,{fmt_float(self.slope_ci[0])},{fmt_float(self.slope_ci[1])}\n")
        return path


def _loglog_slope(n: np.ndarray, risk: np.ndarray) -> float:
    return float(np.polyfit(np.log(n), np.log(risk), 1)[0])


def rate_study(config: ExperimentConfig, n_list: Sequence[int], n_boot: int = 1000) -> RateTable:
    """Mean and median risk per sample size, with a fitted log-log slope.

    The slope regresses log mean risk on log n; its 95% interval comes from a
    percentile bootstrap that resamples replicates within each sample size.
    """
    n_list = sorted(int(n) for n in n_list)
    if len(n_list) < 2:
        raise ValueError("a rate study needs at least two sample sizes")
    if config.mode == "fixed":
        raise ValueError("rate studies need mode 'power' or 'adaptive'")
    risks = [run_experiment(config.with_(n=n)).risks for n in n_list]
    n_arr = np.asarray(n_list, dtype=float)
    means = np.array([r.mean() for r in risks])
    slope = _loglog_slope(n_arr, means)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(2**31 - 1,)))
    boot = np.empty(n_boot)
    for b in range(n_boot):
        resampled = [r[rng.integers(0, len(r), len(r))].mean() for r in risks]
        boot[b] = _loglog_slope(n_arr, np.asarray(resampled))
    lo, hi = np.quantile(boot, [0.025, 0.975])
    return RateTable(
        n=n_list,
        mean_risk=means.tolist(),
        median_risk=[float(np.median(r)) for r in risks],
        slope=slope,
        slope_ci=(float(lo), float(hi)),
        risks=risks,
    )


# -- closed form versus quadrature ---------------------------------------------------------


def _forward_quad(model, c: float) -> QuadratureConfig:
    """Spatial window wide enough that truncation stays far below 1e-10."""
    lo_s, hi_s = model.support
    hi = hi_s if math.isfinite(hi_s) else 10.0 * float(model.ppf(1.0 - 1e-15))
    lo = lo_s if lo_s > 0 else 0.1 * float(model.ppf(1e-15))
    lo = max(lo, hi * 1e-300)
    ratio = min(max(lo / hi, 1e-300), 0.5)
    return QuadratureConfig(x_max=hi, x_min_ratio=ratio)


def transforms_report(spec: str, c: float, t_list: Sequence[float], quad: QuadratureConfig | None = None) -> list[tuple]:
    """Rows ``(t, closed form, quadrature, |difference|)`` for one catalog model."""
    model = parse_model(spec)
    model.check_c(c)
    quad = quad or _forward_quad(model, c)
    ctx = MellinContext(c)
    rows = []
    for t in t_list:
        exact = mellin_closed_form(model, c, t)
        numeric = mellin_forward(model, ctx, float(t), quad)
        rows.append((float(t), exact, numeric, abs(exact - numeric)))
    return rows


# -- canned figure settings ---------------------------------------------------------------

F1 = "gamma(shape=4,scale=2)"
F2 = "weibull(m=2)"
F3 = "scaledbeta(p=4,q=5,scale=2)"
F4 = "lognormal(mu=0,lambda=1)"
G1 = "uniform()"
G2 = "pareto()"
G3 = "beta(b=2)"
G4 = "loggamma(a=0.5,lambda=1)"


def _fixed(name, target, noise, c, n):
    return ExperimentConfig(target=[target], noise=[noise], c=[c], n=n, name=name, mode="fixed", k=[4.0], seed=20210)


def figure_panels(name: str) -> list[ExperimentConfig]:
    """All panel configurations of a figure setting; the first is the headline."""
    if name == "fig1":
        return [
            _fixed(f"fig1_{tag}_n{n}", f, G2, 0.5, n)
            for n in (500, 1000)
            for tag, f in (("f1", F1), ("f2", F2), ("f3", F3), ("f4", F4))
        ]
    if name == "fig2":
        return [_fixed(f"fig2_{tag}", F1, g, 0.5, 1000) for tag, g in (("g1", G1), ("g2", G2), ("g3", G3), ("g4", G4))]
    if name == "fig4":
        return [_fixed(f"fig4_c{c:g}_n{n}", F1, G4, c, n) for n in (500, 2000) for c in (0.0, 0.5, 1.0)]
    if name == "fig5":
        return [
            ExperimentConfig(
                target=[F1, F2], noise=["none()", "none()"], c=[0.5, 0.5], n=500, name="fig5",
                mode="adaptive", chi1=1.2, chi2=1.2, seed=20210,
            )
        ]
    if name == "fig6":
        return [
            ExperimentConfig(
                target=[F1, F2], noise=[G4, G4], c=[0.5, 0.5], n=500, name="fig6",
                mode="adaptive", chi1=0.3, chi2=0.3, seed=20210,
            )
        ]
    raise ValueError(f"unknown figure recipe {name!r}; available: fig1, fig2, fig4, fig5, fig6")


def figure_recipes(name: str) -> ExperimentConfig:
    """Canned configuration for a figure setting (headline panel)."""
    return figure_panels(name)[0]
