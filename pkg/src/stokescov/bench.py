"""Monte Carlo MSE studies, sweeps and the deterministic demonstrations."""
from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import moments
from .estimator import (ESTIMATORS, FULL, PARAMS, Infeasible, SignalEstimate, feasibility_check,
                        parameter_errors, with_standard_errors)
from .moments import DEFAULT_ANGLES
from .sampler import IncrementalSampler, SeedSpec, sample_moment_set
from .states import GaussianParams, MomentForm, ReferenceSpec, params_to_moments, reference_from_ner

WORKED_SIGNAL = GaussianParams.from_eigen(237.0, 86.0, 0.7, 158.0, 0.2)

# assumptions each estimator path relies on, for feasibility_check
PATH_ASSUMPTIONS = {
    "general": frozenset(),
    "cosine_fit": frozenset(),
    "squeezed": frozenset({"squeezed"}),
    "displaced_symmetric": frozenset({"displaced_symmetric"}),
}
PATH_PARAMS = {
    "general": PARAMS,
    "cosine_fit": PARAMS,
    "squeezed": ("b", "c", "alpha"),
    "displaced_symmetric": ("b", "d", "beta"),
}


@dataclass
class TrialConfig:
    signal: GaussianParams = WORKED_SIGNAL
    r_ref: float = 1.0
    delta: float = 10.0
    gamma: float = 1.0
    reference: ReferenceSpec | None = None
    n_states: int = 10_000
    trials: int = 200
    angles: tuple[float, ...] = DEFAULT_ANGLES
    mode: str = "wigner"
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(0))
    estimator: str = "general"
    bootstrap: int = 1000

    def __post_init__(self):
        if self.n_states < len(self.angles):
            raise ValueError("n_states must give every angle at least one shot")
        if self.trials < 2:
            raise ValueError("at least 2 trials are needed for MSE error bars")
        if self.estimator not in PATH_ASSUMPTIONS:
            raise ValueError(f"estimator must be one of {sorted(PATH_ASSUMPTIONS)}")

    @property
    def ref(self) -> ReferenceSpec:
        if self.reference is not None:
            return self.reference
        return reference_from_ner(self.r_ref, self.delta, self.gamma)

    @property
    def params(self) -> tuple[str, ...]:
        return PATH_PARAMS[self.estimator]

    def describe(self) -> dict:
        out = {
            "signal": f"b={self.signal.b:g},c={self.signal.c:g},alpha={self.signal.alpha:g},"
                      f"d={self.signal.d:g},beta={self.signal.beta:g}",
            "n_states": self.n_states, "trials": self.trials, "mode": self.mode,
            "seed": self.seed.seed, "stream": self.seed.stream, "estimator": self.estimator,
        }
        if self.reference is None:
            out.update(r_ref=self.r_ref, delta=self.delta, gamma=self.gamma)
        else:
            out.update(ref=f"b={self.reference.b:g},c={self.reference.c:g},d={self.reference.d:g}")
        return out


@dataclass
class MSEReport:
    params: tuple[str, ...]
    mse: dict[str, float]
    mse_err: dict[str, float]
    squared_errors: dict[str, np.ndarray] = field(repr=False)
    axis: str | None = None
    axis_value: float | None = None
    config: dict = field(default_factory=dict)
    error: str | None = None
    nonphysical: int = 0

    def ratio(self, other: "MSEReport", name: str) -> float:
        return self.mse[name] / other.mse[name]


def _bootstrap_se(values: np.ndarray, n_boot: int, rng: np.random.Generator) -> float:
    idx = rng.integers(0, len(values), size=(n_boot, len(values)))
    return float(values[idx].mean(axis=1).std(ddof=1))


def single_trial(cfg: TrialConfig, trial: int) -> SignalEstimate:
    ms = sample_moment_set(cfg.signal, cfg.ref, cfg.angles, cfg.n_states, cfg.mode,
                           cfg.seed.child(trial))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ESTIMATORS[cfg.estimator](ms, cfg.ref)


def run_mse(cfg: TrialConfig, workers: int = 1) -> MSEReport:
    """Empirical MSE of each parameter over ``cfg.trials`` independent experiments."""
    ref = cfg.ref
    status = feasibility_check(ref, PATH_ASSUMPTIONS[cfg.estimator])
    if status != FULL:
        raise Infeasible(
            f"{cfg.estimator} estimation is not available ({status}) for reference "
            f"b={ref.b:.4g}, c={ref.c:.4g}, d={ref.d:.4g}: "
            + ("reference is thermal: v = 0" if status == "energy_only"
               else "reference is not displaced: d_R = 0, mean parameters cannot be estimated"))
    names = cfg.params
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            estimates = list(pool.map(lambda t: single_trial(cfg, t), range(cfg.trials)))
    else:
        estimates = [single_trial(cfg, t) for t in range(cfg.trials)]
    sq = {n: np.empty(cfg.trials) for n in names}
    nonphysical = 0
    for t, est in enumerate(estimates):
        errs = parameter_errors(est, cfg.signal, names)
        for n in names:
            sq[n][t] = errs[n] ** 2
        nonphysical += est.physical is False
    rng = cfg.seed.child(1 << 30).generator()
    mse = {n: float(sq[n].mean()) for n in names}
    err = {n: _bootstrap_se(sq[n], cfg.bootstrap, rng) for n in names}
    return MSEReport(params=names, mse=mse, mse_err=err, squared_errors=sq, config=cfg.describe(),
                     nonphysical=nonphysical)


SWEEP_AXES = ("gamma", "delta", "r_ref", "n_states")


def sweep(cfg: TrialConfig, axis: str, values: Sequence[float], workers: int = 1) -> list[MSEReport]:
    """One MSE report per axis value; point ``i`` uses stream ``cfg.seed.stream + i``."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}")
    if axis != "n_states" and cfg.reference is not None:
        raise ValueError("reference sweeps need the (r_ref, delta, gamma) form")
    out = []
    for i, value in enumerate(values):
        seed = SeedSpec(cfg.seed.seed, cfg.seed.stream + i, cfg.seed.path)
        kw = {axis: int(value) if axis == "n_states" else float(value), "seed": seed}
        try:
            point = replace(cfg, **kw)
            rep = run_mse(point, workers)
        except (Infeasible, ValueError) as exc:
            rep = MSEReport(params=cfg.params, mse={}, mse_err={}, squared_errors={},
                            config=cfg.describe(), error=str(exc))
        rep.axis, rep.axis_value = axis, float(value)
        out.append(rep)
    return out


def sweep_csv(reports: Sequence[MSEReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["axis_value", "param", "mse", "mse_err"])
    for rep in reports:
        value = "" if rep.axis_value is None else repr(rep.axis_value)
        if rep.error is not None:
            for n in rep.params:
                w.writerow([value, n, "nan", "nan"])
            continue
        for n in rep.params:
            w.writerow([value, n, repr(rep.mse[n]), repr(rep.mse_err[n])])
    return buf.getvalue()


def loglog_slope(ns: Sequence[float], mses: Sequence[float]) -> float:
    return float(np.polyfit(np.log(ns), np.log(mses), 1)[0])


# --- convergence ---------------------------------------------------------------

@dataclass
class ConvergenceRow:
    n: int
    param: str
    estimate: float
    stderr: float
    truth: float


@dataclass
class ConvergenceReport:
    rows: list[ConvergenceRow]
    config: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "param", "estimate", "stderr", "truth"])
        for r in self.rows:
            w.writerow([r.n, r.param, repr(r.estimate), repr(r.stderr), repr(r.truth)])
        return buf.getvalue()

    def at(self, n: int) -> dict[str, ConvergenceRow]:
        return {r.param: r for r in self.rows if r.n == n}


def convergence_study(cfg: TrialConfig, n_values: Sequence[int]) -> ConvergenceReport:
    """Single-experiment trajectories: estimates and delta-method errors as shots accumulate."""
    sampler = IncrementalSampler(cfg.signal, cfg.ref, cfg.angles, cfg.mode, cfg.seed)
    est_fn = ESTIMATORS[cfg.estimator]
    rows = []
    for n in sorted(int(v) for v in n_values):
        ms = sampler.grow_to(n)
        est = with_standard_errors(est_fn, ms, cfg.ref, cfg.params)
        for name in cfg.params:
            rows.append(ConvergenceRow(n, name, est.value(name), est.stderr[name],
                                       getattr(cfg.signal, name)))
    return ConvergenceReport(rows, cfg.describe())


def coverage(cfg: TrialConfig, k: float = 3.0) -> tuple[float, list[dict[str, float]]]:
    """Fraction of trials in which every estimate lies within ``k`` standard errors of truth."""
    zs = []
    for t in range(cfg.trials):
        ms = sample_moment_set(cfg.signal, cfg.ref, cfg.angles, cfg.n_states, cfg.mode,
                               cfg.seed.child(t))
        est = with_standard_errors(ESTIMATORS[cfg.estimator], ms, cfg.ref, cfg.params)
        errs = parameter_errors(est, cfg.signal, cfg.params)
        zs.append({n: errs[n] / est.stderr[n] for n in cfg.params})
    hits = sum(all(abs(z) <= k for z in row.values()) for row in zs)
    return hits / len(zs), zs


# --- deterministic demonstrations ---------------------------------------------

SIGNAL_A = dict(b=2.0, c=2.0, mean_x=3.0, mean_p=0.0, alpha=0.0)
# printed values have b < c; GaussianParams.from_eigen swaps the axes
SIGNAL_B = dict(b=1.5118, c=2.3905, mean_x=2.9451, mean_p=0.5714, alpha=4.0228)


def _signal(spec: dict) -> GaussianParams:
    d = math.hypot(spec["mean_x"], spec["mean_p"])
    beta = math.atan2(spec["mean_p"], spec["mean_x"])
    return GaussianParams.from_eigen(spec["b"], spec["c"], spec["alpha"], d, beta)


@dataclass
class IndistinguishabilityReport:
    reference: ReferenceSpec
    rows: list[tuple[str, float, float, float]]

    @property
    def max_relative_difference(self) -> float:
        return max(r[3] for r in self.rows)

    def render(self) -> str:
        lines = [f"reference: b={self.reference.b:.6g}, c={self.reference.c:.6g}, d={self.reference.d:.6g}",
                 f"{'quantity':<18}{'signal A':>16}{'signal B':>16}{'rel diff':>12}"]
        for name, a, b, rel in self.rows:
            lines.append(f"{name:<18}{a:>16.8g}{b:>16.8g}{rel:>12.2e}")
        return "\n".join(lines) + "\n"


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def indistinguishability_demo(ref: ReferenceSpec | None = None) -> IndistinguishabilityReport:
    """Two different signals with identical S2^2 and S0^2 under a non-displaced reference."""
    ref = ref or reference_from_ner(1.0, 1.0, 0.0)
    if ref.d != 0.0:
        raise ValueError("the demonstration needs a non-displaced reference")
    sa, sb = _signal(SIGNAL_A), _signal(SIGNAL_B)
    rows = []
    for label, phi in (("S2^2(0)", 0.0), ("S2^2(pi/4)", math.pi / 4), ("S2^2(pi/2)", math.pi / 2)):
        a, b = moments.second_s2(sa, ref, phi), moments.second_s2(sb, ref, phi)
        rows.append((label, a, b, _rel(a, b)))
    for label, fa, fb in (
        ("S0", moments.mean_s0(sa, ref), moments.mean_s0(sb, ref)),
        ("S0^2", moments.second_s0(sa, ref), moments.second_s0(sb, ref)),
        ("b^2+c^2", sa.b ** 2 + sa.c ** 2, sb.b ** 2 + sb.c ** 2),
        ("d^2", sa.d ** 2, sb.d ** 2),
    ):
        rows.append((label, fa, fb, _rel(fa, fb)))
    return IndistinguishabilityReport(ref, rows)


@dataclass
class HomodyneLimitReport:
    rows: list[tuple[float, float, float, float]]  # d_R, phi, normalised, target

    def deviation(self, d_r: float, phi: float) -> float:
        for dr, ph, val, target in self.rows:
            if dr == d_r and abs(ph - phi) < 1e-12:
                return abs(val - target) / abs(target)
        raise KeyError((d_r, phi))


def homodyne_limit_check(signal: GaussianParams, d_r_values: Sequence[float],
                         angles: Sequence[float] = DEFAULT_ANGLES) -> HomodyneLimitReport:
    """Coherent reference (b_R = c_R = 1): 4 <S2^2(phi)> / d_R^2 -> <(x_phi)^2> of the signal."""
    m: MomentForm = params_to_moments(signal)
    rows = []
    for d_r in d_r_values:
        ref = ReferenceSpec(GaussianParams.coherent(float(d_r)))
        for phi in angles:
            val = 4.0 * moments.second_s2(signal, ref, phi) / d_r ** 2
            rows.append((float(d_r), float(phi), val, m.directional_second_moment(phi)))
    return HomodyneLimitReport(rows)
