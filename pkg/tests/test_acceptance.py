"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line in ``RESULTS``; the lines are printed
in the pytest terminal summary and when this file is run as a script:

    python3 tests/test_acceptance.py
"""
from __future__ import annotations

import itertools
import math
import time
import warnings

from stokescov import fockcheck
from stokescov.bench import (WORKED_SIGNAL, TrialConfig, coverage, homodyne_limit_check,
                             indistinguishability_demo, loglog_slope, run_mse, sweep)
from stokescov.estimator import (FULL, Infeasible, estimate_cosine_fit, estimate_displaced_symmetric,
                                 estimate_gaussian_s02, estimate_general, estimate_mean,
                                 estimate_squeezed_signal, estimate_thermal_reference)
from stokescov.moments import DEFAULT_ANGLES, moment_set
from stokescov.sampler import SeedSpec, sample_moment_set
from stokescov.states import GaussianParams, ReferenceSpec, angle_difference, reference_from_ner

PARAMS = ("b", "c", "alpha", "d", "beta")
TRUTH = {"b": 237.0, "c": 86.0, "alpha": 0.7, "d": 158.0, "beta": 0.2}
SEED = SeedSpec(0)

RESULTS: dict[int, str] = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    RESULTS[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2} {title}: {detail}"
    print(RESULTS[number])
    assert ok, RESULTS[number]


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def _ref_grid() -> list[ReferenceSpec]:
    refs = [reference_from_ner(r, delta, gamma)
            for r in (1.0, 3.0)
            for delta, gamma in ((0.5, 0.5), (10.0, 1.0), (10.0, 0.3), (100.0, 0.7))]
    refs += [ReferenceSpec(GaussianParams(r=1.3, q=2.0, d=5.0)),
             ReferenceSpec(GaussianParams(r=2.0, q=1.2, d=0.4))]
    return refs


def test_c01_ordering_calibration():
    t0 = time.perf_counter()
    rep = fockcheck.validate(dim=60, tolerance=1e-9, moment_tolerance=1e-6)
    elapsed = time.perf_counter() - t0
    ok = (rep.n_states >= 20 and rep.max_relative_error <= 1e-6 and rep.kappa2_spread <= 1e-9
          and abs(rep.constants.kappa2 + 0.5) <= 1e-9 and abs(rep.vacuum_coherent_s2 - 1.0) <= 1e-9
          and elapsed <= 60)
    record(1, "ordering calibration", ok,
           f"{rep.n_states} states, max rel err {rep.max_relative_error:.1e}, kappa2 {rep.constants.kappa2:.10f} "
           f"(spread {rep.kappa2_spread:.1e}), vac x coh <S2^2(0)> = {rep.vacuum_coherent_s2:.10f}, {elapsed:.1f}s")


def test_c02_round_trip_exactness():
    worst_gen = worst_fit = 0.0
    refs = _ref_grid()
    assert len(refs) == 10
    for ref in refs:
        ms = moment_set(WORKED_SIGNAL, ref, DEFAULT_ANGLES)
        gen, fit = estimate_general(ms, ref), estimate_cosine_fit(ms, ref)
        for n in PARAMS:
            worst_gen = max(worst_gen, _rel(gen.value(n), TRUTH[n]))
            worst_fit = max(worst_fit, _rel(fit.value(n), gen.value(n)))
    record(2, "round-trip exactness", worst_gen <= 1e-9 and worst_fit <= 1e-9,
           f"10 references, max rel error {worst_gen:.1e}, cosine-fit vs general {worst_fit:.1e}")


def test_c03_one_over_n_law():
    t0 = time.perf_counter()
    ns = [1_000, 10_000, 100_000]
    reps = sweep(TrialConfig(delta=10.0, gamma=1.0, trials=200, seed=SEED), "n_states", ns)
    slopes = {n: loglog_slope(ns, [r.mse[n] for r in reps]) for n in PARAMS}
    elapsed = time.perf_counter() - t0
    ok = all(abs(s + 1.0) <= 0.1 for s in slopes.values()) and elapsed <= 300
    record(3, "1/N law", ok,
           "slopes " + ", ".join(f"{n} {s:+.3f}" for n, s in slopes.items())
           + f" (nonphysical trials at N=1e3: {reps[0].nonphysical}/200), {elapsed:.1f}s")


def test_c04_reference_width_independence():
    reps = sweep(TrialConfig(delta=1.0, gamma=1.0, seed=SEED), "r_ref", [1.0, 2.0, 5.0, 10.0])
    worst = 0.0
    for a, b in itertools.combinations(reps, 2):
        for n in PARAMS:
            worst = max(worst, abs(a.mse[n] - b.mse[n]) / math.hypot(a.mse_err[n], b.mse_err[n]))
    record(4, "r_R independence", worst <= 3.0,
           f"largest pairwise MSE difference {worst:.2f} combined bootstrap SE over r_R in {{1,2,5,10}}")


def test_c05_gamma_divergence():
    base = TrialConfig(delta=1.0, seed=SEED)
    small, one = sweep(base, "gamma", [1e-3, 1.0])
    ratio = small.mse["d"] / one.mse["d"]
    ref0 = reference_from_ner(1.0, 1.0, 0.0)
    ms0 = moment_set(WORKED_SIGNAL, ref0, DEFAULT_ANGLES)
    flagged = []
    try:
        estimate_mean(ms0, ref0)
    except Infeasible as exc:
        flagged.append(str(exc))
    est0 = estimate_general(ms0, ref0)
    try:
        run_mse(TrialConfig(delta=1.0, gamma=0.0, trials=2))
    except Infeasible:
        flagged.append("run_mse")
    ok = ratio >= 100 and len(flagged) == 2 and est0.feasibility != FULL
    record(5, "gamma divergence", ok,
           f"MSE(d) ratio gamma=1e-3 / gamma=1 = {ratio:.0f}; gamma=0 general -> {est0.feasibility} "
           f"({flagged[0] if flagged else 'no Infeasible raised'})")


def test_c06_saturation():
    lo, hi = sweep(TrialConfig(gamma=1.0, seed=SEED), "delta", [100.0, 1e4])
    ratios = {n: lo.mse[n] / hi.mse[n] for n in PARAMS}
    ok = all(0.5 <= r <= 2.0 for r in ratios.values())
    record(6, "saturation", ok,
           "MSE(delta=100)/MSE(delta=1e4) " + ", ".join(f"{n} {r:.2f}" for n, r in ratios.items()))


def test_c07_small_ner_crossover():
    half, one = sweep(TrialConfig(delta=0.1, seed=SEED), "gamma", [0.5, 1.0])
    seps = {n: (one.mse[n] - half.mse[n]) / math.hypot(one.mse_err[n], half.mse_err[n]) for n in ("b", "c")}
    ok = all(s >= 2.0 for s in seps.values())
    record(7, "small-delta crossover", ok,
           ", ".join(f"{n}: {half.mse[n]:.4g} (gamma=0.5) vs {one.mse[n]:.4g} (gamma=1), {seps[n]:.1f} SE"
                     for n in ("b", "c")))


def test_c08_convergence_coverage():
    frac, _ = coverage(TrialConfig(delta=10.0, gamma=1.0, n_states=100_000, trials=100, seed=SEED), k=3.0)
    record(8, "convergence", frac >= 0.95,
           f"{frac:.0%} of 100 trials have all five estimates within 3 SE at N=1e5")


def test_c09_indistinguishability():
    rep = indistinguishability_demo()
    ok = rep.reference.d == 0.0 and rep.reference.q > 1.0 and rep.max_relative_difference <= 1e-3
    record(9, "indistinguishability", ok,
           f"max relative difference {rep.max_relative_difference:.1e} over S2^2(0,pi/4,pi/2), S0, S0^2, "
           "b^2+c^2, d^2")


def test_c10_special_cases():
    errs = {}
    sq_ref = reference_from_ner(1.0, 10.0, 0.0)
    s = GaussianParams.from_eigen(237.0, 86.0, 0.7)
    est = estimate_squeezed_signal(moment_set(s, sq_ref, DEFAULT_ANGLES), sq_ref)
    errs["squeezed"] = max(_rel(est.b, 237), _rel(est.c, 86), _rel(est.alpha, 0.7), abs(est.d))

    s = GaussianParams.from_eigen(86.0, 86.0, 0.0, 158.0, 0.2)
    est = estimate_displaced_symmetric(moment_set(s, sq_ref, DEFAULT_ANGLES), sq_ref)
    # with an undisplaced reference the direction is only defined modulo pi
    errs["displaced_symmetric"] = max(_rel(est.b, 86), _rel(est.d, 158),
                                      abs(angle_difference(est.beta, 0.2, math.pi)) / 0.2)

    th = ReferenceSpec(GaussianParams.thermal(1.5))
    energy = estimate_thermal_reference(moment_set(WORKED_SIGNAL, th, DEFAULT_ANGLES), th).energy
    errs["thermal energy"] = _rel(energy, 237**2 + 86**2 + 158**2)

    s = GaussianParams.from_eigen(237.0, 86.0, 0.7)
    est = estimate_gaussian_s02(moment_set(s, th, DEFAULT_ANGLES), th, "squeezed")
    unset = est.alpha is None and est.beta is None
    errs["s02 squeezed"] = max(_rel(est.b, 237), _rel(est.c, 86))
    s = GaussianParams.from_eigen(86.0, 86.0, 0.0, 158.0, 0.2)
    est = estimate_gaussian_s02(moment_set(s, th, DEFAULT_ANGLES), th, "displaced_symmetric")
    unset = unset and est.alpha is None and est.beta is None
    errs["s02 displaced"] = max(_rel(est.b, 86), _rel(est.d, 158))
    ok = all(e <= 1e-9 for e in errs.values()) and unset
    record(10, "special cases", ok,
           ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + f", directions unset: {unset}")


def test_c11_homodyne_limit():
    rep = homodyne_limit_check(WORKED_SIGNAL, [1e2, 1e3, 1e4])
    dev4 = max(rep.deviation(1e4, p) for p in DEFAULT_ANGLES)
    ratios = [rep.deviation(a, p) / rep.deviation(b, p)
              for a, b in ((1e2, 1e3), (1e3, 1e4)) for p in DEFAULT_ANGLES]
    ok = dev4 < 0.01 and all(abs(r / 100 - 1) < 0.05 for r in ratios)
    record(11, "homodyne limit", ok,
           f"max deviation at d_R=1e4 {dev4:.1e}; decade ratios {min(ratios):.1f}..{max(ratios):.1f}")


def test_c12_throughput():
    ref = reference_from_ner(1.0, 10.0, 1.0)
    t0 = time.perf_counter()
    ms = sample_moment_set(WORKED_SIGNAL, ref, DEFAULT_ANGLES, 100_000_000, seed=SEED)
    elapsed = time.perf_counter() - t0
    n = sum(e.n for e in ms.entries)
    record(12, "throughput", n == 100_000_000 and elapsed <= 60,
           f"{n:.0e} shots sampled and folded in {elapsed:.1f}s on this machine (single core)")


if __name__ == "__main__":
    warnings.simplefilter("ignore")
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_c")):
        try:
            fn()
        except AssertionError:
            pass
    print()
    print("\n".join(RESULTS[k] for k in sorted(RESULTS)))
