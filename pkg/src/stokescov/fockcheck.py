"""Brute-force number-basis oracle for the Stokes moments.

States are built as displaced squeezed thermal density matrices in a truncated
Fock space; the Stokes observables are assembled from truncated ladder
operators.  Nothing here uses the closed-form moment formulas, which is what
makes it usable for pinning the ordering constants in :mod:`stokescov.moments`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.linalg import expm

from . import moments
from .moments import OrderingConstants
from .states import GaussianParams, ReferenceSpec

DEFAULT_DIM = 60
DEFAULT_EPS = 1e-8
# extra levels used while applying squeeze/displacement, cropped afterwards
WORK_PAD = 40


class TruncationError(RuntimeError):
    pass


class DimensionMismatch(ValueError):
    pass


class CalibrationError(RuntimeError):
    pass


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def number(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def quadratures(dim: int) -> tuple[np.ndarray, np.ndarray]:
    a = annihilation(dim)
    ad = a.conj().T
    return a + ad, -1j * (a - ad)


@dataclass(frozen=True)
class TruncatedState:
    rho: np.ndarray

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def trace_deficit(self) -> float:
        return float(1.0 - np.trace(self.rho).real)

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(self.rho @ op))

    def rotated(self, phi: float) -> "TruncatedState":
        """Apply exp(i phi n): the mean amplitude picks up a factor exp(i phi)."""
        ph = np.exp(1j * phi * np.arange(self.dim))
        return TruncatedState(ph[:, None] * self.rho * ph.conj()[None, :])


def build_state(s: GaussianParams, dim: int = DEFAULT_DIM, eps: float = DEFAULT_EPS,
                pad: int = WORK_PAD) -> TruncatedState:
    """Density matrix D(lam) S(zeta) rho_th S(zeta)^dag D(lam)^dag cropped to ``dim`` levels."""
    work = dim + pad
    nbar = 0.5 * (s.r ** 2 - 1.0)
    if nbar < -1e-12:
        raise ValueError(f"thermal width r={s.r} is below the vacuum value")
    n = np.arange(work)
    if nbar <= 0.0:
        pops = np.zeros(work)
        pops[0] = 1.0
    else:
        pops = np.exp(n * math.log(nbar) - (n + 1) * math.log1p(nbar))
    rho = np.diag(pops).astype(complex)
    a = annihilation(work)
    ad = a.conj().T
    if s.q != 1.0:
        # S^dag a S = a cosh(t) - a^dag e^{i theta} sinh(t) with zeta = t e^{i theta};
        # t = -ln q, theta = 2 alpha stretches the axis at angle alpha by q
        zeta = -math.log(s.q) * np.exp(2j * s.alpha)
        sq = expm(0.5 * (np.conj(zeta) * a @ a - zeta * ad @ ad))
        rho = sq @ rho @ sq.conj().T
    if s.d != 0.0:
        lam = 0.5 * s.d * np.exp(1j * s.beta)
        disp = expm(lam * ad - np.conj(lam) * a)
        rho = disp @ rho @ disp.conj().T
    rho = rho[:dim, :dim]
    rho = 0.5 * (rho + rho.conj().T)
    out = TruncatedState(rho)
    if out.trace_deficit >= eps:
        raise TruncationError(
            f"trace deficit {out.trace_deficit:.3e} >= {eps:.1e} at dim={dim}; increase the cutoff")
    return out


@dataclass(frozen=True)
class StokesExpectations:
    mean_s2: float
    second_s2: float
    mean_s0: float
    second_s0: float
    max_imag: float = 0.0


def stokes_expectations(signal: TruncatedState, ref: TruncatedState, phi: float,
                        dense: bool = False) -> StokesExpectations:
    """Exact truncated-space traces of S2(phi), S2(phi)^2, S0 and S0^2.

    S2 = (x_S x_R + p_S p_R)/2 with the reference state phase shifted by ``phi``.
    By default the traces use tr[(A x B)(rho x sigma)] = tr(A rho) tr(B sigma);
    ``dense=True`` assembles the full product-space matrices instead.
    """
    if signal.dim != ref.dim:
        raise DimensionMismatch(f"signal dim {signal.dim} != reference dim {ref.dim}")
    dim = signal.dim
    ref_phi = ref.rotated(phi)
    x, p = quadratures(dim)
    nop = number(dim)
    if dense:
        eye = np.eye(dim)
        rho = np.kron(signal.rho, ref_phi.rho)
        s2 = 0.5 * (np.kron(x, x) + np.kron(p, p))
        s0 = np.kron(nop, eye) + np.kron(eye, nop)
        vals = [np.trace(rho @ op) for op in (s2, s2 @ s2, s0, s0 @ s0)]
    else:
        quads = (x, p)
        ms = [signal.expect(o) for o in quads]
        mr = [ref_phi.expect(o) for o in quads]
        mean2 = 0.5 * (ms[0] * mr[0] + ms[1] * mr[1])
        sec2 = 0.25 * sum(signal.expect(oi @ oj) * ref_phi.expect(oi @ oj)
                          for oi, oj in product(quads, quads))
        ns, nr = signal.expect(nop), ref_phi.expect(nop)
        # identity factors carry the other mode's (truncated) trace
        ts, tr = np.trace(signal.rho), np.trace(ref_phi.rho)
        mean0 = ns * tr + nr * ts
        sec0 = signal.expect(nop @ nop) * tr + 2.0 * ns * nr + ref_phi.expect(nop @ nop) * ts
        vals = [mean2, sec2, mean0, sec0]
    imag = max(abs(complex(v).imag) for v in vals)
    return StokesExpectations(*(float(complex(v).real) for v in vals), max_imag=imag)


def quadrature_moments(state: TruncatedState) -> tuple[float, float, float, float, float]:
    """(mean_x, mean_p, var_x, var_p, cov_xp) of a truncated state."""
    x, p = quadratures(state.dim)
    mx, mp = state.expect(x).real, state.expect(p).real
    xx, pp = state.expect(x @ x).real, state.expect(p @ p).real
    xp = 0.5 * (state.expect(x @ p) + state.expect(p @ x)).real
    return mx, mp, xx - mx * mx, pp - mp * mp, xp - mx * mp


# --- calibration ---------------------------------------------------------------

def kappa_grid() -> list[GaussianParams]:
    """Low-energy states whose number-basis tails are negligible at 60 levels."""
    states = [GaussianParams.vacuum()]
    states += [GaussianParams.coherent(d, beta) for d, beta in ((1.0, 0.0), (1.5, 0.9), (2.0, 2.2))]
    states += [GaussianParams.thermal(r) for r in (1.5, 2.0)]
    return states


def validation_grid() -> list[GaussianParams]:
    """At least 20 states with b, c <= 2.5 and d <= 2, including squeezed ones."""
    grid = []
    for b, c in ((1.0, 1.0), (1.5, 1.5), (2.0, 1.0), (2.5, 1.0), (2.0, 0.6), (2.5, 0.5),
                 (2.2, 1.8), (1.2, 0.9)):
        for d, alpha, beta in ((0.0, 0.3, 0.0), (1.0, 1.1, 2.0), (2.0, 2.5, 4.0)):
            grid.append(GaussianParams.from_eigen(b, c, alpha, d, beta))
    return grid


def validation_references() -> list[ReferenceSpec]:
    return [
        ReferenceSpec(GaussianParams.vacuum()),
        ReferenceSpec(GaussianParams.coherent(2.0)),
        ReferenceSpec(GaussianParams.thermal(1.5)),
        ReferenceSpec.from_eigen(2.0, 1.0, 0.0),
        ReferenceSpec.from_eigen(1.6, 1.2, 1.5),
    ]


def relative_error(value: float, oracle: float) -> float:
    """|value - oracle| scaled by max(|oracle|, 1) so that zero moments stay meaningful."""
    return abs(value - oracle) / max(abs(oracle), 1.0)


@dataclass
class CalibrationReport:
    constants: OrderingConstants
    kappa2_spread: float
    s0_spread: float
    dims: tuple[int, ...]
    dim_shift: float
    n_states: int
    n_references: int
    max_relative_error: float
    reference_terms: dict[float, float]
    vacuum_coherent_s2: float
    tolerance: float
    moment_tolerance: float
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (self.kappa2_spread <= self.tolerance and self.s0_spread <= self.tolerance
                and self.dim_shift <= self.tolerance
                and self.max_relative_error <= self.moment_tolerance)

    def render(self, precise: bool = False) -> str:
        """Text report.  Noise-level numbers are shown as bounds unless ``precise``."""
        def bound(x: float, tol: float) -> str:
            if precise:
                return f"{x:.3e}"
            return f"<= {tol:.0e}" if x <= tol else f"{x:.3e} (FAIL)"

        lines = [
            "stokescov ordering calibration",
            f"dims: {', '.join(str(d) for d in self.dims)}",
            f"kappa2: {self.constants.kappa2:.9f}",
            f"s0_per_mode: {self.constants.s0_per_mode:.9f}",
            f"s0_offset: {self.constants.s0_offset:.9f}",
            f"kappa2 residual: {bound(self.kappa2_spread, self.tolerance)}",
            f"s0 residual: {bound(self.s0_spread, self.tolerance)}",
            f"dim change shift: {bound(self.dim_shift, self.tolerance)}",
            f"vacuum x coherent(d_R=2) <S2^2(0)>: {self.vacuum_coherent_s2:.9f}",
            f"validation grid: {self.n_states} states x {self.n_references} references x 3 angles",
            f"max relative moment error: {bound(self.max_relative_error, self.moment_tolerance)}",
        ]
        for r, f in sorted(self.reference_terms.items()):
            lines.append(f"f(r_R={r:g}): {f:.9f}")
        lines.extend(self.notes)
        lines.append("status: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines) + "\n"


def _fit_offsets(dim: int) -> tuple[float, float, float, float]:
    """Mean and spread of the quantum-minus-Wigner residuals over the kappa grid."""
    grid = kappa_grid()
    built = {s: build_state(s, dim) for s in grid}
    k_res, s0_res = [], []
    for sig, rp in product(grid, grid):
        if rp.beta != 0.0:
            continue
        ref = ReferenceSpec(rp)
        for phi in (0.0, math.pi / 4, math.pi / 2, 1.0):
            ex = stokes_expectations(built[sig], built[rp], phi)
            k_res.append(ex.second_s2 - moments.second_s2(sig, ref, phi, ordering="wigner"))
            s0_res.append(ex.second_s0 - moments.second_s0(sig, ref, ordering="wigner"))
    k_res, s0_res = np.array(k_res), np.array(s0_res)
    return (float(k_res.mean()), float(np.ptp(k_res)), float(s0_res.mean()), float(np.ptp(s0_res)))


def calibrate_ordering(dim: int = DEFAULT_DIM, tolerance: float = 1e-9) -> OrderingConstants:
    kappa2, k_spread, s0_off, s_spread = _fit_offsets(dim)
    if k_spread > tolerance or s_spread > tolerance:
        raise CalibrationError(
            f"ordering residuals not constant: kappa2 spread {k_spread:.2e}, s0 spread {s_spread:.2e}")
    return OrderingConstants(kappa2=kappa2, s0_per_mode=0.5 * s0_off)


def validate(dim: int = DEFAULT_DIM, tolerance: float = 1e-9,
             moment_tolerance: float = 1e-6) -> CalibrationReport:
    """Full calibration run: fit at ``dim`` and ``dim + 20`` and check every moment on the grid."""
    kappa2, k_spread, s0_off, s_spread = _fit_offsets(dim)
    kappa2_b, _, s0_off_b, _ = _fit_offsets(dim + 20)
    constants = OrderingConstants(kappa2=kappa2, s0_per_mode=0.5 * s0_off)
    shift = max(abs(kappa2 - kappa2_b), abs(s0_off - s0_off_b))

    states = validation_grid()
    refs = validation_references()
    built = {s: build_state(s, dim) for s in states}
    built_refs = {r: build_state(r.params, dim) for r in refs}
    worst = 0.0
    for sig, ref in product(states, refs):
        for phi in moments.DEFAULT_ANGLES:
            ex = stokes_expectations(built[sig], built_refs[ref], phi)
            pairs = (
                (moments.mean_s2(sig, ref, phi), ex.mean_s2),
                (moments.second_s2(sig, ref, phi, constants=constants), ex.second_s2),
                (moments.mean_s0(sig, ref), ex.mean_s0),
                (moments.second_s0(sig, ref, constants=constants), ex.second_s0),
            )
            worst = max(worst, *(relative_error(a, f) for a, f in pairs))

    vac = build_state(GaussianParams.vacuum(), dim)
    coh = build_state(GaussianParams.coherent(2.0), dim)
    vc = stokes_expectations(vac, coh, 0.0).second_s2

    f_terms = {}
    for r in (1.0, 1.5, 2.0):
        th = build_state(GaussianParams.thermal(r), dim)
        # f(r_R) = <S0^2> - P(signal) - E_S (E_R - 4)/8 evaluated at vacuum signal, P(vac) = 1/2
        e_r = 2.0 * r * r
        f_terms[r] = stokes_expectations(vac, th, 0.0).second_s0 - 0.5 - 2.0 * (e_r - 4.0) / 8.0

    return CalibrationReport(
        constants=constants, kappa2_spread=k_spread, s0_spread=s_spread, dims=(dim, dim + 20),
        dim_shift=shift, n_states=len(states), n_references=len(refs), max_relative_error=worst,
        reference_terms=f_terms, vacuum_coherent_s2=vc, tolerance=tolerance,
        moment_tolerance=moment_tolerance,
    )
