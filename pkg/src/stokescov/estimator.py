"""Signal reconstruction from Stokes moments and a known reference.

All paths read the second moments through the measurement model

    <S2^2(phi)> = u (b^2 + c^2 + d^2) + v (b^2 - c^2) cos(2 alpha - 2 phi)
                  + v d^2 cos(2 beta - 2 phi) + kappa,

with ``kappa`` chosen from the moment set's ordering, so empirical Wigner
samples and analytic quantum moments are handled alike.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import moments
from .moments import ORDERING, OrderingConstants, StokesMomentSet
from .states import (GaussianParams, MomentForm, ReferenceSpec, angle_difference,
                     covariance_eigen, params_to_moments, wrap_angle)

FULL = "full"
SECOND_MOMENTS_ONLY = "second_moments_only"
ENERGY_ONLY = "energy_only"
ENERGY_PLUS_MAGNITUDES = "energy_plus_magnitudes"
INFEASIBLE = "infeasible"

EPS_FEAS = 1e-9
CONDITION_WARN = 1e-3
PARAMS = ("b", "c", "alpha", "d", "beta")
ANGLE_PERIODS = {"alpha": math.pi, "beta": 2.0 * math.pi}


class Infeasible(ValueError):
    """The reference cannot resolve the requested quantities."""


class NegativeEnergy(ValueError):
    pass


class NoRealSolution(ValueError):
    pass


class AmbiguousSolution(ValueError):
    def __init__(self, message: str, candidates: list["SignalEstimate"]):
        super().__init__(message)
        self.candidates = candidates


class ConditionWarning(UserWarning):
    pass


class DegenerateShapeWarning(UserWarning):
    pass


@dataclass
class SignalEstimate:
    feasibility: str
    mean_x: float | None = None
    mean_p: float | None = None
    var_x: float | None = None
    var_p: float | None = None
    cov_xp: float | None = None
    second_x: float | None = None
    second_p: float | None = None
    second_xp: float | None = None
    b: float | None = None
    c: float | None = None
    alpha: float | None = None
    d: float | None = None
    beta: float | None = None
    energy: float | None = None
    physical: bool | None = None
    warnings: list[str] = field(default_factory=list)
    stderr: dict[str, float] | None = None
    path: str = ""

    def moment_form(self) -> MomentForm:
        return MomentForm(self.mean_x, self.mean_p, self.var_x, self.var_p, self.cov_xp)

    def params(self) -> GaussianParams:
        return GaussianParams.from_eigen(self.b, self.c, self.alpha, self.d, self.beta)

    def value(self, name: str) -> float | None:
        return getattr(self, name)

    def to_record(self) -> str:
        keys = ["feasibility", "path", "mean_x", "mean_p", "var_x", "var_p", "cov_xp",
                "second_x", "second_p", "second_xp",
                "b", "c", "alpha", "d", "beta", "energy", "physical"]
        lines = []
        for k in keys:
            v = getattr(self, k)
            if v is None:
                continue
            lines.append(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}")
        for k, v in (self.stderr or {}).items():
            lines.append(f"stderr_{k}={v!r}")
        for w in self.warnings:
            lines.append(f"warning={w}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EstimatorCoefficients:
    u: float
    v: float
    kappa2: float

    @classmethod
    def for_reference(cls, ref: ReferenceSpec, ordering: str = "quantum",
                      constants: OrderingConstants = ORDERING) -> "EstimatorCoefficients":
        u, v = moments.s2_coefficients(ref)
        return cls(u, v, constants.kappa2 if ordering == "quantum" else 0.0)

    def w_offset(self, d: float, beta: float, phi: float) -> float:
        """Displacement part of <S2^2(phi)> plus the ordering constant."""
        return self.u * d * d + self.v * d * d * math.cos(2.0 * beta - 2.0 * phi) + self.kappa2


def _s0_offset(ms: StokesMomentSet, constants: OrderingConstants) -> float:
    return constants.s0_offset if ms.ordering == "quantum" else 0.0


def _require_angles(ms: StokesMomentSet, angles) -> None:
    missing = [a for a in angles if not ms.has_angle(a)]
    if missing:
        raise ValueError(f"moment set lacks angles {missing}; have {ms.angles}")


def displacement_feasible(ref: ReferenceSpec) -> bool:
    return ref.d ** 2 >= EPS_FEAS * (ref.b ** 2 + ref.c ** 2)


def shape_feasible(ref: ReferenceSpec) -> bool:
    u, v = moments.s2_coefficients(ref)
    return abs(v) >= EPS_FEAS * u


def _condition_check(ref: ReferenceSpec, notes: list[str]) -> None:
    u, v = moments.s2_coefficients(ref)
    if abs(v) < CONDITION_WARN * u:
        msg = f"near-thermal reference (v/u = {v / u:.2e}); second-moment noise is amplified"
        warnings.warn(msg, ConditionWarning, stacklevel=3)
        notes.append(msg)


def estimate_mean(ms: StokesMomentSet, ref: ReferenceSpec) -> tuple[float, float]:
    if not displacement_feasible(ref):
        raise Infeasible(f"reference is not displaced: d_R = {ref.d:g}; the mean of S2 vanishes")
    _require_angles(ms, (0.0, math.pi / 2))
    return (2.0 * ms.entry(0.0).mean_s2 / ref.d,
            2.0 * ms.entry(math.pi / 2).mean_s2 / ref.d)


def estimate_second_moments(ms: StokesMomentSet, ref: ReferenceSpec,
                            constants: OrderingConstants = ORDERING,
                            _notes: list[str] | None = None) -> tuple[float, float, float]:
    """Solve for (<x^2>, <p^2>, <xp>_s) from the three angles."""
    if not shape_feasible(ref):
        raise Infeasible("reference is thermal: v = 0")
    _condition_check(ref, _notes if _notes is not None else [])
    _require_angles(ms, moments.DEFAULT_ANGLES)
    co = EstimatorCoefficients.for_reference(ref, ms.ordering, constants)
    u, v, k = co.u, co.v, co.kappa2
    y0 = ms.entry(0.0).second_s2 - k
    y90 = ms.entry(math.pi / 2).second_s2 - k
    y45 = ms.entry(math.pi / 4).second_s2 - k
    # [[u+v, u-v], [u-v, u+v]] has determinant 4uv; sum and difference decouple
    total = (y0 + y90) / (2.0 * u)
    diff = (y0 - y90) / (2.0 * v)
    xx = 0.5 * (total + diff)
    pp = 0.5 * (total - diff)
    xp = (y45 - u * total) / (2.0 * v)
    return xx, pp, xp


def _signed_sqrt(x: float) -> float:
    return math.copysign(math.sqrt(abs(x)), x)


def _fill_eigen(est: SignalEstimate) -> SignalEstimate:
    """Eigen form from the moment form; negative eigenvalues give negative widths."""
    lam_big, lam_small, alpha = covariance_eigen(est.var_x, est.var_p, est.cov_xp)
    est.b, est.c, est.alpha = _signed_sqrt(lam_big), _signed_sqrt(lam_small), alpha
    if est.mean_x is not None:
        est.d = math.hypot(est.mean_x, est.mean_p)
        est.beta = wrap_angle(math.atan2(est.mean_p, est.mean_x), 2.0 * math.pi) if est.d > 0 else 0.0
    det = est.var_x * est.var_p - est.cov_xp ** 2
    est.physical = lam_small > 0.0 and det >= 1.0 - 1e-9
    if not est.physical:
        est.warnings.append(f"estimate violates the Heisenberg bound (det V = {det:.4g})")
    return est


def estimate_general(ms: StokesMomentSet, ref: ReferenceSpec,
                     constants: OrderingConstants = ORDERING) -> SignalEstimate:
    notes: list[str] = []
    mean = None
    second = None
    try:
        mean = estimate_mean(ms, ref)
    except Infeasible as exc:
        notes.append(str(exc))
    try:
        second = estimate_second_moments(ms, ref, constants, notes)
    except Infeasible as exc:
        notes.append(str(exc))
    if second is None:
        raise Infeasible("; ".join(notes))
    xx, pp, xp = second
    if mean is None:
        return SignalEstimate(SECOND_MOMENTS_ONLY, second_x=xx, second_p=pp, second_xp=xp,
                              energy=xx + pp, warnings=notes, path="general")
    mx, mp = mean
    est = SignalEstimate(FULL, mean_x=mx, mean_p=mp, var_x=xx - mx * mx, var_p=pp - mp * mp,
                         cov_xp=xp - mx * mp, second_x=xx, second_p=pp, second_xp=xp,
                         energy=xx + pp, warnings=notes, path="general")
    return _fill_eigen(est)


def _cosine_fit(a0: float, a90: float, a45: float, u: float, v: float):
    """Invert A0, A90, A45 = u S + v D cos(2t - 2phi) for (S, D, t), t in [0, pi)."""
    total = (a0 + a90) / (2.0 * u)
    cos_part = 0.5 * (a0 - a90)
    sin_part = a45 - 0.5 * (a0 + a90)
    amp = math.hypot(cos_part, sin_part) / v
    scale = max(abs(a0), abs(a90), abs(a45), 1e-300)
    if amp * abs(v) <= 1e-13 * scale:
        return total, 0.0, 0.0, True
    angle = wrap_angle(0.5 * math.atan2(sin_part, cos_part), math.pi)
    return total, amp, angle, False


def estimate_cosine_fit(ms: StokesMomentSet, ref: ReferenceSpec,
                        constants: OrderingConstants = ORDERING) -> SignalEstimate:
    """Eigen-form route: total energy, asymmetry and direction of the S2^2 cosine."""
    if not shape_feasible(ref):
        raise Infeasible("reference is thermal: v = 0")
    notes: list[str] = []
    _condition_check(ref, notes)
    mx, mp = estimate_mean(ms, ref)
    _require_angles(ms, moments.DEFAULT_ANGLES)
    d = math.hypot(mx, mp)
    beta = wrap_angle(math.atan2(mp, mx), 2.0 * math.pi) if d > 0 else 0.0
    co = EstimatorCoefficients.for_reference(ref, ms.ordering, constants)
    a = [ms.entry(phi).second_s2 - co.w_offset(d, beta, phi) for phi in moments.DEFAULT_ANGLES]
    total, amp, alpha, degenerate = _cosine_fit(a[0], a[2], a[1], co.u, co.v)
    if degenerate:
        msg = "fitted shape amplitude is zero: b = c, alpha set to 0"
        warnings.warn(msg, DegenerateShapeWarning, stacklevel=2)
        notes.append(msg)
    b2, c2 = 0.5 * (total + amp), 0.5 * (total - amp)
    est = SignalEstimate(FULL, mean_x=mx, mean_p=mp, b=_signed_sqrt(b2), c=_signed_sqrt(c2),
                         alpha=alpha, d=d, beta=beta, energy=total + d * d, warnings=notes,
                         path="cosine_fit")
    ca, sa = math.cos(alpha), math.sin(alpha)
    est.var_x = b2 * ca * ca + c2 * sa * sa
    est.var_p = b2 * sa * sa + c2 * ca * ca
    est.cov_xp = (b2 - c2) * ca * sa
    est.second_x, est.second_p = est.var_x + mx * mx, est.var_p + mp * mp
    est.second_xp = est.cov_xp + mx * mp
    det = b2 * c2
    est.physical = c2 > 0.0 and det >= 1.0 - 1e-9
    if not est.physical:
        notes.append(f"estimate violates the Heisenberg bound (det V = {det:.4g})")
    return est


def estimate_squeezed_signal(ms: StokesMomentSet, ref: ReferenceSpec,
                             constants: OrderingConstants = ORDERING) -> SignalEstimate:
    """Signal known to be undisplaced: second moments are the covariance."""
    notes: list[str] = []
    xx, pp, xp = estimate_second_moments(ms, ref, constants, notes)
    est = SignalEstimate(FULL, mean_x=0.0, mean_p=0.0, var_x=xx, var_p=pp, cov_xp=xp,
                         second_x=xx, second_p=pp, second_xp=xp, energy=xx + pp,
                         warnings=notes, path="squeezed")
    _fill_eigen(est)
    est.d, est.beta = 0.0, 0.0
    return est


def estimate_displaced_symmetric(ms: StokesMomentSet, ref: ReferenceSpec,
                                 constants: OrderingConstants = ORDERING) -> SignalEstimate:
    """Signal known to have b = c = r_S: (r_S, d_S, beta_S) from the S2^2 cosine alone.

    The cosine fixes beta only modulo pi.  With a displaced reference the sign of
    the first moment along beta resolves it; otherwise beta is reported in [0, pi).
    """
    if not shape_feasible(ref):
        raise Infeasible("reference is thermal: v = 0")
    notes: list[str] = []
    _condition_check(ref, notes)
    _require_angles(ms, moments.DEFAULT_ANGLES)
    co = EstimatorCoefficients.for_reference(ref, ms.ordering, constants)
    a = [ms.entry(phi).second_s2 - co.kappa2 for phi in moments.DEFAULT_ANGLES]
    total, d2, beta, degenerate = _cosine_fit(a[0], a[2], a[1], co.u, co.v)
    if degenerate:
        notes.append("fitted displacement amplitude is zero: d = 0, beta set to 0")
    r2 = 0.5 * (total - d2)
    if r2 < -1e-9 * max(abs(total), 1.0):
        raise NegativeEnergy(f"fitted thermal variance r^2 = {r2:.4g} < 0")
    if displacement_feasible(ref) and d2 > 0.0 and ms.has_angle(0.0) and ms.has_angle(math.pi / 2):
        mx, mp = estimate_mean(ms, ref)
        if mx * math.cos(beta) + mp * math.sin(beta) < 0.0:
            beta += math.pi
    r = math.sqrt(max(r2, 0.0))
    d = math.sqrt(d2)
    est = SignalEstimate(FULL, b=r, c=r, alpha=0.0, d=d, beta=beta, energy=total, warnings=notes,
                         path="displaced_symmetric")
    est.mean_x, est.mean_p = d * math.cos(beta), d * math.sin(beta)
    est.var_x = est.var_p = r2
    est.cov_xp = 0.0
    est.physical = r2 >= 1.0 - 1e-9
    return est


def estimate_thermal_reference(ms: StokesMomentSet, ref: ReferenceSpec,
                               constants: OrderingConstants = ORDERING) -> SignalEstimate:
    """Only b^2 + c^2 + d^2 is reachable through <S0>."""
    rp = ref.params
    energy = 4.0 * (ms.mean_s0 + 1.0) - (rp.b ** 2 + rp.c ** 2 + rp.d ** 2)
    return SignalEstimate(ENERGY_ONLY, energy=energy, path="thermal_reference")


def _s0_signal_variance(ms: StokesMomentSet, ref: ReferenceSpec,
                        constants: OrderingConstants) -> tuple[float, float]:
    """(E_S, Var(n_S) in Wigner ordering) from <S0>, <S0^2> and the known reference."""
    energy = estimate_thermal_reference(ms, ref, constants).energy
    var_total = ms.second_s0 - ms.mean_s0 ** 2 - _s0_offset(ms, constants)
    var_ref = moments.photon_variance(ref.params, "wigner", constants)
    return energy, var_total - var_ref


def estimate_gaussian_s02(ms: StokesMomentSet, ref: ReferenceSpec, case: str,
                          constants: OrderingConstants = ORDERING,
                          rtol: float = 1e-9) -> SignalEstimate:
    """Magnitudes from <S0> and <S0^2> assuming a Gaussian signal.

    ``case="squeezed"`` (d_S = 0) returns (b, c); ``case="displaced_symmetric"``
    (b_S = c_S) returns (r, d).  Directions stay unset.
    """
    energy, var_w = _s0_signal_variance(ms, ref, constants)
    # Wigner-ordered Var(n) = (2 tr V^2 + 4 m.V.m) / 16
    if case == "squeezed":
        quartic = 8.0 * var_w  # b^4 + c^4
        disc = 2.0 * quartic - energy ** 2  # (b^2 - c^2)^2
        if disc < -rtol * energy ** 2:
            raise NoRealSolution(f"<S0^2> too small for any squeezed state (discriminant {disc:.4g})")
        root = math.sqrt(max(disc, 0.0))
        b2, c2 = 0.5 * (energy + root), 0.5 * (energy - root)
        if c2 <= 0.0:
            raise NoRealSolution(f"fitted c^2 = {c2:.4g} is not positive")
        b, c = math.sqrt(b2), math.sqrt(c2)
        return SignalEstimate(ENERGY_PLUS_MAGNITUDES, b=b, c=c, d=0.0, energy=energy,
                              physical=b * c >= 1.0 - 1e-9, path="s02_squeezed")
    if case == "displaced_symmetric":
        # 16 Var = 4 r^4 + 4 d^2 r^2 with d^2 = E - 2 r^2  ->  r^4 - E r^2 + 4 Var = 0
        k = 4.0 * var_w
        disc = energy ** 2 - 4.0 * k
        if disc < -rtol * energy ** 2:
            raise NoRealSolution(f"<S0^2> too large for any displaced thermal state (discriminant {disc:.4g})")
        root = math.sqrt(max(disc, 0.0))
        # the larger root r^2 = (E + root)/2 implies d^2 = -root; it only counts as a
        # solution when the discriminant is zero within tolerance, i.e. when a
        # vanishing displacement cannot be told apart from a small one
        roots = [0.5 * (energy - root)]
        if abs(disc) <= rtol * energy ** 2 and root > 0.0:
            roots.append(0.5 * (energy + root))
        candidates = []
        for r2 in roots:
            if r2 > 0.0:
                r, d = math.sqrt(r2), math.sqrt(max(energy - 2.0 * r2, 0.0))
                candidates.append(SignalEstimate(ENERGY_PLUS_MAGNITUDES, b=r, c=r, d=d,
                                                 energy=energy, physical=r >= 1.0 - 1e-9,
                                                 path="s02_displaced_symmetric"))
        if not candidates:
            raise NoRealSolution("no root with r^2 > 0 and d^2 >= 0")
        if len(candidates) > 1:
            raise AmbiguousSolution("displacement below resolution: both roots are admissible", candidates)
        return candidates[0]
    raise ValueError(f"case must be 'squeezed' or 'displaced_symmetric', got {case!r}")


def feasibility_check(ref: ReferenceSpec, assumptions: set[str] | frozenset = frozenset()) -> str:
    """Which estimation is available for this reference.

    ``assumptions`` may contain ``"squeezed"`` (d_S = 0), ``"displaced_symmetric"``
    (b_S = c_S) and ``"gaussian"``.
    """
    assumptions = set(assumptions)
    if displacement_feasible(ref):
        return FULL
    if shape_feasible(ref):
        if assumptions & {"squeezed", "displaced_symmetric"}:
            return FULL
        return SECOND_MOMENTS_ONLY
    if "gaussian" in assumptions and assumptions & {"squeezed", "displaced_symmetric"}:
        return ENERGY_PLUS_MAGNITUDES
    return ENERGY_ONLY


ESTIMATORS: dict[str, Callable[..., SignalEstimate]] = {
    "general": estimate_general,
    "cosine_fit": estimate_cosine_fit,
    "squeezed": estimate_squeezed_signal,
    "displaced_symmetric": estimate_displaced_symmetric,
    "thermal_reference": estimate_thermal_reference,
    "s02_squeezed": lambda ms, ref, constants=ORDERING: estimate_gaussian_s02(ms, ref, "squeezed", constants),
    "s02_displaced_symmetric": lambda ms, ref, constants=ORDERING: estimate_gaussian_s02(
        ms, ref, "displaced_symmetric", constants),
}


# --- delta-method standard errors -----------------------------------------------

def _moment_vector(ms: StokesMomentSet) -> tuple[np.ndarray, np.ndarray]:
    values, blocks = [], []
    for e in ms.entries:
        values += [e.mean_s2, e.second_s2]
        if e.cov is None:
            raise ValueError("standard errors need an empirical moment set with covariances")
        blocks.append(np.array([[e.cov[0], e.cov[1]], [e.cov[1], e.cov[2]]]))
    values += [ms.mean_s0, ms.second_s0]
    c = ms.s0_cov
    blocks.append(np.array([[c[0], c[1]], [c[1], c[2]]]))
    cov = np.zeros((len(values), len(values)))
    for i, blk in enumerate(blocks):
        cov[2 * i:2 * i + 2, 2 * i:2 * i + 2] = blk
    return np.array(values), cov


def _with_vector(ms: StokesMomentSet, vec: np.ndarray) -> StokesMomentSet:
    entries = tuple(replace(e, mean_s2=float(vec[2 * i]), second_s2=float(vec[2 * i + 1]))
                    for i, e in enumerate(ms.entries))
    return replace(ms, entries=entries, mean_s0=float(vec[-2]), second_s0=float(vec[-1]))


def with_standard_errors(estimator: Callable[..., SignalEstimate], ms: StokesMomentSet,
                         ref: ReferenceSpec, names=PARAMS,
                         constants: OrderingConstants = ORDERING) -> SignalEstimate:
    """Estimate plus delta-method standard errors from the moment covariances."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = estimator(ms, ref, constants)
        vec, cov = _moment_vector(ms)
        names = [n for n in names if est.value(n) is not None]
        jac = np.zeros((len(names), len(vec)))
        for j in range(len(vec)):
            sd = math.sqrt(cov[j, j])
            if sd == 0.0:
                continue
            h = 1e-3 * sd
            up, dn = vec.copy(), vec.copy()
            up[j] += h
            dn[j] -= h
            e_up, e_dn = estimator(_with_vector(ms, up), ref, constants), estimator(_with_vector(ms, dn), ref, constants)
            for i, n in enumerate(names):
                diff = e_up.value(n) - e_dn.value(n)
                if n in ANGLE_PERIODS:
                    diff = angle_difference(e_up.value(n), e_dn.value(n), ANGLE_PERIODS[n])
                jac[i, j] = diff / (2.0 * h)
    var = np.einsum("ij,jk,ik->i", jac, cov, jac)
    est.stderr = {n: float(math.sqrt(max(v, 0.0))) for n, v in zip(names, var)}
    return est


def parameter_errors(est: SignalEstimate, truth: GaussianParams, names=PARAMS) -> dict[str, float]:
    """Estimate minus truth; angles wrapped to their natural period."""
    out = {}
    for n in names:
        val = est.value(n)
        if val is None:
            continue
        ref_val = getattr(truth, n)
        if n in ANGLE_PERIODS:
            out[n] = angle_difference(val, ref_val, ANGLE_PERIODS[n])
        else:
            out[n] = val - ref_val
    return out


def analytic_check(signal: GaussianParams, ref: ReferenceSpec) -> SignalEstimate:
    """Convenience: general estimate on exact quantum moments."""
    return estimate_general(moments.moment_set(signal, ref, moments.DEFAULT_ANGLES), ref)
