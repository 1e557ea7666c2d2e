"""Single-mode Gaussian states in eigen and moment form.

Quadratures follow x = a + a^dag, p = -i(a - a^dag), so [x, p] = 2i and the
vacuum has unit variance.  A state is described either by

* ``GaussianParams``: thermal width ``r``, squeezing ``q`` along ``alpha`` and a
  displacement of length ``d`` along ``beta``; ``b = r*q`` and ``c = r/q`` are
  the standard deviations along the principal axes.
* ``MomentForm``: the mean vector and the symmetrised 2x2 covariance matrix.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# relative gap below which the two covariance eigenvalues count as equal
EIGEN_TIE_RTOL = 1e-14


class NonPositiveVariance(ValueError):
    pass


class InvalidRatio(ValueError):
    pass


def wrap_angle(theta: float, period: float) -> float:
    """Reduce ``theta`` into ``[0, period)``."""
    out = math.fmod(theta, period)
    if out < 0.0:
        out += period
    # fmod can return ``period`` itself after the correction above
    if out >= period:
        out -= period
    return out


def angle_difference(a: float, b: float, period: float) -> float:
    """Signed difference a - b wrapped into ``[-period/2, period/2)``."""
    return wrap_angle(a - b + 0.5 * period, period) - 0.5 * period


@dataclass(frozen=True)
class GaussianParams:
    r: float
    q: float = 1.0
    alpha: float = 0.0
    d: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if not self.r > 0.0:
            raise ValueError(f"thermal width r must be positive, got {self.r}")
        if not self.q >= 1.0:
            raise ValueError(f"squeeze magnitude q must be >= 1, got {self.q}")
        if not self.d >= 0.0:
            raise ValueError(f"displacement d must be >= 0, got {self.d}")
        alpha = 0.0 if self.q == 1.0 else wrap_angle(float(self.alpha), math.pi)
        beta = 0.0 if self.d == 0.0 else wrap_angle(float(self.beta), TWO_PI)
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def from_eigen(cls, b: float, c: float, alpha: float = 0.0, d: float = 0.0,
                   beta: float = 0.0) -> "GaussianParams":
        """Build from principal standard deviations.

        ``b < c`` is accepted: the axes are swapped and ``alpha`` is turned by
        a quarter period so that ``alpha`` always points along the major axis.
        """
        if b <= 0.0 or c <= 0.0:
            raise NonPositiveVariance(f"principal widths must be positive, got b={b}, c={c}")
        if b < c:
            b, c = c, b
            alpha = alpha + 0.5 * math.pi
        q = 1.0 if b == c else math.sqrt(b / c)
        return cls(r=math.sqrt(b * c), q=q, alpha=alpha, d=d, beta=beta)

    @classmethod
    def vacuum(cls) -> "GaussianParams":
        return cls(r=1.0)

    @classmethod
    def coherent(cls, d: float, beta: float = 0.0) -> "GaussianParams":
        return cls(r=1.0, d=d, beta=beta)

    @classmethod
    def thermal(cls, r: float) -> "GaussianParams":
        return cls(r=r)

    @property
    def b(self) -> float:
        return self.r * self.q

    @property
    def c(self) -> float:
        return self.r / self.q

    @property
    def energy(self) -> float:
        """b^2 + c^2 + d^2, i.e. <x^2 + p^2>."""
        return self.b ** 2 + self.c ** 2 + self.d ** 2

    @property
    def mean_photons(self) -> float:
        return (self.energy - 2.0) / 4.0

    @property
    def physical(self) -> bool:
        return self.r >= 1.0 - 1e-12

    def moments(self) -> "MomentForm":
        return params_to_moments(self)


@dataclass(frozen=True)
class MomentForm:
    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    cov_xp: float

    @property
    def mean(self) -> np.ndarray:
        return np.array([self.mean_x, self.mean_p])

    @property
    def covariance(self) -> np.ndarray:
        return np.array([[self.var_x, self.cov_xp], [self.cov_xp, self.var_p]])

    @property
    def determinant(self) -> float:
        return self.var_x * self.var_p - self.cov_xp ** 2

    @property
    def heisenberg_ok(self) -> bool:
        return self.determinant >= 1.0 - 1e-12

    @property
    def second_x(self) -> float:
        return self.var_x + self.mean_x ** 2

    @property
    def second_p(self) -> float:
        return self.var_p + self.mean_p ** 2

    @property
    def second_xp(self) -> float:
        """Symmetrised <x p>_s."""
        return self.cov_xp + self.mean_x * self.mean_p

    def directional_second_moment(self, phi: float) -> float:
        """<(x cos phi + p sin phi)^2>."""
        cs, sn = math.cos(phi), math.sin(phi)
        return cs * cs * self.second_x + sn * sn * self.second_p + 2.0 * cs * sn * self.second_xp

    @classmethod
    def from_arrays(cls, mean, cov) -> "MomentForm":
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(cov, dtype=float)
        return cls(float(mean[0]), float(mean[1]), float(cov[0, 0]), float(cov[1, 1]),
                   0.5 * float(cov[0, 1] + cov[1, 0]))


def params_to_moments(s: GaussianParams) -> MomentForm:
    b2, c2 = s.b ** 2, s.c ** 2
    ca, sa = math.cos(s.alpha), math.sin(s.alpha)
    return MomentForm(
        mean_x=s.d * math.cos(s.beta),
        mean_p=s.d * math.sin(s.beta),
        var_x=b2 * ca * ca + c2 * sa * sa,
        var_p=b2 * sa * sa + c2 * ca * ca,
        cov_xp=(b2 - c2) * ca * sa,
    )


def covariance_eigen(var_x: float, var_p: float, cov_xp: float) -> tuple[float, float, float]:
    """Eigenvalues (larger, smaller) and major-axis angle of a 2x2 covariance.

    The angle lies in [0, pi) and is set to 0 when the eigenvalues tie.
    No positivity check is made; callers decide what a negative eigenvalue means.
    """
    half_sum = 0.5 * (var_x + var_p)
    half_diff = 0.5 * (var_x - var_p)
    radius = math.hypot(half_diff, cov_xp)
    lam_big = half_sum + radius
    # smaller eigenvalue through the determinant avoids cancellation
    det = var_x * var_p - cov_xp * cov_xp
    if lam_big > 0.0 and half_sum > 0.0:
        lam_small = det / lam_big
    else:
        lam_small = half_sum - radius
    scale = max(abs(var_x), abs(var_p), abs(cov_xp))
    if radius <= EIGEN_TIE_RTOL * scale:
        return half_sum, half_sum, 0.0
    alpha = wrap_angle(0.5 * math.atan2(2.0 * cov_xp, var_x - var_p), math.pi)
    return lam_big, lam_small, alpha


def moments_to_params(m: MomentForm) -> GaussianParams:
    if m.var_x <= 0.0 or m.var_p <= 0.0:
        raise NonPositiveVariance(f"variances must be positive: var_x={m.var_x}, var_p={m.var_p}")
    lam_big, lam_small, alpha = covariance_eigen(m.var_x, m.var_p, m.cov_xp)
    if lam_small <= 0.0:
        raise NonPositiveVariance(f"covariance is not positive definite (eigenvalue {lam_small})")
    d = math.hypot(m.mean_x, m.mean_p)
    beta = math.atan2(m.mean_p, m.mean_x) if d > 0.0 else 0.0
    b, c = math.sqrt(lam_big), math.sqrt(lam_small)
    q = 1.0 if lam_big == lam_small else math.sqrt(b / c)
    return GaussianParams(r=math.sqrt(b * c), q=q, alpha=alpha, d=d, beta=beta)


def rotate(s: GaussianParams, phi: float) -> GaussianParams:
    """Express ``s`` in a frame turned by ``phi``.

    New quadratures are x' = x cos(phi) + p sin(phi), p' = -x sin(phi) + p cos(phi),
    so both the squeezing and displacement directions decrease by ``phi``.
    """
    return GaussianParams(r=s.r, q=s.q, alpha=s.alpha - phi, d=s.d, beta=s.beta - phi)


def rotate_moments(m: MomentForm, phi: float) -> MomentForm:
    cs, sn = math.cos(phi), math.sin(phi)
    rot = np.array([[cs, sn], [-sn, cs]])
    return MomentForm.from_arrays(rot @ m.mean, rot @ m.covariance @ rot.T)


@dataclass(frozen=True)
class ReferenceSpec:
    """A reference whose squeezing and displacement both point along x."""

    params: GaussianParams

    def __post_init__(self):
        if self.params.alpha != 0.0 or self.params.beta != 0.0:
            raise ValueError("reference must have alpha = beta = 0 (it defines the phase origin)")

    @classmethod
    def from_eigen(cls, b: float, c: float, d: float = 0.0) -> "ReferenceSpec":
        if b < c:
            raise ValueError("reference needs b >= c so that its major axis lies along x")
        return cls(GaussianParams.from_eigen(b, c, 0.0, d, 0.0))

    @property
    def classical(self) -> bool:
        return self.c >= 1.0 - 1e-12

    @property
    def b(self) -> float:
        return self.params.b

    @property
    def c(self) -> float:
        return self.params.c

    @property
    def d(self) -> float:
        return self.params.d

    @property
    def r(self) -> float:
        return self.params.r

    @property
    def q(self) -> float:
        return self.params.q

    @property
    def thermal(self) -> bool:
        return self.d == 0.0 and self.q == 1.0


@dataclass(frozen=True)
class NERDecomposition:
    delta: float
    gamma: float | None
    delta_disp: float
    delta_sq: float


def ner(ref: ReferenceSpec | GaussianParams) -> NERDecomposition:
    """Non-equilibrium energy ratio of a reference and its split.

    Energies are <x^2 + p^2>/4 including the vacuum contribution; with that
    accounting the displacement and squeezing parts add up exactly.
    """
    s = ref.params if isinstance(ref, ReferenceSpec) else ref
    delta_disp = 0.5 * s.d ** 2 / s.r ** 2
    delta_sq = 0.5 * (s.q - 1.0 / s.q) ** 2
    delta = delta_disp + delta_sq
    gamma = delta_disp / delta if delta > 0.0 else None
    return NERDecomposition(delta=delta, gamma=gamma, delta_disp=delta_disp, delta_sq=delta_sq)


def reference_from_ner(r: float, delta: float, gamma: float) -> ReferenceSpec:
    if not 0.0 <= gamma <= 1.0:
        raise InvalidRatio(f"displacement ratio gamma must lie in [0, 1], got {gamma}")
    if delta < 0.0:
        raise InvalidRatio(f"NER must be non-negative, got {delta}")
    d = r * math.sqrt(2.0 * gamma * delta)
    s = math.sqrt(2.0 * (1.0 - gamma) * delta)
    q = 0.5 * (s + math.sqrt(s * s + 4.0))
    return ReferenceSpec(GaussianParams(r=r, q=q, d=d))


# --- plain-text records -------------------------------------------------------

_PI_FORM = re.compile(r"^\s*(?P<sign>[-+]?)\s*(?P<num>[0-9.eE+-]*)\s*\*?\s*pi\s*(?:/\s*(?P<den>[0-9.eE+-]+))?\s*$")


def parse_float(text: str) -> float:
    """Float parser that also accepts multiples of pi, e.g. ``pi/4`` or ``3pi/2``."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    m = _PI_FORM.match(text)
    if not m:
        raise ValueError(f"cannot parse number {text!r}")
    num = float(m.group("num")) if m.group("num") else 1.0
    den = float(m.group("den")) if m.group("den") else 1.0
    sign = -1.0 if m.group("sign") == "-" else 1.0
    return sign * num * math.pi / den


def parse_record(text: str) -> dict[str, float]:
    """Parse ``key=value`` pairs separated by commas or newlines; ``#`` starts a comment."""
    out: dict[str, float] = {}
    for raw in re.split(r"[,\n]", text):
        item = raw.split("#", 1)[0].strip()
        if not item:
            continue
        if "=" not in item:
            raise ValueError(f"expected key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        if key in out:
            raise ValueError(f"duplicate key {key!r}")
        out[key] = parse_float(value)
    return out


_STATE_KEYS = {"r", "q", "b", "c", "alpha", "d", "beta"}


def state_from_record(rec: dict[str, float] | str) -> GaussianParams:
    if isinstance(rec, str):
        rec = parse_record(rec)
    unknown = set(rec) - _STATE_KEYS
    if unknown:
        raise ValueError(f"unknown state keys: {sorted(unknown)}")
    eigen = "b" in rec or "c" in rec
    thermal = "r" in rec or "q" in rec
    if eigen and thermal:
        raise ValueError("give either (r, q) or (b, c), not both")
    alpha, d, beta = rec.get("alpha", 0.0), rec.get("d", 0.0), rec.get("beta", 0.0)
    if eigen:
        if "b" not in rec or "c" not in rec:
            raise ValueError("eigen form needs both b and c")
        return GaussianParams.from_eigen(rec["b"], rec["c"], alpha, d, beta)
    return GaussianParams(r=rec.get("r", 1.0), q=rec.get("q", 1.0), alpha=alpha, d=d, beta=beta)


def reference_from_record(rec: dict[str, float] | str) -> ReferenceSpec:
    """Reference from either an NER triple (r, delta, gamma) or a state record."""
    if isinstance(rec, str):
        rec = parse_record(rec)
    if "delta" in rec or "gamma" in rec:
        unknown = set(rec) - {"r", "delta", "gamma"}
        if unknown:
            raise ValueError(f"NER reference accepts r, delta, gamma only; got extra {sorted(unknown)}")
        return reference_from_ner(rec.get("r", 1.0), rec.get("delta", 0.0), rec.get("gamma", 1.0))
    return ReferenceSpec(state_from_record(rec))


def state_to_record(s: GaussianParams, eigen: bool = False) -> str:
    if eigen:
        keys = [("b", s.b), ("c", s.c)]
    else:
        keys = [("r", s.r), ("q", s.q)]
    keys += [("alpha", s.alpha), ("d", s.d), ("beta", s.beta)]
    return ",".join(f"{k}={v!r}" for k, v in keys)
