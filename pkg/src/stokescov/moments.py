"""Exact expectation values of the Stokes observables.

The signal and reference are independent Gaussian states.  The reference is
always in canonical orientation (squeezing and displacement along x); a phase
shift ``phi`` of the reference is evaluated by expressing the signal in a frame
turned by ``phi``, which leaves S2 = (x_S x_R + p_S p_R)/2 unchanged.

Second moments come in two orderings.  ``"wigner"`` values are phase-space
averages over the Wigner functions (what a Wigner sampler reproduces);
``"quantum"`` values are the measured operator moments.  They differ by the
constants in :class:`OrderingConstants`.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .states import GaussianParams, ReferenceSpec, params_to_moments, rotate, wrap_angle

ORDERINGS = ("quantum", "wigner")


@dataclass(frozen=True)
class OrderingConstants:
    """Quantum-minus-Wigner offsets of the second moments.

    ``kappa2`` is added to the phase-space value of <S2^2(phi)>; each mode adds
    ``s0_per_mode`` to <S0^2>.  The values are pinned by the truncated Fock
    space check in :mod:`stokescov.fockcheck` (see ``tests/test_fockcheck.py``).
    """

    kappa2: float = -0.5
    s0_per_mode: float = -0.25

    @property
    def s0_offset(self) -> float:
        return 2.0 * self.s0_per_mode


ORDERING = OrderingConstants()


def _offsets(ordering: str, constants: OrderingConstants) -> tuple[float, float]:
    if ordering == "quantum":
        return constants.kappa2, constants.s0_offset
    if ordering == "wigner":
        return 0.0, 0.0
    raise ValueError(f"ordering must be one of {ORDERINGS}, got {ordering!r}")


def s2_coefficients(ref: ReferenceSpec) -> tuple[float, float]:
    """The (u, v) weights of the phase-insensitive and cosine parts of <S2^2>."""
    b2, c2, d2 = ref.b ** 2, ref.c ** 2, ref.d ** 2
    return (d2 + b2 + c2) / 8.0, (d2 + b2 - c2) / 8.0


def mean_s2(signal: GaussianParams, ref: ReferenceSpec, phi: float) -> float:
    m = params_to_moments(rotate(signal, phi))
    return 0.5 * m.mean_x * ref.d


def second_s2(signal: GaussianParams, ref: ReferenceSpec, phi: float,
              ordering: str = "quantum", constants: OrderingConstants = ORDERING) -> float:
    kappa2, _ = _offsets(ordering, constants)
    u, v = s2_coefficients(ref)
    b2, c2, d2 = signal.b ** 2, signal.c ** 2, signal.d ** 2
    return (u * (d2 + b2 + c2)
            + v * (b2 - c2) * math.cos(2.0 * signal.alpha - 2.0 * phi)
            + v * d2 * math.cos(2.0 * signal.beta - 2.0 * phi)
            + kappa2)


def mean_photons(s: GaussianParams) -> float:
    return (s.b ** 2 + s.c ** 2 + s.d ** 2) / 4.0 - 0.5


def photon_variance(s: GaussianParams, ordering: str = "quantum",
                    constants: OrderingConstants = ORDERING) -> float:
    """Variance of n = (x^2 + p^2 - 2)/4 for a Gaussian state.

    Gaussian moment factorisation gives Var(z.z) = 2 tr(V^2) + 4 m.V.m for the
    phase-space vector z; the quantum value adds the per-mode ordering offset.
    """
    m = params_to_moments(s)
    tr_v2 = s.b ** 4 + s.c ** 4
    mvm = (m.var_x * m.mean_x ** 2 + m.var_p * m.mean_p ** 2
           + 2.0 * m.cov_xp * m.mean_x * m.mean_p)
    wig = (2.0 * tr_v2 + 4.0 * mvm) / 16.0
    return wig + (constants.s0_per_mode if ordering == "quantum" else 0.0)


def mean_s0(signal: GaussianParams, ref: ReferenceSpec) -> float:
    rp = ref.params if isinstance(ref, ReferenceSpec) else ref
    return ((signal.b ** 2 + signal.c ** 2 + signal.d ** 2) / 4.0
            + (rp.b ** 2 + rp.c ** 2 + rp.d ** 2) / 4.0 - 1.0)


def second_s0(signal: GaussianParams, ref: ReferenceSpec, ordering: str = "quantum",
              constants: OrderingConstants = ORDERING) -> float:
    _offsets(ordering, constants)
    rp = ref.params if isinstance(ref, ReferenceSpec) else ref
    return (photon_variance(signal, ordering, constants)
            + photon_variance(rp, ordering, constants)
            + mean_s0(signal, ref) ** 2)


def reference_s0_term(ref: ReferenceSpec, constants: OrderingConstants = ORDERING) -> float:
    """Signal-independent part f of <S0^2> = P(signal) + E_S (E_R - 4)/8 + f.

    For a thermal reference of width r this equals (r^2 - 1)^2 / 2 and vanishes
    for the vacuum.
    """
    n_r = mean_photons(ref.params)
    return photon_variance(ref.params, "quantum", constants) + n_r * n_r - n_r


@dataclass(frozen=True)
class MomentEntry:
    phi: float
    mean_s2: float
    second_s2: float
    # sampling covariance of (mean_s2, second_s2) estimates: var_mean, cov, var_second
    cov: tuple[float, float, float] | None = None
    n: int | None = None

    @property
    def se_mean(self) -> float | None:
        return None if self.cov is None else math.sqrt(self.cov[0])

    @property
    def se_second(self) -> float | None:
        return None if self.cov is None else math.sqrt(self.cov[2])


@dataclass(frozen=True)
class StokesMomentSet:
    entries: tuple[MomentEntry, ...]
    mean_s0: float
    second_s0: float
    provenance: str = "analytic"
    ordering: str = "quantum"
    s0_cov: tuple[float, float, float] | None = None
    s0_n: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.provenance not in ("analytic", "empirical"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"unknown ordering {self.ordering!r}")
        object.__setattr__(self, "entries", tuple(self.entries))

    @property
    def angles(self) -> list[float]:
        return [e.phi for e in self.entries]

    def entry(self, phi: float, atol: float = 1e-9) -> MomentEntry:
        for e in self.entries:
            if abs(wrap_angle(e.phi - phi + math.pi, 2.0 * math.pi) - math.pi) <= atol:
                return e
        raise KeyError(f"no moments recorded at phi={phi}")

    def has_angle(self, phi: float) -> bool:
        try:
            self.entry(phi)
        except KeyError:
            return False
        return True

    def to_csv(self, header_lines: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        buf.write(f"# mean_s0={self.mean_s0!r}\n")
        buf.write(f"# second_s0={self.second_s0!r}\n")
        buf.write(f"# provenance={self.provenance}\n")
        buf.write(f"# ordering={self.ordering}\n")
        empirical = self.s0_cov is not None
        if empirical:
            buf.write(f"# s0_n={self.s0_n}\n")
            buf.write("# s0_cov=" + ";".join(repr(x) for x in self.s0_cov) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        cols = ["phi", "mean_s2", "second_s2"]
        if empirical:
            cols += ["n", "var_mean_s2", "cov_mean_second", "var_second_s2"]
        w.writerow(cols)
        for e in self.entries:
            row = [repr(e.phi), repr(e.mean_s2), repr(e.second_s2)]
            if empirical:
                row += [str(e.n)] + [repr(x) for x in e.cov]
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "StokesMomentSet":
        header: dict[str, str] = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                item = line[1:].strip()
                if "=" in item:
                    k, v = item.split("=", 1)
                    header[k.strip()] = v.strip()
            elif line.strip():
                body.append(line)
        rows = list(csv.DictReader(body))
        if "mean_s0" not in header or "second_s0" not in header:
            raise ValueError("moment CSV needs '# mean_s0=' and '# second_s0=' header lines")
        entries = []
        for row in rows:
            cov = None
            n = None
            if row.get("var_mean_s2"):
                cov = (float(row["var_mean_s2"]), float(row["cov_mean_second"]),
                       float(row["var_second_s2"]))
                n = int(row["n"])
            entries.append(MomentEntry(float(row["phi"]), float(row["mean_s2"]),
                                       float(row["second_s2"]), cov, n))
        s0_cov = None
        if "s0_cov" in header:
            s0_cov = tuple(float(x) for x in header["s0_cov"].split(";"))
        return cls(entries=tuple(entries), mean_s0=float(header["mean_s0"]),
                   second_s0=float(header["second_s0"]),
                   provenance=header.get("provenance", "empirical"),
                   ordering=header.get("ordering", "quantum"), s0_cov=s0_cov,
                   s0_n=int(header["s0_n"]) if "s0_n" in header else None)

    def with_ordering(self, ordering: str, constants: OrderingConstants = ORDERING) -> "StokesMomentSet":
        """Shift the second moments so that they describe ``ordering``."""
        if ordering == self.ordering:
            return self
        k_from, s_from = _offsets(self.ordering, constants)
        k_to, s_to = _offsets(ordering, constants)
        entries = tuple(replace(e, second_s2=e.second_s2 - k_from + k_to) for e in self.entries)
        return replace(self, entries=entries, second_s0=self.second_s0 - s_from + s_to,
                       ordering=ordering)


def moment_set(signal: GaussianParams, ref: ReferenceSpec, angles: Iterable[float],
               ordering: str = "quantum", constants: OrderingConstants = ORDERING) -> StokesMomentSet:
    entries = tuple(
        MomentEntry(phi, mean_s2(signal, ref, phi), second_s2(signal, ref, phi, ordering, constants))
        for phi in angles
    )
    return StokesMomentSet(entries=entries, mean_s0=mean_s0(signal, ref),
                           second_s0=second_s0(signal, ref, ordering, constants),
                           provenance="analytic", ordering=ordering)


DEFAULT_ANGLES = (0.0, math.pi / 4.0, math.pi / 2.0)
