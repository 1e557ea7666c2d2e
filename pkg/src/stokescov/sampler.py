"""Per-shot Stokes outcomes drawn from phase-space (Wigner) distributions.

Each shot draws (x_S, p_S) from the signal Wigner function and (x_R, p_R) from
the phase-shifted reference, then records

    s2 = (x_S x_R + p_S p_R) / 2,   s0 = (x_S^2 + p_S^2 - 2)/4 + (x_R^2 + p_R^2 - 2)/4.

Means are exact.  Second moments come out in Wigner ordering; they exceed the
measured quantum moments by the constants in :class:`~stokescov.moments.OrderingConstants`.
Only first and second moments are meant to be faithful; the per-shot
distribution itself is not a model of real photocurrents.

``mode="wigner"`` reports moments as sampled (ordering ``"wigner"``).
``mode="calibrated"`` shifts them onto the quantum values before reporting,
since the offset is negative and cannot be realised by adding noise.
"""
from __future__ import annotations

import csv
import gzip
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .moments import ORDERING, MomentEntry, OrderingConstants, StokesMomentSet
from .states import GaussianParams, ReferenceSpec, params_to_moments, rotate

MODES = ("wigner", "calibrated")
CHUNK = 1 << 18
SEED_ENV = "STOKESCOV_SEED"


class CalibrationUnavailable(RuntimeError):
    pass


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class SeedSpec:
    """Deterministic stream identifier; ``path`` extends it hierarchically."""

    seed: int
    stream: int = 0
    path: tuple[int, ...] = ()

    def child(self, *keys: int) -> "SeedSpec":
        return SeedSpec(self.seed, self.stream, self.path + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,) + self.path)
        return np.random.Generator(np.random.PCG64(ss))

    @classmethod
    def from_env(cls, default: int = 0, stream: int = 0) -> "SeedSpec":
        return cls(int(os.environ.get(SEED_ENV, default)), stream)


@dataclass(frozen=True)
class GaussianMixture:
    """Classical mixture of Gaussian states; only used to test moment-based robustness."""

    components: tuple[GaussianParams, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.components) != len(w) or np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise ValueError("mixture weights must be non-negative, sum to 1 and match components")

    def moments(self):
        from .states import MomentForm

        mean = np.zeros(2)
        second = np.zeros((2, 2))
        for w, comp in zip(self.weights, self.components):
            m = params_to_moments(comp)
            mean += w * m.mean
            second += w * (m.covariance + np.outer(m.mean, m.mean))
        return MomentForm.from_arrays(mean, second - np.outer(mean, mean))


def _cholesky(s: GaussianParams) -> tuple[np.ndarray, np.ndarray]:
    m = params_to_moments(s)
    return m.mean, np.linalg.cholesky(m.covariance)


def _draw(rng: np.random.Generator, state, xi: np.ndarray) -> np.ndarray:
    """Map standard normals ``xi`` (2, n) onto phase-space points of ``state``."""
    if isinstance(state, GaussianMixture):
        idx = rng.choice(len(state.components), size=xi.shape[1], p=np.asarray(state.weights))
        out = np.empty_like(xi)
        for k, comp in enumerate(state.components):
            sel = idx == k
            mean, chol = _cholesky(comp)
            out[:, sel] = mean[:, None] + chol @ xi[:, sel]
        return out
    mean, chol = _cholesky(state)
    out = chol @ xi
    out += mean[:, None]
    return out


def _shot_chunk(rng: np.random.Generator, signal, ref_rot: GaussianParams,
                n: int) -> tuple[np.ndarray, np.ndarray]:
    xi = rng.standard_normal((4, n))
    zs = _draw(rng, signal, xi[:2])
    zr = _draw(rng, ref_rot, xi[2:])
    s2 = zs[0] * zr[0]
    s2 += zs[1] * zr[1]
    s2 *= 0.5
    np.square(zs, out=zs)
    np.square(zr, out=zr)
    s0 = zs[0] + zs[1]
    s0 += zr[0]
    s0 += zr[1]
    s0 -= 4.0
    s0 *= 0.25
    return s2, s0


def _phase_shifted(ref: ReferenceSpec, phi: float) -> GaussianParams:
    # reference turned by +phi in phase space: its axes then point along phi
    return rotate(ref.params, -phi)


def _check_mode(mode: str, offset_bookkeeping: bool, constants: OrderingConstants) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "calibrated" and not offset_bookkeeping and constants.kappa2 < 0.0:
        raise CalibrationUnavailable(
            f"calibrated mode would need noise of variance {constants.kappa2} < 0; "
            "enable offset bookkeeping instead")


@dataclass
class ShotBatch:
    phi: float
    s2: np.ndarray
    s0: np.ndarray
    mode: str = "wigner"

    def __len__(self) -> int:
        return len(self.s2)


def _chunk_sizes(n: int, chunk: int) -> list[int]:
    full, rest = divmod(n, chunk)
    return [chunk] * full + ([rest] if rest else [])


def sample_batch(signal, ref: ReferenceSpec, phi: float, n: int, mode: str = "wigner",
                 seed: SeedSpec = SeedSpec(0), offset_bookkeeping: bool = True,
                 constants: OrderingConstants = ORDERING) -> ShotBatch:
    """Draw ``n`` single-angle shots.  Chunk ``k`` uses stream ``seed.child(k)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_mode(mode, offset_bookkeeping, constants)
    ref_rot = _phase_shifted(ref, phi)
    s2_parts, s0_parts = [], []
    for k, size in enumerate(_chunk_sizes(n, CHUNK)):
        s2, s0 = _shot_chunk(seed.child(k).generator(), signal, ref_rot, size)
        s2_parts.append(s2)
        s0_parts.append(s0)
    return ShotBatch(phi, np.concatenate(s2_parts), np.concatenate(s0_parts), mode)


@dataclass
class MomentAccumulator:
    """Running power sums of one scalar outcome."""

    n: int = 0
    sums: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def add(self, values: np.ndarray) -> None:
        v = np.asarray(values, dtype=float)
        v2 = v * v
        self.sums += (v.sum(), v2.sum(), (v2 * v).sum(), (v2 * v2).sum())
        self.n += v.size

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        return MomentAccumulator(self.n + other.n, self.sums + other.sums)

    def estimates(self) -> tuple[float, float, tuple[float, float, float]]:
        """Sample mean, raw second moment and their sampling covariance."""
        if self.n < 2:
            raise InsufficientData(f"need at least 2 shots, have {self.n}")
        e1, e2, e3, e4 = self.sums / self.n
        corr = self.n / (self.n - 1)
        var1 = max(e2 - e1 * e1, 0.0) * corr / self.n
        cov12 = (e3 - e1 * e2) * corr / self.n
        var2 = max(e4 - e2 * e2, 0.0) * corr / self.n
        return float(e1), float(e2), (float(var1), float(cov12), float(var2))


@dataclass
class AngleAccumulator:
    phi: float
    s2: MomentAccumulator = field(default_factory=MomentAccumulator)
    s0: MomentAccumulator = field(default_factory=MomentAccumulator)

    def add(self, s2: np.ndarray, s0: np.ndarray) -> None:
        self.s2.add(s2)
        self.s0.add(s0)


def fold(accs: Sequence[AngleAccumulator], mode: str = "wigner",
         constants: OrderingConstants = ORDERING) -> StokesMomentSet:
    """Turn per-angle accumulators into an empirical moment set."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    entries = []
    s0_total = MomentAccumulator()
    for acc in accs:
        if acc.s2.n < 2:
            raise InsufficientData(f"angle {acc.phi} has {acc.s2.n} shots; need at least 2")
        m1, m2, cov = acc.s2.estimates()
        entries.append(MomentEntry(acc.phi, m1, m2, cov, acc.s2.n))
        s0_total = s0_total.merge(acc.s0)
    if not entries:
        raise InsufficientData("no angles recorded")
    s0_1, s0_2, s0_cov = s0_total.estimates()
    ms = StokesMomentSet(entries=tuple(entries), mean_s0=s0_1, second_s0=s0_2,
                         provenance="empirical", ordering="wigner", s0_cov=s0_cov,
                         s0_n=s0_total.n, meta={"mode": mode})
    if mode == "calibrated":
        ms = ms.with_ordering("quantum", constants)
        ms.meta["mode"] = mode
    return ms


def empirical_moments(batches: Iterable[ShotBatch], mode: str | None = None,
                      constants: OrderingConstants = ORDERING) -> StokesMomentSet:
    """Group shots by angle and fold them into sample moments.

    The batches' own mode is used unless ``mode`` overrides it.
    """
    groups: dict[float, AngleAccumulator] = {}
    modes = set()
    for batch in batches:
        modes.add(batch.mode)
        acc = groups.setdefault(float(batch.phi), AngleAccumulator(float(batch.phi)))
        acc.add(batch.s2, batch.s0)
    if mode is None:
        if len(modes) > 1:
            raise ValueError(f"batches mix sampler modes {sorted(modes)}")
        mode = modes.pop() if modes else "wigner"
    if not groups or any(a.s2.n == 0 for a in groups.values()):
        raise InsufficientData("empty angle group")
    return fold(list(groups.values()), mode, constants)


def split_budget(n_total: int, n_angles: int) -> list[int]:
    """Split a shot budget equally; the first angles take the remainder."""
    base, rest = divmod(n_total, n_angles)
    return [base + (1 if i < rest else 0) for i in range(n_angles)]


def _accumulate_angle(signal, ref: ReferenceSpec, phi: float, n: int, seed: SeedSpec,
                      acc: AngleAccumulator) -> AngleAccumulator:
    ref_rot = _phase_shifted(ref, phi)
    for k, size in enumerate(_chunk_sizes(n, CHUNK)):
        s2, s0 = _shot_chunk(seed.child(k).generator(), signal, ref_rot, size)
        acc.add(s2, s0)
    return acc


def sample_moment_set(signal, ref: ReferenceSpec, angles: Sequence[float], n_total: int,
                      mode: str = "wigner", seed: SeedSpec = SeedSpec(0), workers: int = 1,
                      offset_bookkeeping: bool = True,
                      constants: OrderingConstants = ORDERING) -> StokesMomentSet:
    """Sample ``n_total`` shots split over ``angles`` and fold them without storing shots.

    Angle ``i`` uses stream ``seed.child(i)``, so the result does not depend on
    ``workers``.
    """
    _check_mode(mode, offset_bookkeeping, constants)
    counts = split_budget(n_total, len(angles))
    if min(counts) < 2:
        raise InsufficientData(f"budget {n_total} leaves fewer than 2 shots per angle")
    accs = [AngleAccumulator(float(phi)) for phi in angles]
    jobs = [(signal, ref, phi, n, seed.child(i), accs[i]) for i, (phi, n) in enumerate(zip(angles, counts))]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda job: _accumulate_angle(*job), jobs))
    else:
        for job in jobs:
            _accumulate_angle(*job)
    return fold(accs, mode, constants)


class IncrementalSampler:
    """Grow one experiment shot by shot; snapshots give nested-N trajectories."""

    def __init__(self, signal, ref: ReferenceSpec, angles: Sequence[float], mode: str = "wigner",
                 seed: SeedSpec = SeedSpec(0), constants: OrderingConstants = ORDERING):
        _check_mode(mode, True, constants)
        self.signal, self.ref, self.angles = signal, ref, [float(a) for a in angles]
        self.mode, self.seed, self.constants = mode, seed, constants
        self.accs = [AngleAccumulator(phi) for phi in self.angles]
        self.n_total = 0
        self._step = 0

    def grow_to(self, n_total: int) -> StokesMomentSet:
        if n_total < self.n_total:
            raise ValueError("incremental sampler cannot shrink")
        target = split_budget(n_total, len(self.angles))
        for i, (acc, want) in enumerate(zip(self.accs, target)):
            extra = want - acc.s2.n
            if extra > 0:
                _accumulate_angle(self.signal, self.ref, acc.phi, extra,
                                  self.seed.child(i, self._step), acc)
        self._step += 1
        self.n_total = n_total
        return fold(self.accs, self.mode, self.constants)


# --- shot dumps -----------------------------------------------------------------

def _open_text(path: Path, mode: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode + "t", newline="")
    return open(path, mode, newline="")


def write_shots(batches: Iterable[ShotBatch], path: str | Path) -> None:
    path = Path(path)
    with _open_text(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phi", "s2", "s0"])
        for b in batches:
            phi = repr(float(b.phi))
            for s2, s0 in zip(b.s2.tolist(), b.s0.tolist()):
                w.writerow([phi, repr(s2), repr(s0)])


def read_shots(path: str | Path, mode: str = "wigner") -> list[ShotBatch]:
    path = Path(path)
    cols: dict[float, tuple[list[float], list[float]]] = {}
    with _open_text(path, "r") as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(rows)
        if header[:3] != ["phi", "s2", "s0"]:
            raise ValueError(f"shot dump must have columns phi,s2,s0; got {header}")
        for row in rows:
            s2s, s0s = cols.setdefault(float(row[0]), ([], []))
            s2s.append(float(row[1]))
            s0s.append(float(row[2]))
    return [ShotBatch(phi, np.array(a), np.array(b), mode) for phi, (a, b) in cols.items()]


def is_shot_dump(text_head: str) -> bool:
    for line in io.StringIO(text_head):
        if line.startswith("#") or not line.strip():
            continue
        return line.strip().startswith("phi,s2,s0")
    return False
