"""Small hand-checkable cases across the package."""
import math

import numpy as np
import pytest

from stokescov import fockcheck
from stokescov.moments import mean_s0, mean_s2, photon_variance, second_s0, second_s2
from stokescov.sampler import SeedSpec, sample_batch
from stokescov.states import (GaussianParams, MomentForm, ReferenceSpec, moments_to_params, ner,
                              params_to_moments, reference_from_ner, rotate)

VAC = GaussianParams.vacuum()
VREF = ReferenceSpec(VAC)
WORKED = GaussianParams.from_eigen(237.0, 86.0, 0.7, 158.0, 0.2)


def test_axis_aligned_squeezed_displaced():
    m = params_to_moments(GaussianParams(r=1.0, q=2.0, d=2.0))
    assert (m.mean_x, m.mean_p, m.var_x, m.var_p, m.cov_xp) == pytest.approx((2, 0, 4, 0.25, 0))


def test_worked_signal_var_x():
    assert params_to_moments(WORKED).var_x == pytest.approx(35928, abs=1)


@pytest.mark.parametrize("m, expected", [
    (MomentForm(0, 0, 4, 1, 0), (2, 1, 0)),
    (MomentForm(0, 0, 2.5, 2.5, 1.5), (2, 1, math.pi / 4)),
    (MomentForm(0, 0, 3, 3, 0), (math.sqrt(3), math.sqrt(3), 0)),
])
def test_eigen_decomposition_by_hand(m, expected):
    s = moments_to_params(m)
    assert (s.b, s.c, s.alpha) == pytest.approx(expected)
    assert s.d == 0


def test_rotation_examples():
    s = GaussianParams(r=1.0, d=2.0)
    assert rotate(WORKED, 0.0) == WORKED
    m = params_to_moments(rotate(s, math.pi / 2))
    assert (m.mean_x, m.mean_p) == pytest.approx((0, -2), abs=1e-12)
    ref = ReferenceSpec(GaussianParams.coherent(2.0))
    assert mean_s2(rotate(s, math.pi / 2), ref, math.pi / 2) == pytest.approx(m.mean_p * 2 / 2)
    half = params_to_moments(rotate(WORKED, math.pi))
    full = params_to_moments(WORKED)
    assert np.allclose(half.covariance, full.covariance)
    assert np.allclose(half.mean, -full.mean)


def test_rotation_sign_matches_fock_space():
    # rotating the signal frame by phi is the same as phase-shifting the reference by phi
    sig = GaussianParams.from_eigen(1.6, 1.0, 0.4, 1.5, 0.9)
    ref = ReferenceSpec(GaussianParams.coherent(2.0))
    ts, tr = fockcheck.build_state(sig), fockcheck.build_state(ref.params)
    for phi in (0.3, math.pi / 2):
        ex = fockcheck.stokes_expectations(ts, tr, phi)
        assert ex.mean_s2 == pytest.approx(mean_s2(sig, ref, phi), abs=1e-8)
        assert ex.second_s2 == pytest.approx(second_s2(sig, ref, phi), abs=1e-7)
        assert mean_s2(rotate(sig, phi), ref, 0.0) == pytest.approx(mean_s2(sig, ref, phi))


def test_ner_examples():
    th = ner(ReferenceSpec(GaussianParams.thermal(1.7)))
    assert th.delta == 0 and th.gamma is None
    disp = ner(ReferenceSpec(GaussianParams(r=math.sqrt(2), d=2.0)))
    assert (disp.delta_disp, disp.gamma) == pytest.approx((1.0, 1.0))
    sq = ner(ReferenceSpec(GaussianParams(r=1.0, q=2.0)))
    assert (sq.delta_sq, sq.gamma) == pytest.approx((1.125, 0.0))


@pytest.mark.parametrize("r", [0.5, 1.0, 3.0, 10.0])
def test_ner_scale_invariance_for_pure_displacement(r):
    assert ner(ReferenceSpec(GaussianParams(r=r, d=3.0 * r))).delta_disp == pytest.approx(4.5)


def test_reference_from_ner_examples():
    v = reference_from_ner(1.0, 0.0, 0.3)
    assert (v.d, v.q) == (0.0, 1.0)
    a = reference_from_ner(1.0, 1.0, 1.0)
    assert (a.d, a.q) == pytest.approx((math.sqrt(2), 1.0))
    b = reference_from_ner(1.0, 1.125, 0.0)
    assert (b.d, b.q) == pytest.approx((0.0, 2.0))


def test_mean_s2_examples():
    sq = reference_from_ner(1.0, 3.0, 0.0)
    for phi in (0.0, 0.5, 2.0):
        assert mean_s2(WORKED, sq, phi) == 0.0
    ref = ReferenceSpec(GaussianParams.coherent(2.0))
    assert mean_s2(WORKED, ref, 0.0) == pytest.approx(158 * math.cos(0.2))
    assert mean_s2(WORKED, ref, 0.0) == pytest.approx(154.85, abs=0.01)
    assert mean_s2(GaussianParams(r=1.0, d=5.0), ref, math.pi / 2) == pytest.approx(0.0, abs=1e-12)


def test_thermal_reference_is_phase_blind():
    ref = ReferenceSpec(GaussianParams.thermal(2.0))
    vals = [second_s2(WORKED, ref, phi) for phi in (0.0, 0.3, 1.0, 2.5)]
    assert max(vals) - min(vals) <= 1e-9 * vals[0]


def test_s0_examples():
    assert mean_s0(VAC, VREF) == 0.0
    assert second_s0(VAC, VREF) == pytest.approx(0.0, abs=1e-12)
    assert mean_s0(WORKED, VREF) == pytest.approx(22131.75)
    for rs, rr in ((1.0, 2.0), (3.0, 1.5)):
        ref = ReferenceSpec(GaussianParams.thermal(rr))
        assert mean_s0(GaussianParams.thermal(rs), ref) == pytest.approx((rs**2 + rr**2) / 2 - 1)
    assert second_s0(GaussianParams.coherent(2.0), VREF) == pytest.approx(2.0)


def test_s0_squared_against_fock_space():
    s = GaussianParams.from_eigen(2.0, 1.0, 0.0)
    ref = ReferenceSpec(GaussianParams.thermal(1.5))
    ex = fockcheck.stokes_expectations(fockcheck.build_state(s), fockcheck.build_state(ref.params), 0.0)
    assert ex.second_s0 == pytest.approx(second_s0(s, ref), rel=1e-6)


# --- number basis --------------------------------------------------------------

def test_truncated_operators():
    a = fockcheck.annihilation(5)
    expect = np.zeros((5, 5))
    for n in range(1, 5):
        expect[n - 1, n] = math.sqrt(n)
    assert np.array_equal(a.real, expect) and not a.imag.any()
    assert np.array_equal(np.diag(fockcheck.number(5)).real, np.arange(5))


def test_built_state_examples():
    vac = fockcheck.build_state(VAC).rho
    proj = np.zeros_like(vac)
    proj[0, 0] = 1
    assert np.allclose(vac, proj)
    coh = fockcheck.build_state(GaussianParams.coherent(2.0))
    assert coh.expect(fockcheck.number(coh.dim)).real == pytest.approx(1.0, abs=1e-9)
    th = fockcheck.build_state(GaussianParams.thermal(math.sqrt(3)))
    pops = np.diag(th.rho).real
    assert np.allclose(th.rho, np.diag(pops))
    assert np.allclose(pops[1:20] / pops[:19], 0.5)
    assert (pops * np.arange(th.dim)).sum() == pytest.approx(1.0, abs=1e-9)


def test_expectation_examples():
    vac = fockcheck.build_state(VAC)
    coh = fockcheck.build_state(GaussianParams.coherent(2.0))
    z = fockcheck.stokes_expectations(vac, vac, 0.0)
    assert (z.mean_s2, z.second_s2, z.mean_s0, z.second_s0) == pytest.approx((0, 0, 0, 0), abs=1e-12)
    assert fockcheck.stokes_expectations(coh, coh, 0.0).mean_s2 == pytest.approx(2.0, abs=1e-9)


def test_fock_second_moment_is_affine_in_signal_second_moments():
    ref = ReferenceSpec(GaussianParams.coherent(2.0))
    tr = fockcheck.build_state(ref.params)
    rows, y0, y45 = [], [], []
    for s in fockcheck.validation_grid():
        st = fockcheck.build_state(s)
        mx, mp, vx, vp, cxp = fockcheck.quadrature_moments(st)
        rows.append([vx + mx * mx, vp + mp * mp, cxp + mx * mp, 1.0])
        y0.append(fockcheck.stokes_expectations(st, tr, 0.0).second_s2)
        y45.append(fockcheck.stokes_expectations(st, tr, math.pi / 4).second_s2)
    A = np.array(rows)
    u, v = (4 + 1 + 1) / 8, (4 + 1 - 1) / 8
    c0, *_ = np.linalg.lstsq(A, np.array(y0), rcond=None)
    c45, *_ = np.linalg.lstsq(A, np.array(y45), rcond=None)
    assert c0 == pytest.approx([u + v, u - v, 0.0, -0.5], abs=1e-6)
    assert c45 == pytest.approx([u, u, 2 * v, -0.5], abs=1e-6)


# --- sampler ---------------------------------------------------------------------

def test_sampled_mean_for_zero_mean_signal():
    b = sample_batch(VAC, ReferenceSpec(GaussianParams.coherent(2.0)), 0.0, 1_000_000, seed=SeedSpec(1))
    assert abs(b.s2.mean()) < 4 * b.s2.std() / 1000


def test_sampled_s0_mean_for_worked_signal():
    b = sample_batch(WORKED, VREF, 0.0, 1_000_000, seed=SeedSpec(2))
    assert abs(b.s0.mean() - mean_s0(WORKED, VREF)) < 4 * b.s0.std() / 1000


def test_stream_cross_correlation_at_one_million():
    ref = ReferenceSpec(GaussianParams.coherent(2.0))
    a = sample_batch(WORKED, ref, 0.0, 1_000_000, seed=SeedSpec(3, 0)).s2
    b = sample_batch(WORKED, ref, 0.0, 1_000_000, seed=SeedSpec(3, 1)).s2
    # consistent with zero: |rho| < 4 / sqrt(n)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4e-3


def test_photon_variance_of_vacuum_is_zero():
    assert photon_variance(VAC) == pytest.approx(0.0, abs=1e-15)
