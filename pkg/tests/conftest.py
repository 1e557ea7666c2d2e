import math

import pytest
from hypothesis import settings
from hypothesis import strategies as st

from stokescov.states import GaussianParams, ReferenceSpec, reference_from_ner

settings.register_profile("default", deadline=None, max_examples=150)
settings.load_profile("default")


@st.composite
def gaussian_params(draw, r_max=30.0, q_max=20.0, d_max=200.0, min_r=0.05):
    r = draw(st.floats(min_r, r_max))
    q = draw(st.floats(1.0, q_max))
    alpha = draw(st.floats(0.0, math.pi, exclude_max=True))
    d = draw(st.floats(0.0, d_max))
    beta = draw(st.floats(0.0, 2 * math.pi, exclude_max=True))
    return GaussianParams(r=r, q=q, alpha=alpha, d=d, beta=beta)


@st.composite
def references(draw, displaced=True, shaped=True):
    r = draw(st.floats(1.0, 10.0))
    delta = draw(st.floats(0.05, 100.0))
    lo = 0.05 if displaced else 0.0
    hi = 0.95 if shaped else 1.0
    gamma = draw(st.floats(lo, hi)) if displaced else 0.0
    return reference_from_ner(r, delta, gamma)


@pytest.fixture
def worked_signal():
    return GaussianParams.from_eigen(237.0, 86.0, 0.7, 158.0, 0.2)


@pytest.fixture
def worked_ref():
    return reference_from_ner(1.0, 10.0, 1.0)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def ref_grid():
    """Ten references with d_R != 0 and v != 0."""
    out = []
    for r in (1.0, 2.0):
        for delta, gamma in ((0.5, 0.5), (10.0, 1.0), (10.0, 0.3), (100.0, 0.7), (2.0, 0.9)):
            out.append(reference_from_ner(r, delta, gamma))
    out[-1] = ReferenceSpec(GaussianParams(r=1.3, q=2.0, d=5.0))
    return out


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
