import numpy as np
import pytest
from hypothesis import strategies as st

from gbcregion.analytic import Regime, classify_regime
from gbcregion.model import make_instance

# acceptance criterion number -> (description, passed)
ACCEPTANCE_RESULTS = {}


@pytest.fixture
def window_inst():
    """Instance with a hybrid window (rho = 0.4)."""
    return make_instance(1.0, 1.0, 0.4, 0.3, 1.0)


@pytest.fixture
def uncoded_inst():
    """Instance where the uncoded scheme is optimal everywhere (rho = 0.8)."""
    return make_instance(1.0, 1.0, 0.8, 0.3, 1.0)


@st.composite
def instances(draw, regime=None):
    rho = draw(st.floats(0.0, 0.95))
    N1 = draw(st.floats(0.05, 2.0))
    N2 = N1 * draw(st.floats(1.0, 5.0))
    s2 = draw(st.floats(0.2, 5.0))
    thr = 2 * rho * N1 / (1 - rho)
    if regime is Regime.HYBRID_WINDOW:
        P = thr * draw(st.floats(1.05, 20.0)) + draw(st.floats(0.01, 0.5))
    elif regime is Regime.UNCODED_EVERYWHERE:
        rho = max(rho, 0.05)
        thr = 2 * rho * N1 / (1 - rho)
        P = thr * draw(st.floats(0.05, 0.95))
    else:
        P = draw(st.floats(0.05, 20.0))
    inst = make_instance(P, s2, rho, N1, N2)
    if regime is not None and classify_regime(inst).regime is not regime:
        from hypothesis import reject
        reject()
    return inst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        desc, ok = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {desc}")
