import numpy as np
import pytest
from hypothesis import settings

from regime_pcmci.core import TimeSeries

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def ar_series(rng, T, phi, n_vars=None, burn=50):
    """Stationary lagged linear process ``x_t = sum_tau phi[:, :, tau] x_{t-tau} + e_t``.

    ``phi`` has shape (N, N, tau_max + 1) indexed ``[j, i, tau]``.
    """
    n = phi.shape[0]
    tau_max = phi.shape[2] - 1
    x = np.zeros((T + burn, n))
    e = rng.standard_normal((T + burn, n))
    for t in range(T + burn):
        x[t] = e[t]
        for tau in range(1, tau_max + 1):
            if t - tau >= 0:
                x[t] += phi[:, :, tau] @ x[t - tau]
    return TimeSeries(x[burn:])


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
