import numpy as np
import pytest

from lpball.stats import RngState


@pytest.fixture
def rng():
    return RngState(20240611)


def trapezoid(f, a, b, n=200_001):
    # plain composite trapezoid; used as an oracle independent of scipy.quad
    t = np.linspace(a, b, n)
    return float(np.trapezoid(f(t), t)) if hasattr(np, "trapezoid") else float(np.trapz(f(t), t))
