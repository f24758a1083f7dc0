import numpy as np
import pytest

from gridsim.benchgen import GenSpec, generate


@pytest.fixture(scope="session")
def circuit_4x4_d16():
    return generate(GenSpec(4, 4, 16, "v2", seed=3))


@pytest.fixture(scope="session")
def circuit_3x3_d12():
    return generate(GenSpec(3, 3, 12, "v2", seed=1))


def assert_states_close(a, b, atol):
    a = np.asarray(a, dtype=np.complex128).reshape(-1)
    b = np.asarray(b, dtype=np.complex128).reshape(-1)
    assert a.shape == b.shape
    err = float(np.abs(a - b).max())
    assert err <= atol, f"max amplitude error {err:.3e} exceeds {atol:.1e}"
