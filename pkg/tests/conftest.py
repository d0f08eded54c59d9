import numpy as np
import pytest

from pqlga.simulator import StateVector, apply_ops_array


def random_state(layout, rng, batch=None):
    n = 1 << layout.total_qubits
    shape = (n,) if batch is None else (n, batch)
    amps = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    amps /= np.linalg.norm(amps, axis=0)
    return StateVector(amps, layout) if batch is None else amps


def basis_bits(index, n):
    return [(index >> k) & 1 for k in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def induced_permutation(block, n):
    """Basis map of a permutation block, read off from one labelled state.

    Amplitude b + 1 is placed on basis state b; after the block, the label
    found at index k says which input landed there. Any mixing would break
    the integer labels.
    """
    amps = np.arange(1, (1 << n) + 1, dtype=complex)
    apply_ops_array(amps, n, block)
    labels = amps.real.round().astype(np.int64) - 1
    assert np.allclose(amps.imag, 0) and np.allclose(amps.real, labels + 1)
    assert sorted(labels) == list(range(1 << n))
    perm = np.empty(1 << n, dtype=np.int64)
    perm[labels] = np.arange(1 << n)
    return perm
