import math

import numpy as np
import pytest
from conftest import induced_permutation

from pqlga.lattice import (
    CollisionModel,
    LatticeSpec,
    QoISpec,
    build_boundary,
    build_collision,
    build_initial_conditions,
    build_streaming,
    build_time_step,
    d1q2,
    d2q4,
    head_on_states,
    occupancy_from_string,
    occupancy_to_string,
    qubit_index,
    verify_conservation,
)
from pqlga.simulator import RegisterLayout, apply_block, basis_state, block_matrix, new_state


def classical_shift(spec, bits):
    """Reference streaming by coordinate arithmetic on an occupancy bitmask."""
    out = 0
    for g in range(spec.n_gridpoints):
        coords = np.unravel_index(g, spec.shape)
        for c, v in enumerate(spec.velocities):
            if not bits >> (g * spec.q + c) & 1:
                continue
            new = [(a + b) % s for a, b, s in zip(coords, v, spec.shape)]
            out |= 1 << (int(np.ravel_multi_index(new, spec.shape)) * spec.q + c)
    return out


def layout_for(spec):
    return RegisterLayout([("B", spec.n_qubits)])


def test_qubit_index():
    spec = d1q2(4)
    assert qubit_index(spec, 0, 0) == 0
    assert qubit_index(spec, 2, 1) == 5
    idx = {qubit_index(spec, g, c) for g in range(4) for c in range(2)}
    assert idx == set(range(8))
    with pytest.raises(IndexError):
        qubit_index(spec, 4, 0)
    sq = d2q4(2, 3)
    assert qubit_index(sq, (1, 2), 3) == (1 * 3 + 2) * 4 + 3


def test_initial_conditions():
    assert len(build_initial_conditions(d1q2(4))) == 0
    spec = d1q2(4, initial_occupancy={(0, 0), (1, 0)})
    block = build_initial_conditions(spec)
    assert sorted(op.targets[0] for op in block) == [0, 2]
    assert block.layers() == 1
    s = new_state(layout_for(spec))
    apply_block(s, block)
    idx = int(np.argmax(np.abs(s.amplitudes)))
    assert bin(idx).count("1") == 2


def test_streaming_moves_particle():
    spec = d1q2(4)
    s = basis_state(layout_for(spec), 1 << qubit_index(spec, 1, 0))
    apply_block(s, build_streaming(spec))
    assert s.amplitudes[1 << qubit_index(spec, 2, 0)] == 1


def test_streaming_full_row_invariant():
    spec = d1q2(4)
    row = sum(1 << qubit_index(spec, g, 0) for g in range(4))
    s = basis_state(layout_for(spec), row)
    apply_block(s, build_streaming(spec))
    assert s.amplitudes[row] == 1


@pytest.mark.parametrize("spec", [d1q2(4), d1q2(5), d2q4(2, 2)], ids=["d1q2-4", "d1q2-5", "d2q4-2x2"])
def test_streaming_matches_classical_shift_exhaustively(spec):
    n = spec.n_qubits
    perm = induced_permutation(build_streaming(spec), n)
    for b in range(1 << n):
        assert perm[b] == classical_shift(spec, b)


def test_streaming_matrix_is_a_permutation():
    mat = block_matrix(build_streaming(d1q2(5)), 10)
    assert np.array_equal(mat.sum(axis=0), np.ones(1 << 10))
    assert np.array_equal(mat.sum(axis=1), np.ones(1 << 10))
    assert set(np.unique(mat)) <= {0, 1}


def test_streaming_swap_count_and_depth():
    for n_g in (2, 3, 4, 7, 8):
        block = build_streaming(d1q2(n_g))
        assert len(block) == 2 * (n_g - 1)
        assert block.layers() <= 2


def test_streaming_preserves_particle_number():
    spec = d2q4(2, 2)
    walled = spec.with_conditions(boundary_links={(0, 0): 2, (0, 2): 0})
    perm = induced_permutation(build_streaming(spec) + build_boundary(walled), 16)
    weights = np.array([bin(b).count("1") for b in range(1 << 16)])
    assert np.array_equal(weights[perm], weights)


def test_hpp_collision_maps_head_on_pair():
    spec = d2q4(1, 1)
    s = basis_state(layout_for(spec), occupancy_from_string("1010"))
    apply_block(s, build_collision(spec, CollisionModel.hpp()))
    assert occupancy_to_string(int(np.argmax(np.abs(s.amplitudes))), 4) == "0101"


def test_hpp_image_is_the_unique_equal_invariant_partner():
    # brute-force: the only other occupancy with the same mass and momentum as 1010
    spec = d2q4(1, 1)
    from pqlga.lattice import mass_momentum

    ref = mass_momentum(spec, occupancy_from_string("1010"))
    same = [o for o in range(16) if mass_momentum(spec, o) == ref and o != occupancy_from_string("1010")]
    assert same == [occupancy_from_string("0101")]


def test_rotation_collision():
    spec = d2q4(1, 1)
    assert np.allclose(CollisionModel.rotation(0.0).unitary(spec), np.eye(16))
    u = CollisionModel.rotation(math.pi / 2).unitary(spec)
    hpp = CollisionModel.hpp().unitary(spec)
    assert np.allclose(np.abs(u), np.abs(hpp))
    assert len(build_collision(spec, CollisionModel.identity())) == 0


def test_collision_dimension_mismatch():
    with pytest.raises(ValueError):
        build_collision(d1q2(2), CollisionModel.custom(np.eye(8)))
    with pytest.raises(ValueError):
        head_on_states(d1q2(2))


@pytest.mark.parametrize(
    "model",
    [CollisionModel.identity(), CollisionModel.hpp()]
    + [CollisionModel.rotation(t) for t in np.linspace(0, 2 * math.pi, 8)],
)
def test_conservation_passes(model):
    assert verify_conservation(model, d2q4(1, 1)).passed


def test_conservation_catches_mass_violation():
    flip = np.kron(np.eye(8), np.array([[0, 1], [1, 0]]))
    report = verify_conservation(CollisionModel.custom(flip), d2q4(1, 1))
    assert not report.passed
    assert report.violations


def test_boundary_block():
    assert len(build_boundary(d1q2(4))) == 0
    spec = d1q2(4, boundary_links={(3, 0): 1, (3, 1): 0})
    block = build_boundary(spec)
    assert len(block) == 1 and set(block.ops[0].targets) == {6, 7}
    assert block.layers() == 1


def test_boundary_validation():
    with pytest.raises(ValueError):
        d1q2(4, boundary_links={(3, 0): 1})
    with pytest.raises(ValueError):
        d2q4(2, 2, boundary_links={(0, 0): 1, (0, 1): 2, (0, 2): 0})


def test_bounce_back_wall_reverses_particle():
    # particle heading right hits the wall at site 3 and comes back along channel 1
    spec = d1q2(4, initial_occupancy={(2, 0)}, boundary_links={(3, 0): 1, (3, 1): 0})
    s = new_state(layout_for(spec))
    apply_block(s, build_initial_conditions(spec))
    step = build_time_step(spec, CollisionModel.identity())
    apply_block(s, step)
    assert s.amplitudes[1 << qubit_index(spec, 3, 1)] == 1
    apply_block(s, step)
    assert s.amplitudes[1 << qubit_index(spec, 2, 1)] == 1


def test_closed_box_reflects_at_edges():
    spec = d1q2(3, periodic=False, initial_occupancy={(2, 0)})
    s = new_state(layout_for(spec))
    apply_block(s, build_initial_conditions(spec) + build_streaming(spec))
    assert s.amplitudes[1 << qubit_index(spec, 2, 1)] == 1


def test_qoi_sizing():
    spec = d1q2(4)
    qoi = QoISpec.for_lattice(spec, region=[0, 1], acc_steps=[1])
    assert qoi.f_max == 4 and qoi.n_acc_qubits == 3
    qoi = QoISpec.for_lattice(spec, region=[0, 1, 2], acc_steps=[1])
    assert qoi.f_max == 6 and qoi.n_acc_qubits == 3
    rest = LatticeSpec((2,), ((1,), (-1,), (0,)))
    qoi = QoISpec.for_lattice(rest, region=[0, 1], acc_steps=[1, 2])
    # all channels with a rest particle: N_acc * |region| * (q + 1)
    assert qoi.weights == (1, 1, 2)
    assert qoi.f_max == 2 * 2 * (rest.q + 1)
    with pytest.raises(ValueError):
        QoISpec((0,), (0,), (0,), (1,))


def test_time_step_order_is_collision_stream_boundary():
    spec = d2q4(2, 2, boundary_links={(0, 0): 2, (0, 2): 0})
    step = build_time_step(spec, CollisionModel.hpp())
    kinds = [op.kind.value for op in step]
    first_swap = kinds.index("SWAP")
    assert all(k == "U" for k in kinds[:first_swap])
    assert step.ops[-1].targets == (0, 2)
