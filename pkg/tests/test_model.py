import numpy as np
import pytest

from elcrf.model import (
    LabelSet,
    Lattice,
    TransitionFactors,
    build_state_partition,
    energy,
    transition_logits,
)


class TestStatePartition:
    def test_identity_partition(self):
        part = build_state_partition(8, 1)
        assert part.num_states == 8
        assert part.label_of(5) == 5

    def test_block_partition(self):
        part = build_state_partition(8, 4)
        assert part.num_states == 32
        assert part.label_of(9) == 2
        assert list(part.states_of(0)) == [0, 1, 2, 3]

    def test_small_blocks(self):
        part = build_state_partition(2, 3)
        assert part.num_states == 6
        assert list(part.states_of(1)) == [3, 4, 5]

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            build_state_partition(0, 1)
        with pytest.raises(ValueError):
            build_state_partition(8, 0)

    def test_every_state_has_one_label(self):
        part = build_state_partition(3, 4)
        for z in range(part.num_states):
            owners = [y for y in range(3) if z in part.states_of(y)]
            assert owners == [part.label_of(z)]

    def test_out_of_range(self):
        part = build_state_partition(2, 2)
        with pytest.raises(IndexError):
            part.label_of(4)
        with pytest.raises(IndexError):
            part.states_of(2)


class TestLabelSet:
    def test_bijection(self):
        labels = LabelSet(("O", "I-PER"))
        assert labels.index("I-PER") == 1
        assert labels.names[labels.index("O")] == "O"

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            LabelSet(("O", "O"))

    def test_unknown_label(self):
        with pytest.raises(KeyError):
            LabelSet(("O",)).index("I-LOC")


class TestTransitionLogits:
    def test_identity_factors(self):
        eye = np.eye(4)
        factors = TransitionFactors(mode="low-rank", u=eye, v=eye.copy())
        np.testing.assert_array_equal(transition_logits(factors), np.eye(4))

    def test_zero_factors(self):
        factors = TransitionFactors(
            mode="low-rank", u=np.zeros((3, 2)), v=np.ones((3, 2))
        )
        np.testing.assert_array_equal(transition_logits(factors), np.zeros((3, 3)))

    def test_matches_elementwise_dot(self):
        rng = np.random.default_rng(7)
        u, v = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
        table = transition_logits(TransitionFactors(mode="low-rank", u=u, v=v))
        for i in range(3):
            for j in range(3):
                expected = sum(u[i, c] * v[j, c] for c in range(2))
                assert table[i, j] == pytest.approx(expected, abs=1e-12)

    def test_full_rank_passthrough(self):
        w = np.arange(9.0).reshape(3, 3)
        factors = TransitionFactors(mode="full-rank", full=w)
        assert transition_logits(factors) is w

    def test_rank_bound(self):
        rng = np.random.default_rng(1)
        u, v = rng.normal(size=(6, 2)), rng.normal(size=(6, 2))
        table = transition_logits(TransitionFactors(mode="low-rank", u=u, v=v))
        sv = np.linalg.svd(table, compute_uv=False)
        assert (sv[2:] <= 1e-8 * sv[0]).all()

    def test_full_expressivity_with_identity_u(self):
        rng = np.random.default_rng(2)
        target = rng.normal(size=(5, 5))
        factors = TransitionFactors(mode="low-rank", u=np.eye(5), v=target.T.copy())
        np.testing.assert_allclose(transition_logits(factors), target, atol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            TransitionFactors(
                mode="low-rank", u=np.zeros((3, 2)), v=np.zeros((4, 2))
            )

    def test_rank_exceeding_states(self):
        with pytest.raises(ValueError):
            TransitionFactors(
                mode="low-rank", u=np.zeros((2, 3)), v=np.zeros((2, 3))
            )


class TestEnergy:
    def test_single_step(self):
        lat = Lattice(emit=np.array([[2.0, 3.0]]), trans=np.zeros((2, 2)))
        part = build_state_partition(2, 1)
        assert energy(lat, [1], [1], part) == 3.0

    def test_partition_violation(self):
        lat = Lattice(emit=np.zeros((2, 4)), trans=np.zeros((4, 4)))
        part = build_state_partition(2, 2)
        assert energy(lat, [0, 3], [0, 0], part) == -np.inf

    def test_matches_direct_summation(self):
        rng = np.random.default_rng(3)
        emit = rng.uniform(-2, 2, (3, 2))
        trans = rng.uniform(-2, 2, (2, 2))
        lat = Lattice(emit=emit, trans=trans)
        part = build_state_partition(2, 1)
        z = [1, 0, 1]
        expected = emit[0, 1] + emit[1, 0] + emit[2, 1] + trans[1, 0] + trans[0, 1]
        assert energy(lat, z, z, part) == pytest.approx(expected, abs=1e-12)

    def test_length_mismatch(self):
        lat = Lattice(emit=np.zeros((2, 2)), trans=np.zeros((2, 2)))
        part = build_state_partition(2, 1)
        with pytest.raises(ValueError):
            energy(lat, [0], [0, 0], part)

    def test_state_out_of_range(self):
        lat = Lattice(emit=np.zeros((1, 2)), trans=np.zeros((2, 2)))
        part = build_state_partition(2, 1)
        with pytest.raises(IndexError):
            energy(lat, [5], [0], part)


class TestLattice:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Lattice(emit=np.array([[np.inf, 0.0]]), trans=np.zeros((2, 2)))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            Lattice(emit=np.zeros((2, 3)), trans=np.zeros((2, 2)))
