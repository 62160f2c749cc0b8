import numpy as np
import pytest

from regime_atlas.grid import MappingGrid
from regime_atlas.transition import (
    effective_transition,
    global_switch,
    jaccard_matrix,
    pi_from_trajectory,
    series_switch,
)


def grid_from_labels(labels: np.ndarray, n_regimes: int) -> MappingGrid:
    labels = np.asarray(labels, dtype=int)
    ids = tuple(f"S{i}" for i in range(labels.shape[0]))
    return MappingGrid(n_regimes=n_regimes, window_size=5, ids=ids, labels=labels)


class TestGlobalSwitch:
    def test_jaccard_arithmetic(self):
        # cell 1 at stamp 0 = {0,1,2}; cell 2 at stamp 1 = {1,2,3}
        labels = np.array([[1, 1], [1, 2], [1, 2], [2, 2], [2, 1]])
        grid = grid_from_labels(labels, 2)
        q = global_switch(grid, 0)
        assert q.entries[1, 2] == pytest.approx(2 / 4)

    def test_identical_cells_give_one(self):
        labels = np.array([[1, 1], [1, 1], [2, 2]])
        q = global_switch(grid_from_labels(labels, 2), 0)
        assert q.entries[1, 1] == 1.0
        assert q.entries[2, 2] == 1.0

    def test_disjoint_cells_give_zero(self):
        labels = np.array([[1, 2], [1, 2]])
        q = global_switch(grid_from_labels(labels, 2), 0)
        assert q.entries[1, 1] == 0.0

    def test_empty_pair_convention(self):
        labels = np.array([[1, 1], [1, 1]])
        q = global_switch(grid_from_labels(labels, 3), 0)
        assert q.entries[2, 3] == 0.0  # both cells empty: 0/0 -> 0

    def test_set_symmetry(self, rng):
        labels = rng.integers(0, 4, size=(20, 2))
        grid = grid_from_labels(labels, 3)
        q = global_switch(grid, 0)
        flipped = grid_from_labels(labels[:, ::-1], 3)
        q2 = global_switch(flipped, 0)
        assert np.allclose(q.entries, q2.entries.T)

    def test_matches_slow_jaccard(self, rng):
        labels = rng.integers(0, 4, size=(15, 3))
        grid = grid_from_labels(labels, 3)
        for j in (0, 1):
            fast = global_switch(grid, j).entries
            slow = jaccard_matrix(grid.column(j), grid.column(j + 1))
            assert np.allclose(fast, slow)


class TestSeriesSwitch:
    def test_alternating_trajectory(self):
        pi = pi_from_trajectory(np.array([1, 2, 1, 2, 1]), 3)
        assert pi[1, 2] == pytest.approx(0.5)
        assert pi[2, 1] == pytest.approx(0.5)
        assert pi.sum() == pytest.approx(1.0)
        assert np.count_nonzero(pi) == 2

    def test_constant_trajectory(self):
        pi = pi_from_trajectory(np.array([3, 3, 3]), 4)
        assert pi[3, 3] == 1.0

    def test_total_mass_is_one(self, rng):
        for _ in range(20):
            traj = rng.integers(0, 5, size=int(rng.integers(2, 12)))
            pi = pi_from_trajectory(traj, 5)
            assert pi.sum() == pytest.approx(1.0)

    def test_short_trajectory_degenerates(self):
        pi = pi_from_trajectory(np.array([2]), 4)
        assert (pi == 0).all()

    def test_counts_reconstruct_exactly(self, rng):
        traj = rng.integers(0, 4, size=9)
        pi = pi_from_trajectory(traj, 4)
        counts = pi * (len(traj) - 1)
        assert np.allclose(counts, np.rint(counts))
        from regime_atlas.transition import pair_counts

        assert np.array_equal(np.rint(counts).astype(int), pair_counts(traj, 4).astype(int))

    def test_grid_view(self):
        labels = np.array([[1, 2, 1, 2, 1]])
        grid = grid_from_labels(labels, 2)
        pi = series_switch(grid, 0, 3)  # trajectory through stamp 4 (0-based 3+1)
        assert pi.entries[1, 2] == pytest.approx(0.5)
        assert pi.entries[2, 1] == pytest.approx(0.5)


class TestEffectiveTransition:
    def test_degenerate_denominator_gives_zeros(self):
        pi = np.zeros((3, 3))
        q = np.random.default_rng(0).random((3, 3))
        theta = effective_transition(pi, q)
        assert (theta == 0).all()

    def test_one_hot_composition(self):
        pi = np.zeros((3, 3))
        pi[1, 1] = 1.0
        q = np.eye(3)
        theta = effective_transition(pi, q)
        assert theta[1, 1] == 1.0
        assert theta.sum() == 1.0

    def test_matches_scalar_oracle(self, rng):
        pi = rng.random((4, 4))
        pi = pi / pi.sum()
        q = rng.random((4, 4))
        theta = effective_transition(pi, q)
        denom = sum(pi[a, b] * q[a, b] for a in range(4) for b in range(4))
        for a in range(4):
            for b in range(4):
                assert theta[a, b] == pytest.approx(pi[a, b] * q[a, b] / denom)

    def test_normalizes_on_random_pairs(self, rng):
        for _ in range(200):
            k1 = int(rng.integers(2, 7))
            pi = rng.random((k1, k1))
            pi = pi / pi.sum()
            q = rng.random((k1, k1))
            theta = effective_transition(pi, q)
            assert abs(theta.sum() - 1.0) < 1e-12
            assert (theta >= 0).all() and (theta <= 1).all()
