import numpy as np
import pytest

from telepathy.game.indexing import flatten, index_grid, strides, unflatten


def test_party_zero_is_most_significant():
    assert flatten([1, 0], [2, 3]) == 3
    assert flatten([0, 2], [2, 3]) == 2
    assert unflatten(5, [2, 3]) == (1, 2)


def test_index_grid_matches_c_order():
    grid = index_grid([2, 3, 2])
    assert grid.shape == (12, 3)
    for joint, row in enumerate(grid):
        assert flatten(row.tolist(), [2, 3, 2]) == joint
    assert np.array_equal(grid, np.array(np.unravel_index(np.arange(12), (2, 3, 2))).T)


def test_strides():
    assert strides([2, 3, 4]).tolist() == [12, 4, 1]


@pytest.mark.parametrize("indices, sizes", [([2, 0], [2, 3]), ([0], [2, 3]), ([-1, 0], [2, 3])])
def test_flatten_rejects_bad_indices(indices, sizes):
    with pytest.raises(ValueError):
        flatten(indices, sizes)


def test_unflatten_rejects_out_of_range():
    with pytest.raises(ValueError):
        unflatten(6, [2, 3])


@pytest.mark.parametrize("n_parties", range(1, 6))
def test_flatten_and_unflatten_are_inverse(n_parties):
    rng = np.random.default_rng(n_parties)
    sizes = [int(s) for s in rng.integers(1, 5, size=n_parties)]
    sizes[0] = 4
    total = int(np.prod(sizes))
    for joint in range(total):
        indices = unflatten(joint, sizes)
        assert all(0 <= k < s for k, s in zip(indices, sizes))
        assert flatten(indices, sizes) == joint
    assert unflatten(total - 1, sizes) == tuple(s - 1 for s in sizes)
