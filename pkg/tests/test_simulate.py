import numpy as np
import pytest

from docgaze.density import DensityMap
from docgaze.simulate import (
    GRID_COLS,
    GRID_ROWS,
    N_ACTIONS,
    WTAPolicy,
    cell_center,
    cell_to_rc,
    circular_mask,
    discretize,
    foveate_update,
    init_belief,
    point_to_cell,
    rc_to_cell,
    rollout,
    wta_policy,
)


def random_channels(rng, n=5):
    return rng.random((n, GRID_ROWS, GRID_COLS))


class TestDiscretize:
    def test_constant_map(self):
        grid = discretize(np.full((320, 480), 2.5))
        assert np.allclose(grid, 2.5)

    def test_impulse_cell_maximal(self):
        v = np.zeros((320, 480))
        v[8, 7] = 1.0  # inside cell (0, 0)
        grid = discretize(v)
        assert np.unravel_index(np.argmax(grid), grid.shape) == (0, 0)

    def test_matches_per_cell_mean(self, rng):
        v = rng.random((320, 480))
        grid = discretize(v)
        ch = 320 // GRID_ROWS
        cw = 480 // GRID_COLS
        for r in range(GRID_ROWS):
            for c in range(0, GRID_COLS, 7):
                want = v[r * ch:(r + 1) * ch, c * cw:(c + 1) * cw].mean()
                assert grid[r, c] == pytest.approx(want, rel=1e-12)

    def test_resizes_other_shapes(self, rng):
        grid = discretize(rng.random((160, 240)))
        assert grid.shape == (GRID_ROWS, GRID_COLS)


class TestBeliefState:
    def test_init_is_low_res(self, rng):
        low = random_channels(rng)
        lay = rng.random((GRID_ROWS, GRID_COLS))
        b = init_belief(low, lay)
        assert np.array_equal(b.component_channels, low)
        assert np.array_equal(b.layout, lay)
        assert b.t == 0 and not b.visited

    def test_zero_layout_accepted(self, rng):
        b = init_belief(random_channels(rng), np.zeros((GRID_ROWS, GRID_COLS)))
        assert b.layout.sum() == 0.0

    def test_wrong_channel_count(self, rng):
        with pytest.raises(ValueError):
            init_belief(rng.random((4, GRID_ROWS, GRID_COLS)),
                        np.zeros((GRID_ROWS, GRID_COLS)))


class TestFoveate:
    def test_full_grid_mask_equals_high(self, rng):
        b = init_belief(random_channels(rng), rng.random((GRID_ROWS, GRID_COLS)))
        high = random_channels(rng)
        b1 = foveate_update(b, 0, radius=1000, high_res=high)
        assert np.array_equal(b1.component_channels, high)

    def test_radius_zero_single_cell(self, rng):
        b = init_belief(random_channels(rng), rng.random((GRID_ROWS, GRID_COLS)))
        high = random_channels(rng)
        cell = rc_to_cell(10, 16)
        b1 = foveate_update(b, cell, radius=0, high_res=high)
        changed = np.any(b1.component_channels != b.component_channels,
                         axis=0)
        assert changed.sum() <= 1
        assert np.array_equal(b1.component_channels[:, 10, 16],
                              high[:, 10, 16])

    def test_outside_mask_bitwise_unchanged(self, rng):
        b = init_belief(random_channels(rng), rng.random((GRID_ROWS, GRID_COLS)))
        high = random_channels(rng)
        cell = rc_to_cell(5, 8)
        b1 = foveate_update(b, cell, radius=2, high_res=high)
        for r in range(GRID_ROWS):
            for c in range(GRID_COLS):
                if (r - 5) ** 2 + (c - 8) ** 2 > 4:
                    assert np.array_equal(b1.component_channels[:, r, c],
                                          b.component_channels[:, r, c])

    def test_layout_never_modified(self, rng):
        b = init_belief(random_channels(rng), rng.random((GRID_ROWS, GRID_COLS)))
        b1 = foveate_update(b, 33, radius=5, high_res=random_channels(rng))
        assert np.array_equal(b1.layout, b.layout)

    def test_idempotent_repeat(self, rng):
        b = init_belief(random_channels(rng), rng.random((GRID_ROWS, GRID_COLS)))
        high = random_channels(rng)
        b1 = foveate_update(b, 100, 2, high)
        b2 = foveate_update(b1, 100, 2, high)
        assert np.array_equal(b1.channels, b2.channels)

    def test_cumulative_masks(self, rng):
        # after t updates the high-res region is the union of the masks
        b = init_belief(np.zeros((5, GRID_ROWS, GRID_COLS)),
                        np.zeros((GRID_ROWS, GRID_COLS)))
        high = np.ones((5, GRID_ROWS, GRID_COLS))
        cells = [0, 300, 639]
        union = np.zeros((GRID_ROWS, GRID_COLS), dtype=bool)
        for cell in cells:
            b = foveate_update(b, cell, 2.0, high)
            union |= circular_mask(cell, 2.0)
        assert np.array_equal(b.component_channels[0] > 0, union)
        assert b.t == len(cells)
        assert b.visited == set(cells)

    def test_invalid_cell(self, rng):
        b = init_belief(random_channels(rng), np.zeros((GRID_ROWS, GRID_COLS)))
        with pytest.raises(ValueError):
            foveate_update(b, 640, 1, random_channels(rng))


class TestWta:
    def test_uniform_map_action_id_order(self):
        pol = WTAPolicy(np.ones((GRID_ROWS, GRID_COLS)))
        b = init_belief(np.zeros((5, GRID_ROWS, GRID_COLS)),
                        np.zeros((GRID_ROWS, GRID_COLS)))
        actions, _ = rollout(pol, b, np.zeros((5, GRID_ROWS, GRID_COLS)), 5,
                             rng_seed=0)
        assert actions == [0, 1, 2, 3, 4]

    def test_raster_map_raster_order(self):
        grid = np.arange(N_ACTIONS, 0, -1).reshape(GRID_ROWS, GRID_COLS)
        pol = WTAPolicy(grid.astype(float))
        b = init_belief(np.zeros((5, GRID_ROWS, GRID_COLS)),
                        np.zeros((GRID_ROWS, GRID_COLS)))
        actions, _ = rollout(pol, b, np.zeros((5, GRID_ROWS, GRID_COLS)), 4,
                             rng_seed=0)
        assert actions == [0, 1, 2, 3]

    def test_random_map_matches_argmax_exclusion_oracle(self, rng):
        grid = rng.random((GRID_ROWS, GRID_COLS))
        pol = WTAPolicy(grid)
        b = init_belief(np.zeros((5, GRID_ROWS, GRID_COLS)),
                        np.zeros((GRID_ROWS, GRID_COLS)))
        actions, _ = rollout(pol, b, np.zeros((5, GRID_ROWS, GRID_COLS)), 7,
                             rng_seed=1)
        flat = grid.ravel().copy()
        expected = []
        for _ in range(7):
            a = int(np.argmax(flat))
            expected.append(a)
            flat[a] = -np.inf
        assert actions == expected

    def test_wta_from_density_map(self, rng):
        v = rng.random((320, 480))
        pol = wta_policy(DensityMap(v))
        assert pol.scores.shape == (N_ACTIONS,)


class TestRollout:
    def test_top_cells_in_descending_order(self, rng):
        grid = rng.permutation(N_ACTIONS).astype(float).reshape(
            GRID_ROWS, GRID_COLS)
        pol = WTAPolicy(grid)
        b = init_belief(np.zeros((5, GRID_ROWS, GRID_COLS)),
                        np.zeros((GRID_ROWS, GRID_COLS)))
        actions, _ = rollout(pol, b, np.zeros((5, GRID_ROWS, GRID_COLS)), 7,
                             rng_seed=0)
        values = [grid.ravel()[a] for a in actions]
        assert values == sorted(values, reverse=True)

    def test_same_seed_identical(self, rng):
        high = random_channels(rng)
        b = init_belief(high * 0.5, rng.random((GRID_ROWS, GRID_COLS)))

        class SoftmaxPolicy:
            def action_distribution(self, state):
                z = state.component_channels.sum(axis=0).ravel()
                mask = state.visited_mask()
                z = np.where(mask, -np.inf, z)
                e = np.where(mask, 0, np.exp(z - z[~mask].max()))
                return e / e.sum()

        a1, sp1 = rollout(SoftmaxPolicy(), b, high, 7, rng_seed=9)
        a2, sp2 = rollout(SoftmaxPolicy(), b, high, 7, rng_seed=9)
        assert a1 == a2
        assert sp1.points().tobytes() == sp2.points().tobytes()

    def test_no_repeats_ior(self, rng):
        high = random_channels(rng)
        b = init_belief(high, rng.random((GRID_ROWS, GRID_COLS)))
        pol = WTAPolicy(rng.random((GRID_ROWS, GRID_COLS)))
        for seed in range(20):
            actions, _ = rollout(pol, b, high, 7, rng_seed=seed)
            assert len(set(actions)) == 7

    def test_sampling_frequencies_match_distribution(self):
        # length-1 rollouts follow the policy's multinomial distribution
        rng = np.random.default_rng(0)
        probs = rng.dirichlet(np.ones(N_ACTIONS))

        class FixedPolicy:
            def action_distribution(self, state):
                return probs

        b = init_belief(np.zeros((5, GRID_ROWS, GRID_COLS)),
                        np.zeros((GRID_ROWS, GRID_COLS)))
        n = 100_000
        counts = np.zeros(N_ACTIONS)
        high = np.zeros((5, GRID_ROWS, GRID_COLS))
        for seed in range(n):
            actions, _ = rollout(FixedPolicy(), b, high, 1, rng_seed=seed)
            counts[actions[0]] += 1
        freq = counts / n
        sigma = np.sqrt(probs * (1 - probs) / n)
        # 3-sigma multinomial bound per cell, allowing a few random misses
        within = np.abs(freq - probs) <= 3 * sigma + 1e-12
        assert within.mean() > 0.99

    def test_t_bounds(self, rng):
        b = init_belief(random_channels(rng), np.zeros((GRID_ROWS, GRID_COLS)))
        pol = WTAPolicy(rng.random((GRID_ROWS, GRID_COLS)))
        with pytest.raises(ValueError):
            rollout(pol, b, random_channels(rng), 0)
        with pytest.raises(ValueError):
            rollout(pol, b, random_channels(rng), N_ACTIONS + 1)


class TestGridMapping:
    def test_cell_center_round_trip(self):
        for cell in (0, 17, 333, 639):
            x, y = cell_center(cell, 480, 320)
            assert point_to_cell(x, y, 480, 320) == cell

    def test_rc_round_trip(self):
        for cell in range(0, N_ACTIONS, 13):
            assert rc_to_cell(*cell_to_rc(cell)) == cell
