import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nphf.domains import DomainSpec, generate_random, make_fixed
from nphf.errors import (
    IllegalActionError,
    InvalidDimensionError,
    InvalidStateError,
)
from nphf.puzzle import (
    Direction,
    PuzzleDomain,
    PuzzleState,
    apply_action,
    available_actions,
    encode,
    encode_batch,
    encoded_length,
    goal_state,
    is_goal,
    random_walk,
    state_from_text,
    state_to_text,
    target_cell,
)

domains_strategy = st.integers(min_value=0, max_value=2**32 - 1).map(
    lambda seed: generate_random(DomainSpec(3, "random", seed=seed))
)


class TestDirection:
    def test_reverse_pairs(self):
        pairs = {
            Direction.U: Direction.D,
            Direction.L: Direction.R,
            Direction.UL: Direction.DR,
            Direction.UR: Direction.DL,
        }
        for d, r in pairs.items():
            assert d.reverse == r
            assert r.reverse == d

    @given(st.sampled_from(list(Direction)))
    def test_reverse_involution_and_offset(self, d):
        assert d.reverse.reverse == d
        dr, dc = d.offset
        rr, rc = d.reverse.offset
        assert (rr, rc) == (-dr, -dc)

    def test_indices_fixed(self):
        assert [d.name for d in Direction] == ["U", "D", "L", "R", "UL", "UR", "DL", "DR"]
        assert [int(d) for d in Direction] == list(range(8))


class TestGoalState:
    def test_n2(self):
        s = goal_state(2)
        assert s.tiles == (1, 2, 3, 0)
        assert s.blank == 3

    def test_n3(self):
        s = goal_state(3)
        assert s.tiles == tuple(range(1, 9)) + (0,)
        assert s.blank == 8

    def test_invalid_dimension(self):
        with pytest.raises(InvalidDimensionError):
            goal_state(1)


class TestState:
    def test_not_a_permutation(self):
        with pytest.raises(InvalidStateError):
            PuzzleState((1, 1, 2, 0), 3)

    def test_blank_mismatch(self):
        with pytest.raises(InvalidStateError):
            PuzzleState((1, 2, 3, 0), 0)

    def test_from_tiles(self):
        s = PuzzleState.from_tiles([1, 0, 3, 2])
        assert s.blank == 1

    def test_text_round_trip(self):
        s = goal_state(3)
        assert state_to_text(s) == "1 2 3 4 5 6 7 8 0"
        assert state_from_text(state_to_text(s)) == s

    def test_text_rejects_non_square(self):
        with pytest.raises(InvalidStateError):
            state_from_text("1 2 0")


class TestAvailableActions:
    def test_full_map_center(self, all3):
        tiles = (1, 2, 3, 4, 0, 5, 6, 7, 8)
        state = PuzzleState(tiles, 4)
        assert available_actions(all3, state) == frozenset(Direction)

    def test_canonical_top_left(self, canonical3):
        tiles = (0, 1, 2, 3, 4, 5, 6, 7, 8)
        state = PuzzleState(tiles, 0)
        assert available_actions(canonical3, state) == frozenset({Direction.D, Direction.R})

    def test_empty_cell(self):
        empty = PuzzleDomain(2, (frozenset(),) * 4)
        assert available_actions(empty, goal_state(2)) == frozenset()


class TestApplyAction:
    def test_single_swap(self, canonical2):
        state, cost = apply_action(canonical2, goal_state(2), Direction.U)
        assert state.tiles == (1, 0, 3, 2)
        assert state.blank == 1
        assert cost == 1

    def test_input_unmodified(self, canonical2):
        start = goal_state(2)
        apply_action(canonical2, start, Direction.U)
        assert start.tiles == (1, 2, 3, 0)

    def test_off_grid_error(self, canonical3):
        top = PuzzleState((0, 1, 2, 3, 4, 5, 6, 7, 8), 0)
        with pytest.raises(IllegalActionError):
            apply_action(canonical3, top, Direction.U)

    def test_not_permitted_error(self, canonical3):
        top = PuzzleState((0, 1, 2, 3, 4, 5, 6, 7, 8), 0)
        with pytest.raises(IllegalActionError):
            apply_action(canonical3, top, Direction.DR)

    @settings(max_examples=40)
    @given(domain=domains_strategy, walk=st.integers(0, 30), seed=st.integers(0, 1000))
    def test_reverse_is_identity(self, domain, walk, seed):
        state = random_walk(domain, walk, rng_seed=seed)
        for d in available_actions(domain, state):
            mid, _ = apply_action(domain, state, d)
            back, _ = apply_action(domain, mid, d.reverse)
            assert back == state

    @settings(max_examples=40)
    @given(domain=domains_strategy, walk=st.integers(0, 30), seed=st.integers(0, 1000))
    def test_permutation_preserved(self, domain, walk, seed):
        state = random_walk(domain, walk, rng_seed=seed)
        assert sorted(state.tiles) == list(range(9))


class TestIsGoal:
    def test_goal(self):
        assert is_goal(goal_state(3))

    def test_after_move(self, canonical2):
        moved, _ = apply_action(canonical2, goal_state(2), Direction.U)
        assert not is_goal(moved)

    def test_swapped_tiles(self):
        assert not is_goal(PuzzleState((2, 1, 3, 4, 5, 6, 7, 8, 0), 8))


class TestRandomWalk:
    def test_zero_steps(self, canonical3):
        assert random_walk(canonical3, 0, rng_seed=5) == goal_state(3)

    def test_deterministic(self, canonical3):
        a = random_walk(canonical3, 100, rng_seed=42)
        b = random_walk(canonical3, 100, rng_seed=42)
        assert a == b

    def test_different_seeds_differ(self, canonical3):
        outs = {random_walk(canonical3, 50, rng_seed=s).tiles for s in range(16)}
        assert len(outs) > 1

    def test_dead_end_stops_early(self, caplog):
        empty = PuzzleDomain(2, (frozenset(),) * 4)
        with caplog.at_level(logging.WARNING):
            state = random_walk(empty, 5, rng_seed=0)
        assert state == goal_state(2)
        assert "stopped early" in caplog.text


class TestEncode:
    def test_lengths(self, canonical3):
        state = goal_state(3)
        assert encode(canonical3, state, with_actions=True).shape == (153,)
        assert encode(canonical3, state, with_actions=False).shape == (81,)
        assert encoded_length(3, True) == 153
        assert encoded_length(3, False) == 81

    def test_state_block_one_hot(self, canonical3):
        vec = encode(canonical3, goal_state(3), with_actions=False)
        assert vec.sum() == 9
        assert set(np.unique(vec)) == {0.0, 1.0}

    def test_domain_block_binary(self, canonical3):
        vec = encode(canonical3, goal_state(3), with_actions=True)
        block = vec[81:]
        assert set(np.unique(block)) <= {0.0, 1.0}
        # corner cell 0 allows D and R in the canonical map
        assert block[Direction.D] == 1.0 and block[Direction.R] == 1.0
        assert block[Direction.U] == 0.0

    def test_injective_on_states(self, canonical3):
        seen = {}
        for seed in range(64):
            state = random_walk(canonical3, 40, rng_seed=seed)
            key = encode(canonical3, state, with_actions=False).tobytes()
            if key in seen:
                assert seen[key] == state.tiles
            seen[key] = state.tiles

    def test_injective_on_domains(self):
        a = make_fixed(3, "canonical")
        b = make_fixed(3, "all")
        ea = encode(a, goal_state(3), with_actions=True)
        eb = encode(b, goal_state(3), with_actions=True)
        assert not np.array_equal(ea, eb)

    def test_batch_matches_single(self, canonical3):
        states = [random_walk(canonical3, k, rng_seed=k) for k in range(6)]
        batch = encode_batch(canonical3, [s.tiles for s in states], True)
        for row, state in zip(batch, states):
            assert np.array_equal(row, encode(canonical3, state, True))

    def test_batch_per_row_domains(self):
        doms = [make_fixed(3, "canonical"), make_fixed(3, "all")]
        tiles = [goal_state(3).tiles] * 2
        batch = encode_batch(doms, tiles, True)
        assert np.array_equal(batch[0], encode(doms[0], goal_state(3), True))
        assert np.array_equal(batch[1], encode(doms[1], goal_state(3), True))


class TestDomainJson:
    def test_round_trip_byte_exact(self, canonical3):
        text = canonical3.to_json()
        again = PuzzleDomain.from_json(text)
        assert again == canonical3
        assert again.to_json() == text

    def test_direction_order_is_by_index(self):
        dom = PuzzleDomain(
            2,
            (
                frozenset({Direction.DR, Direction.R, Direction.D}),
                frozenset({Direction.D, Direction.DL}),
                frozenset({Direction.R, Direction.U}),
                frozenset({Direction.U, Direction.L, Direction.UL}),
            ),
        )
        assert '["D", "R", "DR"]' in dom.to_json()

    def test_off_grid_rejected(self):
        with pytest.raises(IllegalActionError):
            PuzzleDomain(2, (frozenset({Direction.U}),) + (frozenset(),) * 3)

    def test_target_cell(self):
        assert target_cell(3, 0, Direction.R) == 1
        assert target_cell(3, 0, Direction.D) == 3
        assert target_cell(3, 0, Direction.U) is None
        assert target_cell(3, 4, Direction.DR) == 8
