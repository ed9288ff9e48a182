import heapq
import itertools
import math

import numpy as np
import pytest

from nphf import net
from nphf.domains import DomainSpec, generate_random, make_fixed
from nphf.errors import InputError, InvalidStateError
from nphf.oracle import backward_bfs
from nphf.puzzle import PuzzleState, goal_state, goal_tiles, random_walk
from nphf.search import (
    SearchConfig,
    SolveInstance,
    model_heuristic,
    oracle_cache_heuristic,
    oracle_heuristic,
    relax_provider,
    solve,
    solve_suite,
    zero_heuristic,
)


def classic_wastar(domain, start, heuristic, weight):
    """Unbatched reference: identical priorities and tie-breaking, one pop and
    one heuristic call per expansion."""
    goal = goal_tiles(domain.n)
    moves = domain.moves
    counter = itertools.count()
    start_tiles = tuple(start.tiles)
    best_g = {start_tiles: 0}
    h0 = max(float(heuristic(domain, [start_tiles])[0]), 0.0)
    heap = [(h0, 0, next(counter), start_tiles, start.blank, 0)]
    while heap:
        f, negg, seq, tiles, blank, g = heapq.heappop(heap)
        if g != best_g.get(tiles):
            continue
        if tiles == goal:
            return g
        g2 = g + 1
        for d, tgt in moves[blank]:
            child = list(tiles)
            child[blank] = child[tgt]
            child[tgt] = 0
            child = tuple(child)
            if g2 < best_g.get(child, 1 << 60):
                h = float(heuristic(domain, [child])[0])
                if math.isinf(h):
                    continue
                best_g[child] = g2
                heapq.heappush(heap, (weight * g2 + max(h, 0.0), -g2, next(counter), child, tgt, g2))
    return None


@pytest.fixture(scope="module")
def table2(canonical2):
    return backward_bfs(canonical2)


@pytest.fixture(scope="module")
def table3(canonical3):
    return backward_bfs(canonical3)


class TestSolve:
    def test_start_is_goal(self, canonical3):
        res = solve(canonical3, goal_state(3), zero_heuristic)
        assert res.solved and res.path == () and res.cost == 0
        assert res.nodes_generated == 0

    def test_oracle_heuristic_is_optimal_everywhere_2x2(self, canonical2, table2):
        hfn = oracle_heuristic(table2)
        cfg = SearchConfig(weight=1.0, batch_size=4)
        from nphf.puzzle import apply_action, available_actions

        frontier = [goal_state(2)]
        seen = {frontier[0].tiles: frontier[0]}
        while frontier:
            nxt = []
            for s in frontier:
                for d in available_actions(canonical2, s):
                    c, _ = apply_action(canonical2, s, d)
                    if c.tiles not in seen:
                        seen[c.tiles] = c
                        nxt.append(c)
            frontier = nxt
        for state in seen.values():
            res = solve(canonical2, state, hfn, cfg)
            assert res.solved and res.cost == table2.cost(state)

    def test_oracle_heuristic_sampled_3x3(self, canonical3, table3):
        hfn = oracle_heuristic(table3)
        cfg = SearchConfig(weight=1.0, batch_size=1000)
        for seed in range(20):
            state = random_walk(canonical3, 120, rng_seed=seed)
            res = solve(canonical3, state, hfn, cfg)
            assert res.solved and res.cost == table3.cost(state)

    def test_zero_heuristic_matches_bfs(self, canonical2, table2):
        cfg = SearchConfig(weight=1.0, batch_size=3)
        for seed in range(10):
            state = random_walk(canonical2, 9, rng_seed=seed)
            res = solve(canonical2, state, zero_heuristic, cfg)
            assert res.solved and res.cost == table2.cost(state)

    def test_relax_heuristic_remains_optimal_at_weight_one(self, canonical3, table3):
        cfg = SearchConfig(weight=1.0, batch_size=100)
        for seed in range(6):
            state = random_walk(canonical3, 30, rng_seed=seed)
            res = solve(canonical3, state, relax_provider, cfg)
            assert res.solved and res.cost == table3.cost(state)

    @pytest.mark.parametrize("weight", [1.0, 0.8])
    def test_batch_one_matches_classic(self, weight, table3, canonical3):
        hfn = oracle_heuristic(table3)
        cfg = SearchConfig(weight=weight, batch_size=1)
        for seed in range(8):
            state = random_walk(canonical3, 80, rng_seed=seed)
            res = solve(canonical3, state, hfn, cfg)
            ref = classic_wastar(canonical3, state, hfn, weight)
            assert res.solved and res.cost == ref

    def test_batched_weighted_solves_random_domain(self):
        dom = generate_random(DomainSpec(3, "random", seed=77))
        table = backward_bfs(dom)
        hfn = oracle_heuristic(table)
        cfg = SearchConfig(weight=0.8, batch_size=50)
        for seed in range(10):
            state = random_walk(dom, 60, rng_seed=seed)
            res = solve(dom, state, hfn, cfg)
            assert res.solved

    def test_replay_contract(self, canonical3, table3):
        from nphf.puzzle import apply_action

        state = random_walk(canonical3, 60, rng_seed=4)
        res = solve(canonical3, state, oracle_heuristic(table3), SearchConfig(weight=0.8))
        cursor = state
        for d in res.path:
            cursor, _ = apply_action(canonical3, cursor, d)
        assert cursor == goal_state(3)
        assert len(res.path) == res.cost

    def test_node_limit_unsolved(self, canonical3, table3):
        state = random_walk(canonical3, 200, rng_seed=3)
        res = solve(canonical3, state, zero_heuristic, SearchConfig(weight=1.0, node_limit=10))
        assert not res.solved and res.termination == "node_limit"

    def test_time_limit_unsolved(self, canonical3):
        state = random_walk(canonical3, 200, rng_seed=3)
        res = solve(canonical3, state, zero_heuristic, SearchConfig(weight=1.0, time_limit_secs=0.0))
        assert not res.solved and res.termination == "time_limit"

    def test_unreachable_start_exhausts(self, canonical2, table2):
        swapped = PuzzleState((2, 1, 3, 0), 3)
        res = solve(canonical2, swapped, zero_heuristic, SearchConfig(weight=1.0))
        assert not res.solved and res.termination == "exhausted"

    def test_invalid_start_rejected(self, canonical3):
        with pytest.raises(InvalidStateError):
            solve(canonical3, goal_state(2), zero_heuristic)

    def test_config_validation(self):
        with pytest.raises(InputError):
            SearchConfig(weight=0.0)
        with pytest.raises(InputError):
            SearchConfig(weight=1.2)
        with pytest.raises(InputError):
            SearchConfig(batch_size=0)

    def test_nodes_accounting_monotone_in_depth(self, canonical3, table3):
        cfg = SearchConfig(weight=1.0, batch_size=1)
        hfn = oracle_heuristic(table3)
        near = solve(canonical3, random_walk(canonical3, 2, rng_seed=0), hfn, cfg)
        far = solve(canonical3, random_walk(canonical3, 300, rng_seed=0), hfn, cfg)
        assert near.solved and far.solved
        assert far.nodes_generated >= near.nodes_generated

    def test_model_heuristic_plumbs_through(self, canonical2, table2):
        cfg = net.ModelConfig(input_dim=16, first_hidden=8, block_width=4, num_blocks=0)
        loaded = net.LoadedModel(net.zeros(cfg), 2, False)
        res = solve(canonical2, random_walk(canonical2, 6, rng_seed=1), model_heuristic(loaded), SearchConfig(weight=1.0, batch_size=4))
        assert res.solved and res.cost == table2.cost(random_walk(canonical2, 6, rng_seed=1))


class TestSolveSuite:
    def test_suite_of_goals(self, canonical3):
        instances = [SolveInstance(canonical3, goal_state(3), 0, str(i)) for i in range(5)]
        report = solve_suite(instances, zero_heuristic)
        assert report.solved_frac == 1.0
        assert report.mean_len == 0.0
        assert report.opt_frac == 1.0

    def test_oracle_suite_full_opt(self, canonical3, table3):
        instances = [
            SolveInstance(
                canonical3,
                random_walk(canonical3, 100, rng_seed=s),
                table3.cost(random_walk(canonical3, 100, rng_seed=s)),
                str(s),
            )
            for s in range(15)
        ]
        report = solve_suite(instances, oracle_heuristic(table3), SearchConfig(weight=1.0))
        assert report.solved_frac == 1.0
        assert report.opt_frac == 1.0

    def test_missing_optimum_excluded(self, canonical3, table3):
        instances = [
            SolveInstance(canonical3, goal_state(3), 0, "a"),
            SolveInstance(canonical3, random_walk(canonical3, 4, rng_seed=1), None, "b"),
        ]
        report = solve_suite(instances, oracle_heuristic(table3), SearchConfig(weight=1.0))
        assert report.missing_optimum == 1
        assert report.opt_frac == 1.0

    def test_empty_suite_rejected(self):
        with pytest.raises(InputError):
            solve_suite([], zero_heuristic)

    def test_oracle_cache_heuristic(self, canonical2, table2):
        hfn = oracle_cache_heuristic(cap=10_000)
        state = random_walk(canonical2, 7, rng_seed=5)
        res = solve(canonical2, state, hfn, SearchConfig(weight=1.0, batch_size=2))
        assert res.solved and res.cost == table2.cost(state)
