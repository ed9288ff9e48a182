"""Batched weighted A*: best-first search under f = weight*g + h where every
iteration pops a batch of lowest-f nodes and scores all their children's
heuristic values in a single batched call.

Heuristic providers are callables (domain, list of tile tuples) -> array of
values; adapters for learned models, oracle tables, the relaxation bound, and
the zero heuristic live here too.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import net
from .errors import InputError, InvalidStateError
from .oracle import OracleTable, _relax_tiles, backward_bfs
from .puzzle import (
    Direction,
    PuzzleDomain,
    PuzzleState,
    encode_batch,
    goal_tiles,
)

HeuristicFn = Callable[[PuzzleDomain, Sequence[tuple[int, ...]]], np.ndarray]


@dataclass(frozen=True)
class SearchConfig:
    weight: float = 0.8
    batch_size: int = 1000
    time_limit_secs: float = 200.0
    node_limit: int | None = None

    def __post_init__(self):
        if not 0.0 < self.weight <= 1.0:
            raise InputError(f"weight must be in (0, 1], got {self.weight}")
        if self.batch_size < 1:
            raise InputError("batch_size must be >= 1")


@dataclass
class SearchResult:
    solved: bool
    path: tuple[Direction, ...]
    cost: int
    nodes_generated: int
    wall_secs: float
    nodes_per_sec: float
    termination: str  # goal | exhausted | time_limit | node_limit


def zero_heuristic(domain: PuzzleDomain, tiles_list) -> np.ndarray:
    return np.zeros(len(tiles_list))


def relax_provider(domain: PuzzleDomain, tiles_list) -> np.ndarray:
    return np.array([_relax_tiles(domain, t) for t in tiles_list])


def oracle_heuristic(table: OracleTable) -> HeuristicFn:
    """Exact table lookups; states outside the table are unreachable (inf)."""

    def fn(domain: PuzzleDomain, tiles_list) -> np.ndarray:
        out = np.empty(len(tiles_list))
        for i, t in enumerate(tiles_list):
            v = table.cost_of_tiles(t)
            out[i] = math.inf if v is None else v
        return out

    return fn


def oracle_cache_heuristic(cap: int) -> HeuristicFn:
    """Like oracle_heuristic but builds (and caches) one table per domain."""
    tables: dict[str, OracleTable] = {}

    def fn(domain: PuzzleDomain, tiles_list) -> np.ndarray:
        table = tables.get(domain.domain_id)
        if table is None:
            table = backward_bfs(domain, cap=cap)
            tables[domain.domain_id] = table
        return oracle_heuristic(table)(domain, tiles_list)

    return fn


def model_heuristic(loaded: net.LoadedModel) -> HeuristicFn:
    def fn(domain: PuzzleDomain, tiles_list) -> np.ndarray:
        net.require_layout(loaded, domain.n, loaded.with_actions)
        enc = encode_batch(domain, list(tiles_list), loaded.with_actions)
        return loaded.model.forward(enc)

    return fn


_log = logging.getLogger(__name__)


def solve(
    domain: PuzzleDomain,
    start: PuzzleState,
    heuristic: HeuristicFn,
    config: SearchConfig = SearchConfig(),
) -> SearchResult:
    """Search from `start` to the goal. Ties on f break toward larger g, then
    FIFO, so batch_size=1 reproduces classic weighted A*. Duplicate states
    keep their lowest g and may be re-expanded when a cheaper path appears.
    Hitting the time or node limit yields an unsolved result, not an error.
    """
    if len(start.tiles) != domain.n * domain.n:
        raise InvalidStateError(
            f"start state has {len(start.tiles)} tiles for a {domain.n}x{domain.n} domain"
        )
    started = time.perf_counter()
    goal = goal_tiles(domain.n)
    moves = domain.moves
    counter = itertools.count()
    start_tiles = tuple(start.tiles)
    nodes_generated = 0

    def finish(solved: bool, path=(), cost=0, why="goal") -> SearchResult:
        wall = time.perf_counter() - started
        return SearchResult(
            solved=solved,
            path=tuple(path),
            cost=cost,
            nodes_generated=nodes_generated,
            wall_secs=wall,
            nodes_per_sec=nodes_generated / wall if wall > 0 else 0.0,
            termination=why,
        )

    h0 = float(heuristic(domain, [start_tiles])[0])
    if math.isinf(h0):
        return finish(False, why="exhausted")
    best_g = {start_tiles: 0}
    parent: dict[tuple[int, ...], tuple[tuple[int, ...], Direction] | None] = {
        start_tiles: None
    }
    heap = [(max(h0, 0.0), 0, next(counter), start_tiles, start.blank, 0)]

    while heap:
        if time.perf_counter() - started > config.time_limit_secs:
            return finish(False, why="time_limit")
        popped = []
        while heap and len(popped) < config.batch_size:
            f, negg, seq, tiles, blank, g = heapq.heappop(heap)
            if g != best_g.get(tiles):
                continue  # stale entry superseded by a cheaper path
            if tiles == goal:
                path = _reconstruct(parent, tiles)
                _validate_replay(domain, start, path, g)
                return finish(True, path=path, cost=g)
            popped.append((tiles, blank, g))
        if not popped:
            return finish(False, why="exhausted")

        pending: list[tuple[tuple[int, ...], int, int]] = []
        for tiles, blank, g in popped:
            g2 = g + 1
            for d, tgt in moves[blank]:
                child = list(tiles)
                child[blank] = child[tgt]
                child[tgt] = 0
                child = tuple(child)
                nodes_generated += 1
                if g2 < best_g.get(child, 1 << 60):
                    best_g[child] = g2
                    parent[child] = (tiles, d)
                    pending.append((child, tgt, g2))
        if pending:
            hs = heuristic(domain, [c[0] for c in pending])
            for (child, tgt, g2), h in zip(pending, hs):
                if math.isinf(h):
                    continue
                f2 = config.weight * g2 + max(float(h), 0.0)
                heapq.heappush(heap, (f2, -g2, next(counter), child, tgt, g2))
        if config.node_limit is not None and nodes_generated >= config.node_limit:
            return finish(False, why="node_limit")
    return finish(False, why="exhausted")


def _reconstruct(parent, tiles) -> tuple[Direction, ...]:
    path = []
    cursor = tiles
    while True:
        link = parent[cursor]
        if link is None:
            break
        prev, action = link
        path.append(action)
        cursor = prev
    path.reverse()
    return tuple(path)


def _validate_replay(domain, start, path, cost) -> None:
    tiles = list(start.tiles)
    blank = start.blank
    for d in path:
        tgt_options = dict(domain.moves[blank])
        assert d in tgt_options, "replay hit an illegal action"
        tgt = tgt_options[d]
        tiles[blank] = tiles[tgt]
        tiles[tgt] = 0
        blank = tgt
    assert tuple(tiles) == goal_tiles(domain.n), "replay did not reach the goal"
    assert len(path) == cost, "path length disagrees with reported cost"


@dataclass(frozen=True)
class SolveInstance:
    domain: PuzzleDomain
    start: PuzzleState
    optimal_cost: int | None = None
    instance_id: str = ""


@dataclass
class SuiteReport:
    """Aggregates in the shape of the benchmark table: Len, Opt, Nodes, Secs,
    Nodes/Sec, Solved."""

    results: list[tuple[SolveInstance, SearchResult]]
    solved_frac: float
    mean_len: float
    opt_frac: float | None
    mean_nodes: float
    mean_secs: float
    nodes_per_sec: float
    missing_optimum: int

    def row(self) -> dict:
        return {
            "Len": self.mean_len,
            "Opt": self.opt_frac,
            "Nodes": self.mean_nodes,
            "Secs": self.mean_secs,
            "Nodes/Sec": self.nodes_per_sec,
            "Solved": self.solved_frac,
        }


def solve_suite(
    instances: Iterable[SolveInstance],
    heuristic: HeuristicFn,
    config: SearchConfig = SearchConfig(),
) -> SuiteReport:
    """Run solve per instance and aggregate. Mean length runs over solved
    instances; optimality over solved instances with a known optimum (others
    are counted in missing_optimum)."""
    results = []
    for inst in instances:
        results.append((inst, solve(inst.domain, inst.start, heuristic, config)))
    if not results:
        raise InputError("empty instance suite")
    solved = [(inst, res) for inst, res in results if res.solved]
    with_opt = [(inst, res) for inst, res in solved if inst.optimal_cost is not None]
    missing = len(solved) - len(with_opt)
    if missing:
        _log.warning("%d solved instances lack oracle optima; excluded from Opt", missing)
    total_secs = sum(res.wall_secs for _, res in results)
    total_nodes = sum(res.nodes_generated for _, res in results)
    return SuiteReport(
        results=results,
        solved_frac=len(solved) / len(results),
        mean_len=float(np.mean([res.cost for _, res in solved])) if solved else float("nan"),
        opt_frac=(
            sum(res.cost == inst.optimal_cost for inst, res in with_opt) / len(with_opt)
            if with_opt
            else None
        ),
        mean_nodes=float(np.mean([res.nodes_generated for _, res in results])),
        mean_secs=float(np.mean([res.wall_secs for _, res in results])),
        nodes_per_sec=total_nodes / total_secs if total_secs > 0 else 0.0,
        missing_optimum=missing,
    )
