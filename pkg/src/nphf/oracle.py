"""Exact ground-truth cost-to-go: backward breadth-first search tables for
enumerable state spaces, spot exact A* for larger ones, and the admissible
single-tile relaxation heuristic that powers it."""

from __future__ import annotations

import heapq
import itertools
import math
import struct
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import (
    BudgetExceededError,
    CapacityError,
    CorruptOracleError,
    InputError,
    StateSpaceCapError,
)
from .puzzle import PuzzleDomain, PuzzleState, goal_tiles, target_cell

DEFAULT_STATE_CAP = 2_000_000
DEFAULT_NODE_BUDGET = 1_000_000

ORACLE_MAGIC = b"NPORACL1"
_UNREACHED = 10**9


def perm_rank(tiles) -> int:
    """Lexicographic rank of a permutation (Lehmer code)."""
    m = len(tiles)
    rank = 0
    for i in range(m):
        smaller = 0
        ti = tiles[i]
        for j in range(i + 1, m):
            if tiles[j] < ti:
                smaller += 1
        rank = rank * (m - i) + smaller
    return rank


def _perm_ranks(tiles_arr: np.ndarray) -> np.ndarray:
    """Vectorised perm_rank over rows. Fits 64 bits for m <= 16 (n <= 4)."""
    _, m = tiles_arr.shape
    ranks = np.zeros(tiles_arr.shape[0], dtype=np.uint64)
    for i in range(m):
        smaller = (tiles_arr[:, i + 1 :] < tiles_arr[:, i : i + 1]).sum(axis=1)
        ranks = ranks * np.uint64(m - i) + smaller.astype(np.uint64)
    return ranks


def state_key(tiles, n: int):
    """Canonical table key: 64-bit permutation rank up to the 15-puzzle,
    the raw tile bytes beyond."""
    if n <= 4:
        return perm_rank(tiles)
    return bytes(tiles)


@dataclass
class OracleTable:
    """Exact cost-to-go for every state in the goal's component of one domain.
    States absent from `entries` are unreachable from the goal."""

    domain_id: str
    n: int
    entries: dict = field(repr=False)

    def cost(self, state: PuzzleState) -> int | None:
        return self.entries.get(state_key(state.tiles, self.n))

    def cost_of_tiles(self, tiles) -> int | None:
        return self.entries.get(state_key(tiles, self.n))

    def __len__(self) -> int:
        return len(self.entries)

    def max_cost(self) -> int:
        return max(self.entries.values(), default=0)


def _require_validated(domain: PuzzleDomain) -> None:
    if not domain.is_reversible:
        raise InputError("operation requires a reversibility-validated domain")


def backward_bfs(domain: PuzzleDomain, cap: int = DEFAULT_STATE_CAP) -> OracleTable:
    """Breadth-first distances from the goal over the (undirected, because
    validated) state graph. Refuses once more than `cap` states are reached."""
    _require_validated(domain)
    n = domain.n
    m = n * n
    moves = domain.moves
    goal = goal_tiles(n)
    dist = {goal: 0}
    frontier: deque = deque()
    frontier.append((goal, m - 1, 0))
    while frontier:
        tiles, blank, d = frontier.popleft()
        nd = d + 1
        for _, tgt in moves[blank]:
            child = list(tiles)
            child[blank] = child[tgt]
            child[tgt] = 0
            child = tuple(child)
            if child not in dist:
                if len(dist) >= cap:
                    raise StateSpaceCapError(
                        f"goal component exceeds the state cap of {cap}"
                    )
                dist[child] = nd
                frontier.append((child, tgt, nd))
    return _table_from_dist(domain, dist)


def _table_from_dist(domain: PuzzleDomain, dist: dict) -> OracleTable:
    n = domain.n
    if n <= 4:
        arr = np.array(list(dist.keys()), dtype=np.int64)
        ranks = _perm_ranks(arr)
        entries = dict(zip(ranks.tolist(), dist.values()))
    else:
        entries = {bytes(tiles): v for tiles, v in dist.items()}
    return OracleTable(domain.domain_id, n, entries)


@lru_cache(maxsize=128)
def _cell_distances(domain: PuzzleDomain) -> tuple[tuple[int, ...], ...]:
    """All-pairs shortest paths between cells in the relaxed movement graph:
    edge i->j whenever some direction appearing in ANY cell's action set maps
    i to j. Unreachable pairs get a large sentinel."""
    n = domain.n
    m = n * n
    union_dirs = frozenset().union(*domain.cells) if domain.cells else frozenset()
    adj = []
    for i in range(m):
        targets = [target_cell(n, i, d) for d in union_dirs]
        adj.append([t for t in targets if t is not None])
    rows = []
    for src in range(m):
        d = [_UNREACHED] * m
        d[src] = 0
        q = deque([src])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if d[v] == _UNREACHED:
                    d[v] = d[u] + 1
                    q.append(v)
        rows.append(tuple(d))
    return tuple(rows)


def relax_heuristic(domain: PuzzleDomain, state: PuzzleState) -> float:
    """Admissible lower bound: the largest relaxed-graph distance any single
    tile still has to travel, ignoring all interactions. math.inf when a tile
    cannot reach its goal cell at all."""
    _require_validated(domain)
    return _relax_tiles(domain, state.tiles)


def _relax_tiles(domain: PuzzleDomain, tiles) -> float:
    dists = _cell_distances(domain)
    best = 0
    for cell, tile in enumerate(tiles):
        if tile == 0:
            continue
        dv = dists[cell][tile - 1]
        if dv >= _UNREACHED:
            return math.inf
        if dv > best:
            best = dv
    return float(best)


def exact_cost(
    domain: PuzzleDomain,
    state: PuzzleState,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> int | None:
    """Exact distance to the goal via A* under the admissible relaxation.

    Returns None when the goal is unreachable (component exhausted). Raises
    BudgetExceededError when `node_budget` expansions pass without an answer,
    which leaves reachability unknown.
    """
    _require_validated(domain)
    n = domain.n
    goal = goal_tiles(n)
    start = tuple(state.tiles)
    if start == goal:
        return 0
    h0 = _relax_tiles(domain, start)
    if math.isinf(h0):
        return None
    moves = domain.moves
    counter = itertools.count()
    best_g = {start: 0}
    heap = [(h0, next(counter), start, state.blank, 0)]
    expanded = 0
    while heap:
        f, _, tiles, blank, g = heapq.heappop(heap)
        if g > best_g.get(tiles, -1):
            continue
        if tiles == goal:
            return g
        expanded += 1
        if expanded > node_budget:
            raise BudgetExceededError(
                f"exact_cost exhausted its budget of {node_budget} expansions"
            )
        g2 = g + 1
        for _, tgt in moves[blank]:
            child = list(tiles)
            child[blank] = child[tgt]
            child[tgt] = 0
            child = tuple(child)
            if g2 < best_g.get(child, 1 << 60):
                h = _relax_tiles(domain, child)
                if math.isinf(h):
                    continue
                best_g[child] = g2
                heapq.heappush(heap, (g2 + h, next(counter), child, tgt, g2))
    return None


# -- on-disk table format ----------------------------------------------------
#
# magic "NPORACL1" | u32 LE domain-JSON byte length | domain JSON (UTF-8)
# | (u64 LE rank, u16 LE cost) pairs sorted by rank.

_PAIR_DTYPE = np.dtype([("rank", "<u8"), ("cost", "<u2")])


def write_oracle(path, domain: PuzzleDomain, table: OracleTable) -> None:
    if domain.n > 4:
        raise InputError("the binary table format covers ranked keys (n <= 4) only")
    if table.n != domain.n or table.domain_id != domain.domain_id:
        raise InputError("table does not belong to the given domain")
    max_cost = table.max_cost()
    if max_cost > 0xFFFF:
        raise CapacityError(f"cost {max_cost} exceeds the 16-bit table format")
    dom_json = domain.to_json().encode()
    pairs = np.zeros(len(table.entries), dtype=_PAIR_DTYPE)
    pairs["rank"] = np.fromiter(table.entries.keys(), dtype=np.uint64, count=len(table.entries))
    pairs["cost"] = np.fromiter(table.entries.values(), dtype=np.uint16, count=len(table.entries))
    pairs.sort(order="rank")
    with open(path, "wb") as fh:
        fh.write(ORACLE_MAGIC)
        fh.write(struct.pack("<I", len(dom_json)))
        fh.write(dom_json)
        fh.write(pairs.tobytes())


def read_oracle(path) -> tuple[PuzzleDomain, OracleTable]:
    blob = Path(path).read_bytes()
    if len(blob) < len(ORACLE_MAGIC) + 4 or blob[: len(ORACLE_MAGIC)] != ORACLE_MAGIC:
        raise CorruptOracleError(f"{path}: not an oracle table file")
    off = len(ORACLE_MAGIC)
    (json_len,) = struct.unpack_from("<I", blob, off)
    off += 4
    if len(blob) < off + json_len:
        raise CorruptOracleError(f"{path}: truncated domain header")
    domain = PuzzleDomain.from_json(blob[off : off + json_len].decode())
    off += json_len
    body = blob[off:]
    if len(body) % _PAIR_DTYPE.itemsize != 0:
        raise CorruptOracleError(f"{path}: truncated entry block")
    pairs = np.frombuffer(body, dtype=_PAIR_DTYPE)
    entries = dict(zip(pairs["rank"].tolist(), pairs["cost"].tolist()))
    return domain, OracleTable(domain.domain_id, domain.n, entries)
