"""Core n-puzzle types: grid domains with per-cell action sets, states, moves,
random-walk scrambles, and the flat model-input encoding.

Directions are the movement of the *blank* cell. The action set consulted for
a move is the one stored at the blank's current cell.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    IllegalActionError,
    InputError,
    InvalidDimensionError,
    InvalidStateError,
)

logger = logging.getLogger(__name__)

NUM_DIRECTIONS = 8


class Direction(IntEnum):
    """One of the eight blank-movement directions, with a fixed index."""

    U = 0
    D = 1
    L = 2
    R = 3
    UL = 4
    UR = 5
    DL = 6
    DR = 7

    @property
    def offset(self) -> tuple[int, int]:
        """(row, col) displacement of the blank."""
        return _OFFSETS[self]

    @property
    def reverse(self) -> "Direction":
        return _REVERSE[self]


_OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))
# U<->D, L<->R, UL<->DR, UR<->DL
_REVERSE = tuple(Direction(i) for i in (1, 0, 3, 2, 7, 6, 5, 4))

CANONICAL_DIRECTIONS = (Direction.U, Direction.D, Direction.L, Direction.R)
DIAGONAL_DIRECTIONS = (Direction.UL, Direction.UR, Direction.DL, Direction.DR)
ALL_DIRECTIONS = tuple(Direction)


def target_cell(n: int, cell: int, d: Direction) -> int | None:
    """Cell the blank lands on when moving in direction d, or None if off-grid."""
    r, c = divmod(cell, n)
    dr, dc = _OFFSETS[d]
    r2, c2 = r + dr, c + dc
    if 0 <= r2 < n and 0 <= c2 < n:
        return r2 * n + c2
    return None


@dataclass(frozen=True)
class PuzzleDomain:
    """Grid dimension plus, for every cell, the set of blank-movement
    directions permitted when the blank sits there."""

    n: int
    cells: tuple[frozenset[Direction], ...]

    def __post_init__(self):
        if self.n < 2:
            raise InvalidDimensionError(f"grid dimension must be >= 2, got {self.n}")
        m = self.n * self.n
        if len(self.cells) != m:
            raise InputError(f"expected {m} cell action sets, got {len(self.cells)}")
        for i, dirs in enumerate(self.cells):
            for d in dirs:
                if target_cell(self.n, i, d) is None:
                    raise IllegalActionError(
                        f"off-grid direction {Direction(d).name} stored at cell {i}"
                    )

    @cached_property
    def moves(self) -> tuple[tuple[tuple[Direction, int], ...], ...]:
        """Per cell: (direction, target cell) pairs in direction-index order."""
        return tuple(
            tuple((d, target_cell(self.n, i, d)) for d in sorted(dirs))
            for i, dirs in enumerate(self.cells)
        )

    @cached_property
    def is_reversible(self) -> bool:
        """True when every permitted move's reverse is permitted at its target."""
        for i, dirs in enumerate(self.cells):
            for d in dirs:
                if d.reverse not in self.cells[target_cell(self.n, i, d)]:
                    return False
        return True

    @cached_property
    def action_encoding(self) -> np.ndarray:
        """Flat (8*n*n,) 0/1 block: for each cell, one indicator per direction."""
        m = self.n * self.n
        block = np.zeros(NUM_DIRECTIONS * m, dtype=np.float32)
        for i, dirs in enumerate(self.cells):
            for d in dirs:
                block[i * NUM_DIRECTIONS + d] = 1.0
        return block

    def to_json(self) -> str:
        """Canonical JSON form; byte-stable for identical domains."""
        payload = {
            "n": self.n,
            "cells": [[d.name for d in sorted(dirs)] for dirs in self.cells],
        }
        return json.dumps(payload, separators=(", ", ": "))

    @classmethod
    def from_json(cls, text: str) -> "PuzzleDomain":
        try:
            payload = json.loads(text)
            n = payload["n"]
            raw_cells = payload["cells"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"malformed domain JSON: {exc}") from exc
        if not isinstance(n, int):
            raise InputError(f"domain dimension must be an integer, got {n!r}")
        try:
            cells = tuple(frozenset(Direction[name] for name in entry) for entry in raw_cells)
        except (KeyError, TypeError) as exc:
            raise InputError(f"bad direction name in domain JSON: {exc}") from exc
        return cls(n, cells)

    @cached_property
    def domain_id(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:12]


@dataclass(frozen=True)
class PuzzleState:
    """Tile permutation (0 = blank) with the blank's cell index cached."""

    tiles: tuple[int, ...]
    blank: int

    def __post_init__(self):
        m = len(self.tiles)
        if sorted(self.tiles) != list(range(m)):
            raise InvalidStateError(f"tiles {self.tiles} are not a permutation of 0..{m - 1}")
        if not (0 <= self.blank < m) or self.tiles[self.blank] != 0:
            raise InvalidStateError(f"blank index {self.blank} does not hold tile 0")

    @classmethod
    def from_tiles(cls, tiles: Iterable[int]) -> "PuzzleState":
        tiles = tuple(tiles)
        try:
            blank = tiles.index(0)
        except ValueError:
            raise InvalidStateError(f"tiles {tiles} contain no blank (0)") from None
        return cls(tiles, blank)

    @property
    def n(self) -> int:
        return int(round(len(self.tiles) ** 0.5))


def goal_tiles(n: int) -> tuple[int, ...]:
    return tuple(range(1, n * n)) + (0,)


def goal_state(n: int) -> PuzzleState:
    """Tiles in order with the blank in the bottom-right corner."""
    if n < 2:
        raise InvalidDimensionError(f"grid dimension must be >= 2, got {n}")
    return PuzzleState(goal_tiles(n), n * n - 1)


def is_goal(state: PuzzleState) -> bool:
    return state.tiles == goal_tiles(state.n)


def _check_state_for(domain: PuzzleDomain, state: PuzzleState) -> None:
    if len(state.tiles) != domain.n * domain.n:
        raise InvalidStateError(
            f"state has {len(state.tiles)} tiles but domain is {domain.n}x{domain.n}"
        )


def available_actions(domain: PuzzleDomain, state: PuzzleState) -> frozenset[Direction]:
    """Directions permitted at the blank's current cell."""
    _check_state_for(domain, state)
    return domain.cells[state.blank]


def apply_action(
    domain: PuzzleDomain, state: PuzzleState, d: Direction
) -> tuple[PuzzleState, int]:
    """Move the blank in direction d; returns (new state, transition cost).

    Pure: the input state is unmodified. Transition cost is the constant 1.
    """
    _check_state_for(domain, state)
    tgt = target_cell(domain.n, state.blank, d)
    if tgt is None:
        raise IllegalActionError(
            f"direction {Direction(d).name} moves the blank off-grid from cell {state.blank}"
        )
    if d not in domain.cells[state.blank]:
        raise IllegalActionError(
            f"direction {Direction(d).name} not permitted at cell {state.blank}"
        )
    tiles = list(state.tiles)
    tiles[state.blank] = tiles[tgt]
    tiles[tgt] = 0
    return PuzzleState(tuple(tiles), tgt), 1


def random_walk(domain: PuzzleDomain, steps: int, rng_seed: int) -> PuzzleState:
    """Apply `steps` uniformly random permitted moves starting from the goal.

    Deterministic for a given seed. If some state has no permitted move the
    walk stops there early (possible only in degenerate domains).
    """
    if steps < 0:
        raise InputError(f"walk length must be >= 0, got {steps}")
    if not domain.is_reversible:
        raise InputError("random_walk requires a reversibility-validated domain")
    rng = random.Random(rng_seed)
    m = domain.n * domain.n
    tiles = list(goal_tiles(domain.n))
    blank = m - 1
    moves = domain.moves
    for _ in range(steps):
        acts = moves[blank]
        if not acts:
            logger.warning(
                "random walk stopped early: no permitted action at cell %d", blank
            )
            break
        _, tgt = acts[rng.randrange(len(acts))]
        tiles[blank] = tiles[tgt]
        tiles[tgt] = 0
        blank = tgt
    return PuzzleState(tuple(tiles), blank)


def encoded_length(n: int, with_actions: bool) -> int:
    m = n * n
    return m * m + (NUM_DIRECTIONS * m if with_actions else 0)


def encode(domain: PuzzleDomain, state: PuzzleState, with_actions: bool) -> np.ndarray:
    """Flat float32 input vector: per-cell one-hot of the tile value, then
    (when with_actions) the domain's per-cell direction indicators."""
    _check_state_for(domain, state)
    m = domain.n * domain.n
    vec = np.zeros(encoded_length(domain.n, with_actions), dtype=np.float32)
    for cell, tile in enumerate(state.tiles):
        vec[cell * m + tile] = 1.0
    if with_actions:
        vec[m * m :] = domain.action_encoding
    return vec


def encode_batch(
    domains: PuzzleDomain | Sequence[PuzzleDomain],
    tiles_rows: Sequence[Sequence[int]],
    with_actions: bool,
) -> np.ndarray:
    """Vectorised encode over a batch. `domains` is either one domain shared by
    every row or a sequence aligned with `tiles_rows`."""
    tiles = np.asarray(tiles_rows, dtype=np.int64)
    if tiles.ndim != 2:
        raise InputError("tiles_rows must be a batch of flat tile arrays")
    batch, m = tiles.shape
    state_block = np.zeros((batch, m * m), dtype=np.float32)
    cols = np.arange(m)[None, :] * m + tiles
    state_block[np.arange(batch)[:, None], cols] = 1.0
    if not with_actions:
        return state_block
    if isinstance(domains, PuzzleDomain):
        dom_block = np.broadcast_to(domains.action_encoding, (batch, NUM_DIRECTIONS * m))
    else:
        if len(domains) != batch:
            raise InputError("one domain per batch row required")
        dom_block = np.stack([d.action_encoding for d in domains])
    return np.concatenate([state_block, dom_block], axis=1)


def state_to_text(state: PuzzleState) -> str:
    """Space-separated tile values, row-major, 0 = blank."""
    return " ".join(str(t) for t in state.tiles)


def state_from_text(text: str) -> PuzzleState:
    try:
        tiles = tuple(int(tok) for tok in text.split())
    except ValueError as exc:
        raise InvalidStateError(f"unparsable state text: {text!r}") from exc
    n = int(round(len(tiles) ** 0.5))
    if n * n != len(tiles) or n < 2:
        raise InvalidStateError(f"state text has {len(tiles)} tiles; not an n-puzzle")
    return PuzzleState.from_tiles(tiles)
