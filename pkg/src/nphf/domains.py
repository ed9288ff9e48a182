"""Domain construction: the fixed canonical / diagonal / combined action maps
and randomized per-cell action maps validated for reversibility."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import InputError, InvalidDimensionError
from .puzzle import (
    ALL_DIRECTIONS,
    CANONICAL_DIRECTIONS,
    DIAGONAL_DIRECTIONS,
    Direction,
    PuzzleDomain,
    target_cell,
)

FIXED_KINDS = ("canonical", "diagonal", "all")
_KIND_DIRECTIONS = {
    "canonical": CANONICAL_DIRECTIONS,
    "diagonal": DIAGONAL_DIRECTIONS,
    "all": ALL_DIRECTIONS,
}


@dataclass(frozen=True)
class DomainSpec:
    """Recipe for a domain: a fixed kind, or a seeded random draw."""

    n: int
    kind: str
    seed: int | None = None
    inclusion_prob: float = 0.5

    def __post_init__(self):
        if self.kind not in FIXED_KINDS + ("random",):
            raise InputError(f"unknown domain kind {self.kind!r}")
        if not 0.0 <= self.inclusion_prob <= 1.0:
            raise InputError(f"inclusion_prob must be in [0, 1], got {self.inclusion_prob}")
        if self.kind == "random" and self.seed is None:
            raise InputError("random domains need a seed")


def make_fixed(n: int, kind: str) -> PuzzleDomain:
    """All in-grid directions of the chosen class at every cell. Reversible by
    construction (the class is closed under reversal)."""
    if kind not in FIXED_KINDS:
        raise InputError(f"fixed kind must be one of {FIXED_KINDS}, got {kind!r}")
    if n < 2:
        raise InvalidDimensionError(f"grid dimension must be >= 2, got {n}")
    dirs = _KIND_DIRECTIONS[kind]
    cells = tuple(
        frozenset(d for d in dirs if target_cell(n, i, d) is not None)
        for i in range(n * n)
    )
    return PuzzleDomain(n, cells)


def generate_random(spec: DomainSpec) -> PuzzleDomain:
    """Include each in-grid (cell, direction) slot independently with
    spec.inclusion_prob, then prune irreversible moves. Deterministic per seed."""
    if spec.kind != "random":
        raise InputError(f"generate_random needs kind 'random', got {spec.kind!r}")
    rng = random.Random(spec.seed)
    cells = []
    for i in range(spec.n * spec.n):
        kept = set()
        for d in Direction:
            if target_cell(spec.n, i, d) is None:
                continue
            if rng.random() < spec.inclusion_prob:
                kept.add(d)
        cells.append(frozenset(kept))
    return prune_irreversible(PuzzleDomain(spec.n, tuple(cells)))


def prune_irreversible(domain: PuzzleDomain) -> PuzzleDomain:
    """Drop every direction whose reverse is absent at its target cell.

    A single pass consulting the pre-pass sets reaches the fixpoint: a removal
    only deletes a direction whose reverse was already missing, which cannot
    invalidate any surviving pair.
    """
    n = domain.n
    out = []
    for i, dirs in enumerate(domain.cells):
        out.append(
            frozenset(
                d for d in dirs if d.reverse in domain.cells[target_cell(n, i, d)]
            )
        )
    return PuzzleDomain(n, tuple(out))


def count_free_slots(n: int) -> int:
    """Slot accounting for the domain family size: 8n^2 in total minus 2n^2
    reserved reversible slots."""
    if n < 2:
        raise InvalidDimensionError(f"grid dimension must be >= 2, got {n}")
    return 6 * n * n


def from_spec(spec: DomainSpec) -> PuzzleDomain:
    if spec.kind == "random":
        return generate_random(spec)
    return make_fixed(spec.n, spec.kind)
