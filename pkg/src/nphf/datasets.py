"""Test-set construction (the data1/data2/data3 walk protocols) with exact
oracle labels, JSONL persistence, and model evaluation against those labels.
"""

from __future__ import annotations

import csv
import json
import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import net
from .domains import FIXED_KINDS, DomainSpec, from_spec, generate_random, make_fixed
from .errors import (
    BudgetExceededError,
    DimensionMismatchError,
    InputError,
    StateSpaceCapError,
)
from .metrics import MetricPairSet, ccc, r_squared
from .oracle import DEFAULT_STATE_CAP, backward_bfs, exact_cost
from .puzzle import PuzzleDomain, PuzzleState, encode_batch, goal_state, random_walk

logger = logging.getLogger(__name__)

PROTOCOLS = ("data1", "data2", "data3")


@dataclass(frozen=True)
class DatasetSpec:
    """Which domains to draw, how many states per domain, and the walk-length
    range used to scramble each state."""

    n: int
    states_per_domain: int
    walk_min: int
    walk_max: int
    seed: int
    fixed_kinds: tuple[str, ...] = ()
    num_random_domains: int = 0
    inclusion_prob: float = 0.5
    protocol: str = "custom"

    def __post_init__(self):
        if not 0 <= self.walk_min <= self.walk_max:
            raise InputError(f"need 0 <= walk_min <= walk_max, got [{self.walk_min}, {self.walk_max}]")
        if self.states_per_domain < 1:
            raise InputError("states_per_domain must be >= 1")
        for kind in self.fixed_kinds:
            if kind not in FIXED_KINDS:
                raise InputError(f"unknown fixed kind {kind!r}")
        if not self.fixed_kinds and self.num_random_domains == 0:
            raise InputError("dataset needs at least one domain")


def spec_for_protocol(protocol: str, n: int, seed: int, **overrides) -> DatasetSpec:
    """The paper-shaped defaults: data1 = 500 states per fixed domain with
    1000..10000-step walks; data2 = 100 states across 500 random domains with
    0..500-step walks; data3 = 1500 states per fixed domain, 0..500 steps."""
    if protocol == "data1":
        base = dict(fixed_kinds=FIXED_KINDS, states_per_domain=500, walk_min=1000, walk_max=10000)
    elif protocol == "data2":
        base = dict(num_random_domains=500, states_per_domain=100, walk_min=0, walk_max=500)
    elif protocol == "data3":
        base = dict(fixed_kinds=FIXED_KINDS, states_per_domain=1500, walk_min=0, walk_max=500)
    else:
        raise InputError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
    base.update(overrides)
    return DatasetSpec(n=n, seed=seed, protocol=protocol, **base)


@dataclass(frozen=True)
class DatasetRecord:
    domain_file: str
    tiles: tuple[int, ...]
    walk_len: int
    opt_cost: int | None

    def to_json(self) -> str:
        return json.dumps(
            {
                "domain_file": self.domain_file,
                "tiles": list(self.tiles),
                "walk_len": self.walk_len,
                "opt_cost": self.opt_cost,
            },
            separators=(", ", ": "),
        )


@dataclass
class DatasetBuild:
    jsonl_path: Path
    records: list[DatasetRecord]
    domain_paths: dict[str, Path]  # domain_id -> file
    unresolved_dropped: int


def _build_domain_records(args):
    """Worker: all records for one domain. Costs: full table for n <= 3,
    budgeted exact search for n = 4, absent beyond."""
    domain_json, domain_file, n, walk_seeds, walk_lens, oracle_cap, exact_budget = args
    domain = PuzzleDomain.from_json(domain_json)
    records = []
    unresolved = 0
    table = None
    if n <= 3:
        try:
            table = backward_bfs(domain, cap=oracle_cap)
        except StateSpaceCapError:
            logger.warning("oracle cap exceeded for domain %s; its states are dropped", domain.domain_id)
            return domain.domain_id, [], len(walk_seeds)
    goal = goal_state(n)
    stuck_at_goal = not domain.moves[goal.blank]
    for walk_seed, k in zip(walk_seeds, walk_lens):
        # a goal cell without actions pins every walk to the goal
        state = goal if stuck_at_goal else random_walk(domain, k, rng_seed=walk_seed)
        if n <= 3:
            cost = table.cost(state)
        elif n == 4:
            try:
                cost = exact_cost(domain, state, node_budget=exact_budget)
            except BudgetExceededError:
                unresolved += 1
                continue
            if cost is None:
                unresolved += 1
                continue
        else:
            cost = None
        records.append(
            DatasetRecord(domain_file, state.tiles, k, int(cost) if cost is not None else None)
        )
    return domain.domain_id, records, unresolved


def build_dataset(
    spec: DatasetSpec,
    out_dir,
    jsonl_name: str = "data.jsonl",
    oracle_cap: int = DEFAULT_STATE_CAP,
    exact_budget: int = 200_000,
    workers: int = 1,
) -> DatasetBuild:
    """Write domain files plus one JSONL of scrambled, oracle-labelled states.

    Deterministic for a given spec: record order is canonical (domain id,
    then record index) regardless of worker count.
    """
    out_dir = Path(out_dir)
    (out_dir / "domains").mkdir(parents=True, exist_ok=True)
    rng = random.Random(spec.seed)

    domains: list[tuple[PuzzleDomain, str]] = []
    for kind in spec.fixed_kinds:
        domains.append((make_fixed(spec.n, kind), f"domains/domain_{kind}.json"))
    for _ in range(spec.num_random_domains):
        dseed = rng.getrandbits(48)
        dom = generate_random(
            DomainSpec(spec.n, "random", seed=dseed, inclusion_prob=spec.inclusion_prob)
        )
        domains.append((dom, f"domains/domain_{dseed}.json"))

    jobs = []
    domain_paths: dict[str, Path] = {}
    for domain, rel in domains:
        path = out_dir / rel
        path.write_text(domain.to_json() + "\n")
        domain_paths[domain.domain_id] = path
        walk_seeds = [rng.getrandbits(48) for _ in range(spec.states_per_domain)]
        walk_lens = [rng.randint(spec.walk_min, spec.walk_max) for _ in range(spec.states_per_domain)]
        jobs.append(
            (domain.to_json(), rel, spec.n, walk_seeds, walk_lens, oracle_cap, exact_budget)
        )

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_build_domain_records, jobs))
    else:
        raw = [_build_domain_records(job) for job in jobs]

    unresolved = sum(u for _, _, u in raw)
    if unresolved:
        logger.warning("dropped %d states without a resolved exact cost", unresolved)
    ordered: list[DatasetRecord] = []
    for _, records, _ in sorted(raw, key=lambda item: item[0]):
        ordered.extend(records)

    jsonl_path = out_dir / jsonl_name
    with open(jsonl_path, "w") as fh:
        for record in ordered:
            fh.write(record.to_json() + "\n")
    return DatasetBuild(jsonl_path, ordered, domain_paths, unresolved)


def load_dataset(jsonl_path) -> list[DatasetRecord]:
    jsonl_path = Path(jsonl_path)
    records = []
    with open(jsonl_path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                records.append(
                    DatasetRecord(
                        domain_file=row["domain_file"],
                        tiles=tuple(row["tiles"]),
                        walk_len=int(row["walk_len"]),
                        opt_cost=None if row["opt_cost"] is None else int(row["opt_cost"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{jsonl_path}:{line_no}: bad dataset record: {exc}") from exc
    return records


class DomainCache:
    """Loads and memoises the domain files a dataset refers to."""

    def __init__(self, base_dir):
        self.base_dir = Path(base_dir)
        self._by_file: dict[str, PuzzleDomain] = {}

    def get(self, domain_file: str) -> PuzzleDomain:
        domain = self._by_file.get(domain_file)
        if domain is None:
            path = self.base_dir / domain_file
            if not path.exists():
                raise InputError(f"dataset refers to missing domain file {path}")
            domain = PuzzleDomain.from_json(path.read_text())
            self._by_file[domain_file] = domain
        return domain


def evaluate_model(
    loaded: net.LoadedModel,
    records: list[DatasetRecord],
    base_dir,
    scatter_path=None,
) -> tuple[MetricPairSet, dict]:
    """Score every oracle-labelled record in one batched forward pass and
    compute CCC and R^2 against the exact costs. Optionally writes the
    scatter CSV (y, yhat, domain_id, walk_len)."""
    cache = DomainCache(base_dir)
    labelled = [r for r in records if r.opt_cost is not None]
    skipped = len(records) - len(labelled)
    if skipped:
        logger.warning("%d records lack oracle costs and are excluded from metrics", skipped)
    if len(labelled) < 2:
        raise InputError("need at least 2 oracle-labelled records to evaluate")
    domains = [cache.get(r.domain_file) for r in labelled]
    for r, d in zip(labelled, domains):
        if len(r.tiles) != d.n * d.n:
            raise InputError(f"record tiles do not match domain {r.domain_file}")
    n = domains[0].n
    if any(d.n != n for d in domains):
        raise InputError("mixed puzzle sizes in one dataset")
    net.require_layout(loaded, n, loaded.with_actions)
    enc = encode_batch(domains, [r.tiles for r in labelled], loaded.with_actions)
    if enc.shape[1] != loaded.model.config.input_dim:
        raise DimensionMismatchError(
            f"encoded width {enc.shape[1]} does not match model input {loaded.model.config.input_dim}"
        )
    yhat = loaded.model.forward(enc).astype(np.float64)
    y = np.array([r.opt_cost for r in labelled], dtype=np.float64)
    pairs = MetricPairSet(
        y=y,
        yhat=yhat,
        domain_ids=tuple(d.domain_id for d in domains),
        walk_lens=tuple(r.walk_len for r in labelled),
    )
    result = {
        "ccc": ccc(y, yhat),
        "r_squared": r_squared(y, yhat),
        "count": len(labelled),
        "skipped_no_oracle": skipped,
    }
    if scatter_path is not None:
        write_scatter(scatter_path, pairs)
    return pairs, result


def write_scatter(path, pairs: MetricPairSet) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "yhat", "domain_id", "walk_len"])
        for y, yh, dom, wl in zip(pairs.y, pairs.yhat, pairs.domain_ids, pairs.walk_lens):
            writer.writerow([repr(float(y)), repr(float(yh)), dom, wl])
