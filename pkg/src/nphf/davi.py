"""Deep approximate value iteration: scramble sampling over fresh random
domains, Bellman target computation against a frozen target network, the
training loop, and a tabular value-iteration reference for enumerable spaces.
"""

from __future__ import annotations

import csv
import logging
import random
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import net
from .domains import DomainSpec, from_spec, generate_random
from .errors import InputError, StateSpaceCapError, TrainingDivergedError
from .oracle import DEFAULT_STATE_CAP, OracleTable, _table_from_dist
from .puzzle import (
    PuzzleDomain,
    PuzzleState,
    encode_batch,
    encoded_length,
    goal_state,
    goal_tiles,
    random_walk,
)

logger = logging.getLogger(__name__)

MODES = ("action_conditioned", "ablation_no_actions", "fixed_domain")


@dataclass(frozen=True)
class TrainConfig:
    puzzle_n: int
    mode: str = "action_conditioned"
    fixed_domain_spec: DomainSpec | None = None
    max_scramble: int = 500
    batch_size: int = 1000
    total_examples: int = 2_000_000
    target_update_loss_threshold: float = 0.05
    loss_window: int = 10
    checkpoint_every: int = 100
    learning_rate: float = 1e-3
    inclusion_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise InputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "fixed_domain" and self.fixed_domain_spec is None:
            raise InputError("fixed_domain mode needs fixed_domain_spec")
        if self.max_scramble < 0:
            raise InputError("max_scramble must be >= 0")
        if self.batch_size < 1:
            raise InputError("batch_size must be >= 1")
        if self.total_examples < 0:
            raise InputError("total_examples must be >= 0")

    @property
    def with_actions(self) -> bool:
        """Only the action-conditioned mode feeds the domain block; a fixed
        domain would make it a constant input carrying no information."""
        return self.mode == "action_conditioned"

    @property
    def input_dim(self) -> int:
        return encoded_length(self.puzzle_n, self.with_actions)


@dataclass
class TrainItem:
    """One sampled training example before target computation."""

    domain: PuzzleDomain
    state: PuzzleState
    walk_len: int
    enc: np.ndarray


@dataclass
class TrainReport:
    loss_curve: list = field(default_factory=list)  # (step, examples, loss, target_updates, wall_secs)
    examples_seen: int = 0
    target_updates: int = 0
    wall_secs: float = 0.0
    single_worker: bool = True


def sample_batch(config: TrainConfig, rng: random.Random, size: int | None = None) -> list[TrainItem]:
    """Draw `size` scrambles. Fresh random domain per element in the
    conditioned and ablation modes; one shared domain in fixed mode. Walk
    lengths are uniform over [0, max_scramble]."""
    size = config.batch_size if size is None else size
    fixed = from_spec(config.fixed_domain_spec) if config.mode == "fixed_domain" else None
    goal = goal_state(config.puzzle_n)
    domains, tiles, states, lens = [], [], [], []
    for _ in range(size):
        if fixed is not None:
            domain = fixed
        else:
            domain = generate_random(
                DomainSpec(
                    config.puzzle_n,
                    "random",
                    seed=rng.getrandbits(48),
                    inclusion_prob=config.inclusion_prob,
                )
            )
        k = rng.randint(0, config.max_scramble)
        walk_seed = rng.getrandbits(48)
        if domain.moves[goal.blank]:
            state = random_walk(domain, k, rng_seed=walk_seed)
        else:
            state = goal  # walk cannot leave the goal; skip the warning path
        domains.append(domain)
        states.append(state)
        tiles.append(state.tiles)
        lens.append(k)
    enc = encode_batch(
        fixed if fixed is not None else domains, tiles, config.with_actions
    )
    return [
        TrainItem(d, s, k, enc[i])
        for i, (d, s, k) in enumerate(zip(domains, states, lens))
    ]


def compute_targets(
    target_model: net.HeuristicModel,
    items: list[TrainItem],
    with_actions: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Bellman backup per item: 0 at the goal, else min over permitted moves of
    1 + the target model's (non-negative-clamped) value of the successor.
    Every successor evaluation goes through one batched forward call.

    Returns (targets, keep): dead-end non-goal items get keep=False and are
    skipped by the caller.
    """
    batch = len(items)
    targets = np.zeros(batch, dtype=np.float32)
    keep = np.ones(batch, dtype=bool)
    succ_tiles: list[tuple[int, ...]] = []
    succ_domains: list[PuzzleDomain] = []
    spans: list[tuple[int, int, int]] = []  # (item index, start, stop)
    for idx, item in enumerate(items):
        goal = goal_tiles(item.domain.n)
        if item.state.tiles == goal:
            continue  # target stays 0
        acts = item.domain.moves[item.state.blank]
        if not acts:
            keep[idx] = False
            logger.warning(
                "dead-end state skipped: no permitted action at cell %d (domain %s)",
                item.state.blank,
                item.domain.domain_id,
            )
            continue
        start = len(succ_tiles)
        blank = item.state.blank
        tiles = item.state.tiles
        for _, tgt in acts:
            child = list(tiles)
            child[blank] = child[tgt]
            child[tgt] = 0
            succ_tiles.append(tuple(child))
            succ_domains.append(item.domain)
        spans.append((idx, start, len(succ_tiles)))
    if succ_tiles:
        enc = encode_batch(succ_domains, succ_tiles, with_actions)
        values = np.maximum(target_model.forward(enc), 0.0)
        for idx, start, stop in spans:
            targets[idx] = 1.0 + values[start:stop].min()
    return targets, keep


def train(
    config: TrainConfig,
    net_config: net.ModelConfig | None = None,
    checkpoint_path=None,
    log_path=None,
) -> tuple[net.HeuristicModel, TrainReport]:
    """Run DAVI until total_examples scrambles are consumed.

    The live model regresses on targets from a frozen copy that is refreshed
    whenever the running mean loss drops under the threshold. Deterministic
    for a given config (single-worker generation). On divergence the last
    checkpointed model is retained on the raised error.
    """
    if net_config is None:
        net_config = net.ModelConfig(input_dim=config.input_dim)
    elif net_config.input_dim != config.input_dim:
        raise InputError(
            f"net input_dim {net_config.input_dim} does not match the "
            f"encoding width {config.input_dim}"
        )
    rng = random.Random(config.seed)
    model = net.init(net_config, seed=rng.getrandbits(32))
    target = model.copy()
    optimizer = net.AdamState.for_model(model, lr=config.learning_rate)
    report = TrainReport()
    window: deque = deque(maxlen=config.loss_window)
    last_checkpoint = model.copy()
    log_file = open(log_path, "w", newline="") if log_path else None
    log_writer = None
    if log_file:
        log_writer = csv.writer(log_file)
        log_writer.writerow(["step", "examples", "loss", "target_updates", "wall_secs"])
    started = time.perf_counter()
    step = 0
    loss = float("nan")

    def checkpoint_row():
        wall = time.perf_counter() - started
        row = (step, report.examples_seen, loss, report.target_updates, wall)
        report.loss_curve.append(row)
        if log_writer:
            log_writer.writerow([step, report.examples_seen, f"{loss:.6f}", report.target_updates, f"{wall:.3f}"])
            log_file.flush()
        if checkpoint_path is not None:
            net.save_model(checkpoint_path, model, config.puzzle_n, config.with_actions)

    try:
        while report.examples_seen < config.total_examples:
            size = min(config.batch_size, config.total_examples - report.examples_seen)
            items = sample_batch(config, rng, size=size)
            targets, keep = compute_targets(target, items, config.with_actions)
            report.examples_seen += size
            step += 1
            if not keep.any():
                continue
            batch = np.stack([it.enc for it in items])[keep]
            try:
                loss = net.train_step(model, optimizer, batch, targets[keep])
            except TrainingDivergedError as exc:
                logger.error("training diverged at step %d; keeping last checkpoint", step)
                raise TrainingDivergedError(
                    str(exc), checkpoint=last_checkpoint, report=report
                ) from None
            window.append(loss)
            if sum(window) / len(window) < config.target_update_loss_threshold:
                target = model.copy()
                report.target_updates += 1
                window.clear()
            if step % config.checkpoint_every == 0:
                checkpoint_row()
                last_checkpoint = model.copy()
        if not report.loss_curve or report.loss_curve[-1][0] != step:
            checkpoint_row()
    finally:
        report.wall_secs = time.perf_counter() - started
        if log_file:
            log_file.close()
    return model, report


def tabular_vi(
    domain: PuzzleDomain,
    sweeps: int = 1000,
    cap: int = DEFAULT_STATE_CAP,
) -> OracleTable:
    """Synchronous value iteration over the goal's component with the goal
    pinned to 0; converges to exact distances (unit costs) and stops early at
    the fixpoint. Values start at 0 and only grow across sweeps."""
    if not domain.is_reversible:
        raise InputError("tabular_vi requires a reversibility-validated domain")
    n = domain.n
    m = n * n
    moves = domain.moves
    goal = goal_tiles(n)

    # enumerate the component and index successor lists
    index = {goal: 0}
    order = [(goal, m - 1)]
    head = 0
    while head < len(order):
        tiles, blank = order[head]
        head += 1
        for _, tgt in moves[blank]:
            child = list(tiles)
            child[blank] = child[tgt]
            child[tgt] = 0
            child = tuple(child)
            if child not in index:
                if len(index) >= cap:
                    raise StateSpaceCapError(f"goal component exceeds the state cap of {cap}")
                index[child] = len(order)
                order.append((child, tgt))

    count = len(order)
    max_deg = max((len(moves[blank]) for _, blank in order), default=0)
    succ = np.zeros((count, max(max_deg, 1)), dtype=np.int64)
    mask = np.zeros((count, max(max_deg, 1)), dtype=bool)
    for i, (tiles, blank) in enumerate(order):
        for k, (_, tgt) in enumerate(moves[blank]):
            child = list(tiles)
            child[blank] = child[tgt]
            child[tgt] = 0
            succ[i, k] = index[tuple(child)]
            mask[i, k] = True

    big = np.int64(1 << 40)
    values = np.zeros(count, dtype=np.int64)
    for _ in range(sweeps):
        candidate = np.where(mask, values[succ] + 1, big).min(axis=1)
        candidate = np.minimum(candidate, big)
        candidate[0] = 0  # goal pinned
        if np.array_equal(candidate, values):
            break
        values = candidate

    dist = {tiles: int(values[i]) for i, (tiles, _) in enumerate(order)}
    return _table_from_dist(domain, dist)
