"""Single command-line entry point for the whole pipeline.

Subcommands: gen-domain, gen-domains, oracle, gen-data, train, solve, eval,
bench, gradcheck, vi. Exit codes: 0 success, 1 bad input, 2 capacity or
budget exceeded, 64 usage errors. Every run writes one manifest next to its
outputs, and all randomness in a run derives from its --seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

from . import davi, datasets, net, search
from .domains import DomainSpec, from_spec
from .errors import CapacityError, NPuzzleError
from .manifest import manifest_for, write_manifest
from .oracle import DEFAULT_STATE_CAP, backward_bfs, read_oracle, write_oracle
from .puzzle import PuzzleDomain, PuzzleState

USAGE_EXIT = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("NPHF_WORKERS", "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nphf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-domain", help="write one domain JSON file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kind", choices=["canonical", "diagonal", "all", "random"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prob", type=float, default=0.5, help="slot inclusion probability (random kind)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_domain)

    p = sub.add_parser("gen-domains", help="write a batch of random domain files")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--prob", type=float, default=0.5)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen_domains)

    p = sub.add_parser("oracle", help="exact cost-to-go table via backward BFS")
    p.add_argument("--domain", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cap", type=int, default=DEFAULT_STATE_CAP)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("vi", help="tabular value iteration table (matches the oracle)")
    p.add_argument("--domain", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--cap", type=int, default=DEFAULT_STATE_CAP)
    p.set_defaults(func=cmd_vi)

    p = sub.add_parser("gen-data", help="build an oracle-labelled scramble dataset")
    p.add_argument("--protocol", choices=list(datasets.PROTOCOLS), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--domains", type=int, default=None, help="override random-domain count")
    p.add_argument("--states", type=int, default=None, help="override states per domain")
    p.add_argument("--walk-min", type=int, default=None)
    p.add_argument("--walk-max", type=int, default=None)
    p.add_argument("--kinds", default=None, help="comma list of fixed kinds override")
    p.add_argument("--cap", type=int, default=DEFAULT_STATE_CAP)
    p.add_argument("--exact-budget", type=int, default=200_000)
    p.add_argument("--workers", type=int, default=_default_workers())
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a heuristic model with DAVI")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=["conditioned", "ablation", "fixed"], required=True)
    p.add_argument("--config", default=None, help="JSON file of TrainConfig/net overrides")
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None, help="loss-curve CSV path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--examples", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--max-scramble", type=int, default=None)
    p.add_argument("--fixed-kind", choices=["canonical", "diagonal", "all", "random"], default="canonical")
    p.add_argument("--fixed-seed", type=int, default=0, help="seed when --fixed-kind random")
    p.add_argument("--paper-scale", action="store_true", help="5000/1000/4 architecture")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", help="batched weighted A* over a dataset of starts")
    p.add_argument("--states", required=True, help="dataset JSONL")
    p.add_argument("--domain", default=None, help="override domain for every instance")
    p.add_argument("--model", default=None)
    p.add_argument("--heuristic", choices=["model", "oracle", "zero", "relax"], default="model")
    p.add_argument("--oracle", default=None, help="oracle table file for --heuristic oracle")
    p.add_argument("--lambda", dest="lam", type=float, default=0.8, help="path-cost weight")
    p.add_argument("--batch", type=int, default=1000)
    p.add_argument("--time-limit", type=float, default=200.0)
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--cap", type=int, default=DEFAULT_STATE_CAP)
    p.add_argument("--out", required=True, help="results CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="correlate model values with oracle values")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="scatter CSV")
    p.add_argument("--metrics", required=True, help="metrics JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="solve suite + correlation report")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--heuristic", choices=["model", "oracle", "zero", "relax"], default="model")
    p.add_argument("--oracle", default=None)
    p.add_argument("--domain", default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=0.8)
    p.add_argument("--batch", type=int, default=1000)
    p.add_argument("--time-limit", type=float, default=200.0)
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--cap", type=int, default=DEFAULT_STATE_CAP)
    p.add_argument("--label", default=None, help="Domain column text")
    p.add_argument("--solver-name", default=None, help="Solver column text")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--input-dim", type=int, default=10)
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--width", type=int, default=6)
    p.add_argument("--blocks", type=int, default=2)
    p.set_defaults(func=cmd_gradcheck)

    return parser


# -- command implementations ---------------------------------------------------


def _load_domain(path) -> PuzzleDomain:
    return PuzzleDomain.from_json(Path(path).read_text())


def cmd_gen_domain(args) -> int:
    started = time.perf_counter()
    spec = DomainSpec(args.n, args.kind, seed=args.seed, inclusion_prob=args.prob)
    domain = from_spec(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(domain.to_json() + "\n")
    write_manifest(
        manifest_for(out),
        command="gen-domain",
        config={"n": args.n, "kind": args.kind, "prob": args.prob},
        seed=args.seed,
        inputs={},
        outputs={"domain": out},
        wall_secs=time.perf_counter() - started,
    )
    print(f"wrote {out} (domain {domain.domain_id})")
    return 0


def cmd_gen_domains(args) -> int:
    started = time.perf_counter()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = {}
    for i in range(args.count):
        seed = args.seed_base + i
        spec = DomainSpec(args.n, "random", seed=seed, inclusion_prob=args.prob)
        domain = from_spec(spec)
        path = out_dir / f"domain_{seed}.json"
        path.write_text(domain.to_json() + "\n")
        outputs[f"domain_{seed}"] = path
    write_manifest(
        out_dir / "manifest.json",
        command="gen-domains",
        config={"n": args.n, "count": args.count, "prob": args.prob},
        seed=args.seed_base,
        inputs={},
        outputs=outputs,
        wall_secs=time.perf_counter() - started,
    )
    print(f"wrote {args.count} domains under {out_dir}")
    return 0


def cmd_oracle(args) -> int:
    started = time.perf_counter()
    domain = _load_domain(args.domain)
    table = backward_bfs(domain, cap=args.cap)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_oracle(out, domain, table)
    write_manifest(
        manifest_for(out),
        command="oracle",
        config={"cap": args.cap},
        seed=None,
        inputs={"domain": Path(args.domain)},
        outputs={"oracle": out},
        wall_secs=time.perf_counter() - started,
    )
    print(f"wrote {out}: {len(table)} states, max cost {table.max_cost()}")
    return 0


def cmd_vi(args) -> int:
    started = time.perf_counter()
    domain = _load_domain(args.domain)
    table = davi.tabular_vi(domain, sweeps=args.sweeps, cap=args.cap)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_oracle(out, domain, table)
    write_manifest(
        manifest_for(out),
        command="vi",
        config={"sweeps": args.sweeps, "cap": args.cap},
        seed=None,
        inputs={"domain": Path(args.domain)},
        outputs={"table": out},
        wall_secs=time.perf_counter() - started,
    )
    print(f"wrote {out}: {len(table)} states, max cost {table.max_cost()}")
    return 0


def cmd_gen_data(args) -> int:
    started = time.perf_counter()
    overrides = {}
    if args.domains is not None:
        overrides["num_random_domains"] = args.domains
    if args.states is not None:
        overrides["states_per_domain"] = args.states
    if args.walk_min is not None:
        overrides["walk_min"] = args.walk_min
    if args.walk_max is not None:
        overrides["walk_max"] = args.walk_max
    if args.kinds is not None:
        overrides["fixed_kinds"] = tuple(k for k in args.kinds.split(",") if k)
    spec = datasets.spec_for_protocol(args.protocol, args.n, args.seed, **overrides)
    build = datasets.build_dataset(
        spec,
        args.out_dir,
        oracle_cap=args.cap,
        exact_budget=args.exact_budget,
        workers=args.workers,
    )
    out_dir = Path(args.out_dir)
    write_manifest(
        out_dir / "manifest.json",
        command="gen-data",
        config={
            "protocol": args.protocol,
            "n": args.n,
            "spec": {
                "states_per_domain": spec.states_per_domain,
                "walk_min": spec.walk_min,
                "walk_max": spec.walk_max,
                "fixed_kinds": list(spec.fixed_kinds),
                "num_random_domains": spec.num_random_domains,
            },
            "workers": args.workers,
        },
        seed=args.seed,
        inputs={},
        outputs={"data": build.jsonl_path},
        wall_secs=time.perf_counter() - started,
    )
    print(
        f"wrote {build.jsonl_path}: {len(build.records)} records "
        f"({build.unresolved_dropped} unresolved dropped)"
    )
    return 0


def _train_config_from_args(args) -> tuple[davi.TrainConfig, net.ModelConfig]:
    mode = {"conditioned": "action_conditioned", "ablation": "ablation_no_actions", "fixed": "fixed_domain"}[args.mode]
    overrides = {}
    net_overrides = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        net_overrides = raw.pop("net", {})
        overrides.update(raw)
    if args.examples is not None:
        overrides["total_examples"] = args.examples
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if args.max_scramble is not None:
        overrides["max_scramble"] = args.max_scramble
    fixed_spec = None
    if mode == "fixed_domain":
        fixed_spec = DomainSpec(args.n, args.fixed_kind, seed=args.fixed_seed)
    config = davi.TrainConfig(
        puzzle_n=args.n, mode=mode, fixed_domain_spec=fixed_spec, seed=args.seed, **overrides
    )
    if args.paper_scale:
        net_config = net.paper_scale(config.input_dim)
    else:
        net_config = net.ModelConfig(input_dim=config.input_dim, **net_overrides)
    return config, net_config


def cmd_train(args) -> int:
    started = time.perf_counter()
    config, net_config = _train_config_from_args(args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    log_path = Path(args.log) if args.log else None
    model, report = davi.train(
        config, net_config=net_config, checkpoint_path=out, log_path=log_path
    )
    net.save_model(out, model, config.puzzle_n, config.with_actions)
    outputs = {"model": out}
    if log_path:
        outputs["log"] = log_path
    write_manifest(
        manifest_for(out),
        command="train",
        config={
            "n": args.n,
            "mode": config.mode,
            "total_examples": config.total_examples,
            "batch_size": config.batch_size,
            "max_scramble": config.max_scramble,
            "net": {
                "first_hidden": net_config.first_hidden,
                "block_width": net_config.block_width,
                "num_blocks": net_config.num_blocks,
            },
            "target_updates": report.target_updates,
            "single_worker": report.single_worker,
        },
        seed=args.seed,
        inputs={},
        outputs=outputs,
        wall_secs=time.perf_counter() - started,
    )
    final_loss = report.loss_curve[-1][2] if report.loss_curve else float("nan")
    print(
        f"wrote {out}: {report.examples_seen} examples, {report.target_updates} "
        f"target updates, final loss {final_loss:.4f}"
    )
    return 0


def _build_heuristic(args):
    if args.heuristic == "model":
        if not args.model:
            raise NPuzzleError("--model is required with --heuristic model")
        loaded = net.load_model(args.model)
        return search.model_heuristic(loaded), loaded
    if args.heuristic == "oracle":
        if args.oracle:
            _, table = read_oracle(args.oracle)
            return search.oracle_heuristic(table), None
        return search.oracle_cache_heuristic(cap=args.cap), None
    if args.heuristic == "zero":
        return search.zero_heuristic, None
    return search.relax_provider, None


def _instances_from_records(records, base_dir, domain_override=None):
    cache = datasets.DomainCache(base_dir)
    instances = []
    for i, record in enumerate(records):
        domain = domain_override if domain_override is not None else cache.get(record.domain_file)
        state = PuzzleState.from_tiles(record.tiles)
        instances.append(
            search.SolveInstance(domain, state, record.opt_cost, instance_id=str(i))
        )
    return instances


def cmd_solve(args) -> int:
    started = time.perf_counter()
    records = datasets.load_dataset(args.states)
    if not records:
        raise NPuzzleError(f"{args.states} holds no instances")
    base_dir = Path(args.states).parent
    domain = _load_domain(args.domain) if args.domain else None
    heuristic, _ = _build_heuristic(args)
    config = search.SearchConfig(
        weight=args.lam,
        batch_size=args.batch,
        time_limit_secs=args.time_limit,
        node_limit=args.node_limit,
    )
    instances = _instances_from_records(records, base_dir, domain)
    report = search.solve_suite(instances, heuristic, config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id", "solved", "cost", "optimal_cost", "nodes", "secs"])
        for inst, res in report.results:
            writer.writerow(
                [
                    inst.instance_id,
                    int(res.solved),
                    res.cost if res.solved else "",
                    inst.optimal_cost if inst.optimal_cost is not None else "",
                    res.nodes_generated,
                    f"{res.wall_secs:.6f}",
                ]
            )
    inputs = {"states": Path(args.states)}
    if args.domain:
        inputs["domain"] = Path(args.domain)
    if args.model:
        inputs["model"] = Path(args.model)
    write_manifest(
        manifest_for(out),
        command="solve",
        config={
            "heuristic": args.heuristic,
            "lambda": args.lam,
            "batch": args.batch,
            "time_limit": args.time_limit,
            "node_limit": args.node_limit,
        },
        seed=None,
        inputs=inputs,
        outputs={"results": out},
        wall_secs=time.perf_counter() - started,
    )
    opt = "n/a" if report.opt_frac is None else f"{report.opt_frac:.1%}"
    print(
        f"wrote {out}: solved {report.solved_frac:.1%}, len {report.mean_len:.2f}, opt {opt}"
    )
    return 0


def cmd_eval(args) -> int:
    started = time.perf_counter()
    records = datasets.load_dataset(args.data)
    loaded = net.load_model(args.model)
    scatter = Path(args.out)
    scatter.parent.mkdir(parents=True, exist_ok=True)
    _, result = datasets.evaluate_model(
        loaded, records, Path(args.data).parent, scatter_path=scatter
    )
    metrics_path = Path(args.metrics)
    metrics_path.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    write_manifest(
        manifest_for(scatter),
        command="eval",
        config={},
        seed=None,
        inputs={"model": Path(args.model), "data": Path(args.data)},
        outputs={"scatter": scatter, "metrics": metrics_path},
        wall_secs=time.perf_counter() - started,
    )
    print(f"ccc {result['ccc']:.4f}  r_squared {result['r_squared']:.4f}  n {result['count']}")
    return 0


def cmd_bench(args) -> int:
    started = time.perf_counter()
    records = datasets.load_dataset(args.data)
    if not records:
        raise NPuzzleError(f"{args.data} holds no instances")
    base_dir = Path(args.data).parent
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    domain = _load_domain(args.domain) if args.domain else None
    heuristic, _ = _build_heuristic(args)
    config = search.SearchConfig(
        weight=args.lam,
        batch_size=args.batch,
        time_limit_secs=args.time_limit,
        node_limit=args.node_limit,
    )
    instances = _instances_from_records(records, base_dir, domain)
    report = search.solve_suite(instances, heuristic, config)

    loaded = net.load_model(args.model)
    scatter_path = out_dir / "scatter.csv"
    _, metrics_result = datasets.evaluate_model(loaded, records, base_dir, scatter_path=scatter_path)
    metrics_path = out_dir / "metrics.json"
    metrics_path.write_text(json.dumps(metrics_result, indent=2, sort_keys=True) + "\n")

    report_path = out_dir / "report.csv"
    label = args.label or f"{records[0].domain_file}"
    solver = args.solver_name or args.heuristic
    with open(report_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Domain", "Solver", "Len", "Opt", "Nodes", "Secs", "Nodes/Sec", "Solved"])
        writer.writerow(
            [
                label,
                solver,
                f"{report.mean_len:.2f}",
                "" if report.opt_frac is None else f"{100 * report.opt_frac:.1f}%",
                f"{report.mean_nodes:.3e}",
                f"{report.mean_secs:.3f}",
                f"{report.nodes_per_sec:.3e}",
                f"{100 * report.solved_frac:.1f}%",
            ]
        )
    write_manifest(
        out_dir / "manifest.json",
        command="bench",
        config={
            "heuristic": args.heuristic,
            "lambda": args.lam,
            "batch": args.batch,
            "time_limit": args.time_limit,
            "label": label,
            "solver": solver,
        },
        seed=None,
        inputs={"data": Path(args.data), "model": Path(args.model)},
        outputs={"report": report_path, "metrics": metrics_path, "scatter": scatter_path},
        wall_secs=time.perf_counter() - started,
    )
    print(f"wrote {report_path}, {metrics_path}, {scatter_path}")
    return 0


def cmd_gradcheck(args) -> int:
    config = net.ModelConfig(
        input_dim=args.input_dim,
        first_hidden=args.hidden,
        block_width=args.width,
        num_blocks=args.blocks,
    )
    result = net.gradient_check(config, seed=args.seed, tolerance=args.tolerance)
    status = "PASS" if result.passed else "FAIL"
    print(
        f"gradcheck {status}: max relative error {result.max_rel_error:.3e} "
        f"(tolerance {args.tolerance:.1e}, worst parameter {result.worst_param}"
        f"[{result.worst_index}])"
    )
    return 0 if result.passed else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"nphf: capacity error: {exc}", file=sys.stderr)
        return 2
    except NPuzzleError as exc:
        print(f"nphf: error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
