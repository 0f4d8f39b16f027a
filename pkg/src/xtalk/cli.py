"""Command-line pipeline: design plans, simulate them, analyze datasets.

Exit codes follow a convention usable by lab automation: 0 means success
(and, for analyze, no crosstalk), 1 means crosstalk was detected, 2 means
the command failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from ._validation import substream
from .data import DataFormatError, Dataset
from .design import PlanParams, ExperimentPlan, build_plan, default_params
from .discovery import CrosstalkDetector
from .regions import DeviceLayout, PartitionSet, one_partition, partition_cover, random_two_partition
from .simulator import (
    crosstalk_free_model,
    detection_crosstalk,
    ladder_crosstalk_model,
    operation_crosstalk_coherent,
    operation_crosstalk_depolarizing,
    run_plan,
)

EXIT_OK = 0
EXIT_CROSSTALK = 1
EXIT_ERROR = 2


def _parse_layout(spec: str) -> DeviceLayout:
    """Parse 'full:N', 'linear:N', 'ladder:COLS', or a layout JSON path."""
    if not spec:
        raise ValueError("a device layout is required (--layout or config)")
    if ":" in spec:
        kind, _, arg = spec.partition(":")
        builders = {
            "full": DeviceLayout.fully_connected,
            "linear": DeviceLayout.linear,
            "ladder": DeviceLayout.ladder,
        }
        if kind in builders:
            return builders[kind](int(arg))
    with open(spec, encoding="utf-8") as fh:
        doc = json.load(fh)
    return DeviceLayout(doc["n_qubits"], frozenset(tuple(e) for e in doc.get("coupling_edges", ())))


def _master_seed(resolved) -> int:
    """Use the given master seed, or draw and announce a fresh one so every
    output stays reproducible."""
    if resolved is not None:
        return int(resolved)
    seed = int(np.random.SeedSequence().generate_state(1)[0])
    print(f"no seed given; using master seed {seed}")
    return seed


def _derived_seed(master: int, stream: str) -> int:
    return int(substream(master, stream).generate_state(1)[0])


def _resolve(cli_value, config: dict, key: str, default):
    if cli_value is not None:
        return cli_value
    if key in config:
        return config[key]
    return default


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("config file must hold a JSON object")
    return doc


def _plan_params(args, config: dict, n_regions: int) -> PlanParams:
    signal = _resolve(args.signal, config, "signal", "low")
    bag_size = _resolve(args.bag_size, config, "bag_size", 20)
    base = default_params(n_regions, signal_regime=signal, bag_size=bag_size)
    return PlanParams(
        depth=_resolve(args.depth, config, "depth", base.depth),
        bag_size=bag_size,
        n_contexts=_resolve(args.n_contexts, config, "n_contexts", base.n_contexts),
        p_idle_context=_resolve(args.p_idle_context, config, "p_idle_context", base.p_idle_context),
        n_reps=_resolve(args.n_reps, config, "n_reps", base.n_reps),
        schedule=_resolve(args.schedule, config, "schedule", "rasterized"),
    )


def cmd_design(args) -> int:
    config = _load_config(args.config)
    layout = _parse_layout(_resolve(args.layout, config, "layout", None))
    mode = _resolve(args.partition, config, "partition", "one")
    master = _master_seed(_resolve(args.seed, config, "seed", None))
    part_seed = _derived_seed(master, "partition")
    design_seed = _derived_seed(master, "design")

    if mode == "one":
        partitions = [one_partition(layout)]
    elif mode == "random2":
        partitions = [random_two_partition(layout, part_seed)]
    elif mode == "brute2":
        partitions = list(partition_cover(layout, mode="brute"))
    else:
        raise ValueError(f"unknown partition mode {mode!r}")

    params = _plan_params(args, config, len(partitions[0]))

    if len(partitions) == 1:
        plan = build_plan(partitions[0], params, design_seed)
        plan.save(args.out)
        print(f"wrote plan with {plan.n_circuits} circuits to {args.out}")
        return EXIT_OK

    os.makedirs(args.out, exist_ok=True)
    pset = PartitionSet(layout.n_qubits, tuple(partitions))
    with open(os.path.join(args.out, "partitions.json"), "w", encoding="utf-8") as fh:
        fh.write(pset.to_json())
        fh.write("\n")
    for idx, partition in enumerate(partitions):
        plan = build_plan(partition, params, design_seed + idx)
        plan.save(os.path.join(args.out, f"plan_{idx:04d}.json"))
    print(f"wrote {len(partitions)} plans to {args.out}")
    return EXIT_OK


def _build_model(args, config: dict, n_qubits: int):
    name = _resolve(args.model, config, "model", "crosstalk-free")
    p_local = _resolve(args.p_local, config, "p_local", 0.0)
    p_crosstalk = _resolve(args.p_crosstalk, config, "p_crosstalk", 0.0)
    source = _resolve(args.source, config, "source", 0)
    target = _resolve(args.target, config, "target", 1)
    if name == "crosstalk-free":
        return crosstalk_free_model(n_qubits, p_local)
    if name == "op-depol":
        return operation_crosstalk_depolarizing(n_qubits, source, target, p_crosstalk, p_local)
    if name == "op-coherent":
        zz = _resolve(args.zz_angle, config, "zz_angle", 0.0)
        return operation_crosstalk_coherent(n_qubits, source, target, zz, p_local)
    if name == "detection":
        flip = _resolve(args.flip_prob, config, "flip_prob", 0.0)
        return detection_crosstalk(flip, p_local)
    if name == "ladder":
        p_idle_error = _resolve(args.p_idle_error, config, "p_idle_error", 0.0)
        return ladder_crosstalk_model(DeviceLayout.ladder(3), p_crosstalk, p_local, p_idle_error)
    raise ValueError(f"unknown model {name!r}")


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    plan = ExperimentPlan.load(args.plan)
    model = _build_model(args, config, plan.n_qubits)
    master = _master_seed(_resolve(args.seed, config, "seed", None))
    dataset = run_plan(model, plan, _derived_seed(master, "simulate"))
    dataset.to_jsonl(args.out)
    n_records = dataset.n_circuits * dataset.n_reps
    print(f"wrote {n_records} records to {args.out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    config = _load_config(args.config)
    dataset = Dataset.from_jsonl(args.data)
    detector = CrosstalkDetector(
        alpha=_resolve(args.alpha, config, "alpha", 0.01),
        bonferroni=bool(_resolve(args.bonferroni or None, config, "bonferroni", False)),
        use_design_priors=not bool(_resolve(args.no_priors or None, config, "no_priors", False)),
        max_cond_size=_resolve(args.max_cond_size, config, "max_cond_size", None),
        tvd_on_expected=bool(_resolve(args.tvd_expected or None, config, "tvd_expected", False)),
    )
    detector.fit(dataset)
    graph = detector.graph_

    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(graph.to_report_json())
            fh.write("\n")
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(graph.to_dot())

    n_cross = len(graph.crosstalk_edges)
    n_expected = len(graph.expected_edges)
    print(f"edges: {n_expected} expected, {n_cross} crosstalk")
    for edge in graph.crosstalk_edges:
        if edge.tvd is not None and edge.tvd.computable:
            print(f"  crosstalk {edge.u} -- {edge.v}: "
                  f"tvd max {edge.tvd.max_tvd:.4g} (median {edge.tvd.median_tvd:.4g})")
        else:
            print(f"  crosstalk {edge.u} -- {edge.v}: tvd not computable")
    return EXIT_CROSSTALK if graph.has_crosstalk() else EXIT_OK


def cmd_report(args) -> int:
    with open(args.report, encoding="utf-8") as fh:
        report = json.load(fh)
    print(f"crosstalk detected: {report['crosstalk_detected']}")
    print(f"alpha: {report['alpha']} (per-test {report['per_test_alpha']})")
    for edge in report["edges"]:
        label = ""
        tvd = edge.get("tvd")
        if tvd and tvd.get("computable"):
            label = f" tvd {tvd['max']:.4g} ({tvd['median']:.4g})"
        print(f"  [{edge['kind']}] {edge['u']} -- {edge['v']}{label}")
    if args.dot:
        lines = ["graph crosstalk {"]
        for var in sorted(report["variables"], key=lambda v: v["id"]):
            shape = "box" if var["kind"] == "setting" else "ellipse"
            lines.append(f'  "{var["id"]}" [shape={shape}];')
        for edge in report["edges"]:
            color = "red" if edge["kind"] == "crosstalk" else "blue"
            attrs = [f'class="{edge["kind"]}"', f"color={color}"]
            tvd = edge.get("tvd")
            if edge["kind"] == "crosstalk":
                if tvd and tvd.get("computable"):
                    attrs.append(f'label="{tvd["max"]:.3g} ({tvd["median"]:.3g})"')
                else:
                    attrs.append('label="tvd n/a"')
            lines.append(f'  "{edge["u"]}" -- "{edge["v"]}" [{", ".join(attrs)}];')
        lines.append("}")
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xtalk",
                                     description="Crosstalk detection experiment toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_design = sub.add_parser("design", help="generate an experiment plan")
    p_design.add_argument("--layout", help="full:N, linear:N, ladder:COLS, or a layout JSON file")
    p_design.add_argument("--partition", choices=["one", "random2", "brute2"])
    p_design.add_argument("--depth", type=int)
    p_design.add_argument("--bag-size", type=int, dest="bag_size")
    p_design.add_argument("--n-contexts", type=int, dest="n_contexts")
    p_design.add_argument("--p-idle-context", type=float, dest="p_idle_context")
    p_design.add_argument("--n-reps", type=int, dest="n_reps")
    p_design.add_argument("--schedule", choices=["rasterized", "randomized"])
    p_design.add_argument("--signal", choices=["low", "high"])
    p_design.add_argument("--seed", type=int)
    p_design.add_argument("--config")
    p_design.add_argument("--out", required=True)
    p_design.set_defaults(func=cmd_design)

    p_sim = sub.add_parser("simulate", help="simulate a plan under an error model")
    p_sim.add_argument("--plan", required=True)
    p_sim.add_argument("--model",
                       choices=["crosstalk-free", "op-depol", "op-coherent", "detection", "ladder"])
    p_sim.add_argument("--p-local", type=float, dest="p_local")
    p_sim.add_argument("--p-crosstalk", type=float, dest="p_crosstalk")
    p_sim.add_argument("--zz-angle", type=float, dest="zz_angle")
    p_sim.add_argument("--flip-prob", type=float, dest="flip_prob")
    p_sim.add_argument("--p-idle-error", type=float, dest="p_idle_error")
    p_sim.add_argument("--source", type=int)
    p_sim.add_argument("--target", type=int)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--config")
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_an = sub.add_parser("analyze", help="detect crosstalk edges in a dataset")
    p_an.add_argument("--data", required=True)
    p_an.add_argument("--alpha", type=float)
    p_an.add_argument("--bonferroni", action="store_true")
    p_an.add_argument("--no-priors", action="store_true", dest="no_priors")
    p_an.add_argument("--max-cond-size", type=int, dest="max_cond_size")
    p_an.add_argument("--tvd-expected", action="store_true", dest="tvd_expected")
    p_an.add_argument("--report")
    p_an.add_argument("--dot")
    p_an.add_argument("--config")
    p_an.set_defaults(func=cmd_analyze)

    p_rep = sub.add_parser("report", help="summarize a saved analysis report")
    p_rep.add_argument("--report", required=True)
    p_rep.add_argument("--dot")
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, DataFormatError, OSError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
