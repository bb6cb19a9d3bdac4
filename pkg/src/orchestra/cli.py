"""Command-line interface: compile, partition, run, bench, report.

Exit codes: 0 success, 1 diagnostics or execution failure, 2 usage error.
Set ORCHESTRA_LOG=debug|info|warning for log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .dsl import FileResolver, InMemoryResolver, SourceUnit, encode, parse, resolve_descriptions, typecheck
from .engine import Engine, InMemoryNetwork, LocalDirectory, RunState, Value
from .errors import ConfigError, Diagnostic, OrchestraError
from .graph import build_graph, to_dot
from .harness import (
    DEFAULT_INPUT_SIZES,
    DEFAULT_REPETITIONS,
    MODES,
    Topology,
    compute_report,
    run_modes,
)
from .partitioner import SizeEstimator, compose, decompose, generate_uid, place
from .qos import EngineInfo
from .sim import EventLoop

log = logging.getLogger(__name__)


def _setup_logging() -> None:
    level = os.environ.get("ORCHESTRA_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _existing_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return p


def _read_source(path: Path) -> SourceUnit:
    return SourceUnit(path.read_text(encoding="utf-8"), origin=str(path))


def _resolver_for(args) -> FileResolver | InMemoryResolver:
    if args.descriptions is not None:
        return FileResolver(args.descriptions)
    return FileResolver(Path.cwd())


def _compile(src: SourceUnit, resolver):
    ast = parse(src)
    docs = resolve_descriptions(ast, resolver)
    typed = typecheck(ast, docs)
    return ast, typed, build_graph(typed)


def cmd_compile(args) -> int:
    resolver = _resolver_for(args)
    try:
        _ast, _typed, graph = _compile(_read_source(args.spec), resolver)
    except Diagnostic as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except OrchestraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"ok: {len(graph.invocation_nodes())} invocations, "
          f"{len(graph.edges)} data dependencies")
    if args.emit_dot:
        Path(args.emit_dot).write_text(to_dot(graph), encoding="utf-8")
        print(f"wrote {args.emit_dot}")
    return 0


def cmd_partition(args) -> int:
    resolver = _resolver_for(args)
    try:
        topology = Topology.from_json(args.topology.read_text(encoding="utf-8"))
        _ast, _typed, graph = _compile(_read_source(args.spec), resolver)
        subs = decompose(graph)
        engines = sorted(topology.engines.values(), key=lambda e: e.id)
        input_sizes = {n.name: args.input_mb for n in graph.input_nodes()}
        sizes = SizeEstimator(graph, input_sizes)
        plan = place(subs, engines, topology.qos_matrix(), sizes)
        sink = args.sink or sorted(topology.engines)[0]
        base_uid = generate_uid(graph.meta.name, seed=args.seed)
        composites = compose(graph, subs, plan, sink=sink, base_uid=base_uid)
    except Diagnostic as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except OrchestraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for comp in composites:
        path = out_dir / f"{comp.name}.{comp.full_uid}.orc"
        path.write_text(encode(comp).text, encoding="utf-8")
        print(f"wrote {path} (engine {comp.host_engine})")
    placement_path = out_dir / "placement.json"
    payload = plan.to_json_dict()
    payload["composites"] = [
        {"uid": c.full_uid, "engine": c.host_engine,
         "members": [m.id for m in c.members]}
        for c in composites
    ]
    placement_path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    print(f"wrote {placement_path}")
    return 0


def _parse_inputs(pairs: list[str], ast) -> dict[str, Value]:
    from .dsl.ast import TypeTag

    declared = {v.name: v.tag for v in ast.inputs}
    out: dict[str, Value] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--input expects name=value, got {pair!r}")
        name, raw = pair.split("=", 1)
        if name not in declared:
            raise ConfigError(f"workflow declares no input {name!r}")
        tag = declared[name]
        payload = int(raw) if tag is TypeTag.INT else raw
        out[name] = Value(payload, float(len(raw)) / 1e6)
    return out


def cmd_run(args) -> int:
    resolver = _resolver_for(args)
    env = EventLoop(tie_seed=args.seed)
    network = InMemoryNetwork(env)
    try:
        src = _read_source(args.spec)
        ast, _typed, _graph = _compile(src, resolver)
        inputs = _parse_inputs(args.input or [], ast)
        forwarded = []
        for decl in ast.engine_decls:
            network.register(decl.url, lambda m, _eid=decl.id: forwarded.append((_eid, m)))
        info = EngineInfo("local", "mem://local", "local")
        network.register(info.endpoint, lambda m: None)
        engine = Engine(info, env, network.bind(info.endpoint),
                        LocalDirectory(env, open_world=True), resolver)
        uid = engine.deploy(src, initial_inputs=inputs)
        missing = [k for k, v in engine.deployments[uid].pending_inputs.items() if v is None]
        if missing:
            print(f"error: missing inputs {missing}; provide them with --input", file=sys.stderr)
            return 1
        env.run()
        record = engine.completion(uid)
    except Diagnostic as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except OrchestraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if record.state is not RunState.COMPLETED:
        print(f"workflow {record.state.value}: {record.errors}", file=sys.stderr)
        return 1
    for name in sorted(record.outputs):
        print(f"{name} = {record.outputs[name].payload}")
    for rec in record.dispatches:
        print(f"forwarded {rec.variable} to {rec.destination_engine}")
    return 0


def cmd_bench(args) -> int:
    try:
        config = json.loads(args.config.read_text(encoding="utf-8"))
        topo_spec = config.get("topology")
        if isinstance(topo_spec, str):
            topo_path = Path(topo_spec)
            if not topo_path.is_absolute():
                topo_path = args.config.parent / topo_path
            topology = Topology.from_json(topo_path.read_text(encoding="utf-8"))
        elif isinstance(topo_spec, dict):
            topology = Topology.from_json_dict(topo_spec)
        else:
            raise ConfigError("bench config needs a 'topology' object or path")
        workflows = config.get("workflows")
        if not workflows:
            raise ConfigError("bench config needs a non-empty 'workflows' list")
        modes = config.get("modes", ["centralized", "distributed"])
        unknown_modes = [m for m in modes if m not in MODES]
        if unknown_modes:
            raise ConfigError(f"unknown modes {unknown_modes}; expected a subset of {list(MODES)}")
        input_sizes = tuple(float(s) for s in config.get("input_sizes", DEFAULT_INPUT_SIZES))
        repetitions = int(config.get("repetitions", DEFAULT_REPETITIONS))
        seed = int(config.get("seed", args.seed))

        records = []
        for wf in workflows:
            report = run_modes(
                pattern=wf["pattern"],
                service_count=int(wf["service_count"]),
                modes=list(modes),
                topology=topology,
                input_sizes=input_sizes,
                repetitions=repetitions,
                rng_seed=seed,
                central_engine=wf.get("central_engine"),
                initiator_engine=wf.get("initiator_engine"),
            )
            records.extend(report.runs)
        final = compute_report(records)
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: malformed bench config: {exc}", file=sys.stderr)
        return 1
    except OrchestraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    json_path.write_text(final.to_json() + "\n", encoding="utf-8")
    csv_path = out_dir / "report.csv"
    csv_path.write_text(final.to_csv(), encoding="utf-8")
    print(f"wrote {json_path}")
    print(f"wrote {csv_path}")
    print(final.summary_table())
    return 0


def cmd_report(args) -> int:
    try:
        data = json.loads(args.report.read_text(encoding="utf-8"))
        from .harness import RunRecord

        records = [
            RunRecord(r["pattern"], int(r["n"]), r["mode"], float(r["input_mb"]),
                      int(r["rep"]), float(r["time_s"]), float(r["bytes_mb"]))
            for r in data["runs"]
        ]
        report = compute_report(records)
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: malformed report file: {exc}", file=sys.stderr)
        return 1
    except OrchestraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.format == "csv":
        print(report.to_csv(), end="")
    elif args.format == "json":
        print(report.to_json())
    else:
        print(report.summary_table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orchestra",
        description="Compile, partition, execute, and benchmark dataflow workflows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_compile = sub.add_parser("compile", help="check a workflow and report diagnostics")
    p_compile.add_argument("--spec", type=_existing_file, required=True)
    p_compile.add_argument("--descriptions", type=Path, default=None,
                           help="directory holding service description JSON files")
    p_compile.add_argument("--emit-dot", type=Path, default=None,
                           help="write the invocation graph in DOT format")
    p_compile.set_defaults(fn=cmd_compile)

    p_partition = sub.add_parser("partition", help="split a workflow across engines")
    p_partition.add_argument("--spec", type=_existing_file, required=True)
    p_partition.add_argument("--topology", type=_existing_file, required=True)
    p_partition.add_argument("--out", type=Path, required=True)
    p_partition.add_argument("--descriptions", type=Path, default=None)
    p_partition.add_argument("--sink", default=None, help="engine collecting final outputs")
    p_partition.add_argument("--seed", type=int, default=0)
    p_partition.add_argument("--input-mb", type=float, default=1.0,
                             help="assumed size of each workflow input for placement")
    p_partition.set_defaults(fn=cmd_partition)

    p_run = sub.add_parser("run", help="execute one workflow locally with stub services")
    p_run.add_argument("--spec", type=_existing_file, required=True)
    p_run.add_argument("--descriptions", type=Path, default=None)
    p_run.add_argument("--input", action="append", metavar="NAME=VALUE")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.set_defaults(fn=cmd_run)

    p_bench = sub.add_parser("bench", help="reproduce orchestration experiments")
    p_bench.add_argument("--config", type=_existing_file, required=True)
    p_bench.add_argument("--out", type=Path, required=True)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.set_defaults(fn=cmd_bench)

    p_report = sub.add_parser("report", help="summarize a bench report file")
    p_report.add_argument("--report", type=_existing_file, required=True)
    p_report.add_argument("--format", choices=("json", "csv", "table"), default="table")
    p_report.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
