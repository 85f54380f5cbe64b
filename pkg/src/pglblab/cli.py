"""Command-line front end.

Subcommands: run, mid, project, gen, bench, check.  Program files are
plain text; "-" reads stdin.  Tool parameters resolve in increasing
precedence: PGLBLAB_CONFIG env config, a sidecar <program>.cfg next to the
input, an explicit --config file, then flags.  When maxr/maxn are not set
anywhere they are derived from the program (largest register index and
literal), so piped programs analyze without ceremony.

Exit codes: 0 success, 1 diagnostics/errors/counterexample, 2 usage.
"""
from __future__ import annotations

import argparse
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

from .analyzer import (
    StateLimitExceeded,
    build_state_graph,
    compute_mid,
    id_weight,
)
from .bench import bench_family, to_csv, to_markdown
from .family import gen_scaling_family, gen_random
from .isa import (
    AuxSpec,
    IndBwdJump,
    IndFwdJump,
    ParseError,
    Program,
    RegSet,
    ToolParams,
    parse_program,
    render_program,
    validate,
)
from .projector import (
    OracleSuite,
    check_equivalence,
    dispatch_project,
    specialize,
    thread_jumps,
)
from .vm import (
    OracleExhausted,
    Scripted,
    Seeded,
    parse_oracle_script,
    run,
    trace_text,
)

_DEFAULTS = ToolParams()


class CLIError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def parse_config(text: str) -> dict[str, str]:
    """Line-based `key = value`; blank lines and '#' comments skipped."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CLIError(f"config line {lineno}: expected `key = value`")
        key, _, value = line.partition("=")
        pairs[key.strip()] = value.strip()
    return pairs


def _parse_bool(value: str) -> bool:
    low = value.lower()
    if low in ("true", "t", "1"):
        return True
    if low in ("false", "f", "0"):
        return False
    raise CLIError(f"expected a boolean, got {value!r}")


def _apply_config(pairs: dict[str, str], acc: dict) -> None:
    for key, value in pairs.items():
        try:
            match key:
                case "maxr" | "maxn" | "stepLimit" | "stateLimit":
                    acc[key] = int(value)
                case "aux":
                    acc["aux"] = AuxSpec.parse(value)
                case "cellInit":
                    acc["cellInit"] = _parse_bool(value)
                case "cells":
                    acc["cells"] = frozenset(
                        f.strip() for f in value.split(",") if f.strip()
                    )
                case _:
                    raise CLIError(f"unknown config key: {key}")
        except ValueError as e:
            raise CLIError(f"config key {key}: {e}") from e


def _load_config(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise CLIError(f"cannot read config {path}: {e}") from e
    return parse_config(text)


def derive_bounds(programs) -> tuple[int, int]:
    maxr, maxn = 1, 1
    for p in programs:
        for u in p.instructions:
            match u:
                case RegSet(i, n):
                    maxr, maxn = max(maxr, i), max(maxn, n)
                case IndFwdJump(i) | IndBwdJump(i):
                    maxr = max(maxr, i)
    return maxr, maxn


def resolve_params(args, programs=(), sidecars=()) -> ToolParams:
    acc: dict = {}
    env = os.environ.get("PGLBLAB_CONFIG")
    if env:
        _apply_config(_load_config(env), acc)
    for sidecar in sidecars:
        if sidecar is not None and sidecar.exists():
            _apply_config(parse_config(sidecar.read_text()), acc)
    if getattr(args, "config", None):
        _apply_config(_load_config(args.config), acc)
    if getattr(args, "maxr", None) is not None:
        acc["maxr"] = args.maxr
    if getattr(args, "maxn", None) is not None:
        acc["maxn"] = args.maxn
    if getattr(args, "aux", None) is not None:
        acc["aux"] = AuxSpec.parse(args.aux)
    if getattr(args, "cells", None) is not None:
        acc["cells"] = frozenset(f.strip() for f in args.cells.split(",") if f.strip())
    if getattr(args, "cell_init", None) is not None:
        acc["cellInit"] = _parse_bool(args.cell_init)
    if getattr(args, "step_limit", None) is not None:
        acc["stepLimit"] = args.step_limit
    if getattr(args, "state_limit", None) is not None:
        acc["stateLimit"] = args.state_limit
    if ("maxr" not in acc or "maxn" not in acc) and programs:
        derived_r, derived_n = derive_bounds(programs)
        acc.setdefault("maxr", derived_r)
        acc.setdefault("maxn", derived_n)
    try:
        return ToolParams(
            maxr=acc.get("maxr", _DEFAULTS.maxr),
            maxn=acc.get("maxn", _DEFAULTS.maxn),
            aux=acc.get("aux", AuxSpec()),
            step_limit=acc.get("stepLimit", _DEFAULTS.step_limit),
            state_limit=acc.get("stateLimit", _DEFAULTS.state_limit),
            cell_foci=acc.get("cells", None),
            cell_init=acc.get("cellInit", _DEFAULTS.cell_init),
        )
    except ValueError as e:
        raise CLIError(str(e)) from e


def read_program(path: str) -> tuple[Program, str, Path | None]:
    """-> (program, display name, sidecar config path or None)."""
    if path == "-":
        text = sys.stdin.read()
        return parse_program(text), "<stdin>", None
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise CLIError(f"cannot read {path}: {e}") from e
    return parse_program(text), path, Path(path).with_suffix(".cfg")


def _validate_or_die(p: Program, params: ToolParams, name: str) -> None:
    diags = validate(p, params)
    if diags:
        for d in diags:
            print(f"{name}: {d}", file=sys.stderr)
        raise CLIError(f"{len(diags)} diagnostic(s)")


def _make_oracle(spec: str | None):
    if spec is None:
        return Scripted(())
    if re.fullmatch(r"-?\d+", spec):
        return Seeded(int(spec))
    try:
        text = Path(spec).read_text()
    except OSError as e:
        raise CLIError(f"cannot read oracle script {spec}: {e}") from e
    return parse_oracle_script(text)


def _cmd_run(args) -> int:
    p, name, sidecar = read_program(args.file)
    params = resolve_params(args, programs=(p,), sidecars=(sidecar,))
    if args.steps is not None:
        params = replace(params, step_limit=args.steps)
    _validate_or_die(p, params, name)
    try:
        trace = run(p, params, _make_oracle(args.oracle))
    except OracleExhausted:
        raise CLIError("oracle exhausted during the run; supply --oracle") from None
    sys.stdout.write(trace_text(trace))
    return 0


def _cmd_mid(args) -> int:
    p, name, sidecar = read_program(args.file)
    params = resolve_params(args, programs=(p,), sidecars=(sidecar,))
    _validate_or_die(p, params, name)
    graph = build_state_graph(p, params)
    result = compute_mid(graph, params.aux)
    value = result.finite_value
    print(f"MID = {'unbounded' if value is None else value}")
    if result.witness:
        rendered = " ".join(
            f"{node.pc}@{id_weight(p.at(node.pc), params.aux)}" for node in result.witness
        )
        print(f"witness = {rendered}")
    if result.cycle:
        print(f"cycle = {' '.join(str(node.pc) for node in result.cycle)}")
    print(f"nodes = {graph.node_count}")
    print(f"edges = {graph.edge_count}")
    return 0


def _params_config_text(params: ToolParams, cells: frozenset[str] | None) -> str:
    lines = [f"maxr = {params.maxr}", f"maxn = {params.maxn}", f"aux = {params.aux.render()}"]
    if cells is not None:
        lines.append(f"cells = {','.join(sorted(cells))}")
    return "\n".join(lines) + "\n"


def _cmd_project(args) -> int:
    p, name, sidecar = read_program(args.file)
    params = resolve_params(args, programs=(p,), sidecars=(sidecar,))
    _validate_or_die(p, params, name)
    report = (specialize if args.mode == "specialize" else dispatch_project)(p, params)
    output = report.output
    extra = ""
    if args.thread:
        output = thread_jumps(output)
        out_params = report.output_params(params)
        threaded_mid = compute_mid(build_state_graph(output, out_params), out_params.aux)
        v = threaded_mid.finite_value
        extra = f"threaded=1\nmidAfterThreaded={'unbounded' if v is None else v}\n"

    stem = "program" if args.file == "-" else Path(args.file).stem
    out_dir = Path(args.out_dir) if args.out_dir else (
        Path(".") if args.file == "-" else Path(args.file).parent
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    out_params = report.output_params(params)
    prefix = f"{stem}.{args.mode}"
    written = {
        out_dir / f"{prefix}.pglb": render_program(output) + "\n",
        out_dir / f"{prefix}.map.csv": report.relocation.to_csv(),
        out_dir / f"{prefix}.report.txt": report.summary() + extra,
        out_dir / f"{prefix}.cfg": _params_config_text(out_params, out_params.cell_foci),
    }
    for path, content in written.items():
        path.write_text(content)
        print(f"wrote {path}")
    return 0


def _write_program(out: str | None, p: Program, params: ToolParams) -> None:
    text = render_program(p) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    path = Path(out)
    path.write_text(text)
    path.with_suffix(".cfg").write_text(_params_config_text(params, None))
    print(f"wrote {path}")
    print(f"wrote {path.with_suffix('.cfg')}")


def _cmd_gen(args) -> int:
    if args.what == "family":
        p, fp = gen_scaling_family(args.k)
        _write_program(args.out, p, fp.tool_params())
    else:
        params = ToolParams(maxr=args.maxr or 2, maxn=args.maxn or 3)
        p = gen_random(args.seed, args.len, params)
        _write_program(args.out, p, params)
    return 0


def _cmd_bench(args) -> int:
    params = resolve_params(args)
    rows = bench_family(args.kmax, params)
    csv_text = to_csv(rows)
    if args.out:
        Path(args.out).write_text(csv_text)
        print(f"wrote {args.out}")
        if args.md:
            md_path = Path(args.out).with_suffix(".md")
            md_path.write_text(to_markdown(rows))
            print(f"wrote {md_path}")
    else:
        sys.stdout.write(to_markdown(rows) if args.md else csv_text)
    return 1 if any(row.flag for row in rows) else 0


def _cmd_check(args) -> int:
    p, p_name, p_sidecar = read_program(args.p)
    q, q_name, q_sidecar = read_program(args.q)
    params = resolve_params(args, programs=(p, q), sidecars=(p_sidecar, q_sidecar))
    _validate_or_die(p, params, p_name)
    _validate_or_die(q, params, q_name)
    suite = OracleSuite(exhaustive_depth=args.depth)
    verdict = check_equivalence(p, q, params, suite)
    if verdict.equivalent:
        print(f"equivalent (checked={verdict.checked}, inconclusive={verdict.inconclusive})")
        return 0
    cex = verdict.counterexample
    print(f"counterexample oracle={cex.oracle}")
    for label, events, final in (("p", cex.p_events, cex.p_final), ("q", cex.q_events, cex.q_final)):
        rendered = " ".join(f"{e.focus}.{e.method}={'T' if e.reply else 'F'}" for e in events)
        status = "cut" if final is None else final.value
        print(f"{label}: {rendered} status={status}")
    print(f"checked={verdict.checked} inconclusive={verdict.inconclusive}")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pglblab",
        description="Interpreter, delay analyzer, and projections for the instruction notation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_param_flags(sp):
        sp.add_argument("--maxr", type=int, help="largest register index")
        sp.add_argument("--maxn", type=int, help="largest register literal")
        sp.add_argument("--aux", help="aux patterns, comma separated (f.m or f.*)")
        sp.add_argument("--cells", help="cell-bound foci, comma separated ('' = none)")
        sp.add_argument("--cell-init", choices=("true", "false"), help="initial cell contents")
        sp.add_argument("--step-limit", type=int)
        sp.add_argument("--state-limit", type=int)
        sp.add_argument("--config", help="config file (overrides PGLBLAB_CONFIG)")

    sp = sub.add_parser("run", help="execute a program and print its trace")
    sp.add_argument("file")
    sp.add_argument("--oracle", help="reply script file or integer seed")
    sp.add_argument("--steps", type=int, help="step limit for this run")
    add_param_flags(sp)
    sp.set_defaults(handler=_cmd_run)

    sp = sub.add_parser("mid", help="compute the maximal internal delay")
    sp.add_argument("file")
    add_param_flags(sp)
    sp.set_defaults(handler=_cmd_mid)

    sp = sub.add_parser("project", help="project onto the register-free fragment")
    sp.add_argument("file")
    sp.add_argument("--mode", choices=("specialize", "dispatch"), required=True)
    sp.add_argument("--thread", action="store_true", help="thread jump chains in the output")
    sp.add_argument("--out-dir", help="directory for output files")
    add_param_flags(sp)
    sp.set_defaults(handler=_cmd_project)

    sp = sub.add_parser("gen", help="generate programs")
    gen_sub = sp.add_subparsers(dest="what", required=True)
    fam = gen_sub.add_parser("family", help="the k-th scaling-family member")
    fam.add_argument("--k", type=int, required=True)
    fam.add_argument("--out", help="output file (default stdout)")
    fam.set_defaults(handler=_cmd_gen)
    rnd = gen_sub.add_parser("random", help="seeded random programs")
    rnd.add_argument("--seed", type=int, required=True)
    rnd.add_argument("--len", type=int, required=True)
    rnd.add_argument("--maxr", type=int)
    rnd.add_argument("--maxn", type=int)
    rnd.add_argument("--out", help="output file (default stdout)")
    rnd.set_defaults(handler=_cmd_gen)

    sp = sub.add_parser("bench", help="scaling benchmark over the family")
    sp.add_argument("--kmax", type=int, required=True)
    sp.add_argument("--out", help="CSV output file (default stdout)")
    sp.add_argument("--md", action="store_true", help="markdown table mirror")
    add_param_flags(sp)
    sp.set_defaults(handler=_cmd_bench)

    sp = sub.add_parser("check", help="observable-equivalence check of two programs")
    sp.add_argument("p")
    sp.add_argument("q")
    sp.add_argument("--depth", type=int, default=10, help="exhaustive oracle branch depth")
    add_param_flags(sp)
    sp.set_defaults(handler=_cmd_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CLIError as e:
        print(f"pglblab: {e}", file=sys.stderr)
        return e.code
    except ParseError as e:
        print(f"pglblab: {e}", file=sys.stderr)
        return 1
    except StateLimitExceeded as e:
        print(f"pglblab: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"pglblab: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
