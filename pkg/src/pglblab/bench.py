"""Scaling benchmark over the selection family.

One row per k: generate, measure MID, run both projections (threading the
specialized output), re-verify equivalence on a seeded oracle set, and
record lengths, delays, state-graph size, and per-phase wall time.  Rows
are deterministic apart from the wall-clock columns.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .analyzer import Finite, StateLimitExceeded, build_state_graph, compute_mid
from .family import gen_scaling_family
from .isa import ToolParams
from .projector import OracleSuite, check_equivalence, dispatch_project, specialize, thread_jumps

CHECK_SEEDS = (11, 23, 47, 89, 131)

# -1 in a mid column means unbounded (or not computed on a flagged row).
CSV_HEADER = (
    "k,lengthOriginal,midOriginal,lengthSpecialized,midSpecialized,"
    "lengthDispatch,midDispatch,stateNodes,genMillis,midMillis,"
    "specializeMillis,dispatchMillis,checkMillis,flag"
)


@dataclass(frozen=True)
class BenchRow:
    k: int
    length_original: int
    mid_original: int
    length_specialized: int
    mid_specialized: int
    length_dispatch: int
    mid_dispatch: int
    state_nodes: int
    gen_millis: float
    mid_millis: float
    specialize_millis: float
    dispatch_millis: float
    check_millis: float
    flag: int

    def csv_line(self) -> str:
        return ",".join(
            str(v)
            for v in (
                self.k,
                self.length_original,
                self.mid_original,
                self.length_specialized,
                self.mid_specialized,
                self.length_dispatch,
                self.mid_dispatch,
                self.state_nodes,
                round(self.gen_millis, 3),
                round(self.mid_millis, 3),
                round(self.specialize_millis, 3),
                round(self.dispatch_millis, 3),
                round(self.check_millis, 3),
                self.flag,
            )
        )


def _mid_value(result) -> int:
    v = result.finite_value
    return -1 if v is None else v


def _bench_one(k: int, base: ToolParams | None) -> BenchRow:
    flag = 0

    t = time.perf_counter()
    p, fp = gen_scaling_family(k)
    if base is None:
        params = fp.tool_params()
    else:
        params = fp.tool_params(
            aux=base.aux,
            step_limit=base.step_limit,
            state_limit=base.state_limit,
            cell_init=base.cell_init,
        )
    gen_ms = (time.perf_counter() - t) * 1000.0
    if len(p) != 12 * 2**k + 4:
        flag = 1

    try:
        t = time.perf_counter()
        graph = build_state_graph(p, params)
        mid = compute_mid(graph, params.aux)
        mid_ms = (time.perf_counter() - t) * 1000.0
        state_nodes = graph.node_count
        if mid.value != Finite(4):
            flag = 1

        t = time.perf_counter()
        spec = specialize(p, params)
        threaded = thread_jumps(spec.output)
        mid_spec = compute_mid(build_state_graph(threaded, params), params.aux)
        spec_ms = (time.perf_counter() - t) * 1000.0

        t = time.perf_counter()
        disp = dispatch_project(p, params)
        disp_ms = (time.perf_counter() - t) * 1000.0

        t = time.perf_counter()
        # Route the test focus to the oracle on all sides so the seeded
        # streams drive every selection path; dispatch's own cells stay
        # bound via its report.
        free = replace(params, cell_foci=frozenset())
        suite = OracleSuite(exhaustive_depth=0, seeds=CHECK_SEEDS)
        for report, output in ((spec, threaded), (disp, disp.output)):
            verdict = check_equivalence(p, output, report.output_params(free), suite)
            if not verdict.equivalent:
                flag = 1
        check_ms = (time.perf_counter() - t) * 1000.0
    except StateLimitExceeded:
        return BenchRow(
            k, len(p), -1, -1, -1, -1, -1, -1, gen_ms, 0.0, 0.0, 0.0, 0.0, 1
        )

    return BenchRow(
        k=k,
        length_original=len(p),
        mid_original=_mid_value(mid),
        length_specialized=len(threaded),
        mid_specialized=_mid_value(mid_spec),
        length_dispatch=len(disp.output),
        mid_dispatch=_mid_value(disp.mid_after),
        state_nodes=state_nodes,
        gen_millis=gen_ms,
        mid_millis=mid_ms,
        specialize_millis=spec_ms,
        dispatch_millis=disp_ms,
        check_millis=check_ms,
        flag=flag,
    )


def bench_family(kmax: int, params: ToolParams | None = None) -> list[BenchRow]:
    """Rows for k=1..kmax (kmax ≤ 8: desk scale).

    `params`, when given, supplies aux/stepLimit/stateLimit/cellInit; maxr
    and maxn always come from the family itself.  Rows are computed
    concurrently but returned in k order.
    """
    if not 1 <= kmax <= 8:
        raise ValueError("kmax must be in 1..8")
    with ThreadPoolExecutor(max_workers=min(4, kmax)) as pool:
        return list(pool.map(lambda k: _bench_one(k, params), range(1, kmax + 1)))


def to_csv(rows: list[BenchRow]) -> str:
    return "\n".join([CSV_HEADER] + [row.csv_line() for row in rows]) + "\n"


def to_markdown(rows: list[BenchRow]) -> str:
    columns = CSV_HEADER.split(",")
    lines = [
        "| " + " | ".join(columns) + " |",
        "|" + "|".join(" --- " for _ in columns) + "|",
    ]
    for row in rows:
        lines.append("| " + " | ".join(row.csv_line().split(",")) + " |")
    return "\n".join(lines) + "\n"
