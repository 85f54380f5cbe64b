"""Projections from the full notation onto the register-free fragment.

Two constructions with opposite trade-offs:

* `specialize` unfolds the reachable state graph, emitting one block per
  (position, register contents) state.  Register and indirect-jump
  instructions collapse to direct jumps, so internal delay stays flat while
  length grows with the state count.

* `dispatch_project` keeps the original layout and represents each register
  by a vector of auxiliary Boolean cells.  Register sets become bit writes
  and indirect jumps become balanced decision trees over the bits, so
  length stays linear while internal delay grows with the bit width.

`check_equivalence` compares observable behaviour over an oracle suite, and
`thread_jumps` collapses chains of direct jumps in register-free programs.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .analyzer import (
    MidResult,
    StateNode,
    build_state_graph,
    compute_mid,
    node_successors,
)
from .isa import (
    AuxSpec,
    BasicInstruction,
    BwdJump,
    FwdJump,
    Halt,
    IndBwdJump,
    IndFwdJump,
    Instruction,
    NegTest,
    Plain,
    PosTest,
    Program,
    RegSet,
    ToolParams,
    basic_of,
    is_pglb,
    validate,
)
from .vm import (
    Exhaustive,
    ObservableEvent,
    OracleExhausted,
    Scripted,
    Seeded,
    Status,
    TraceEvent,
    bound_cell_foci,
    initial_config,
    observable_events,
    step,
)


@dataclass(frozen=True)
class RelocationMap:
    """old key -> (new block start, new block length).

    Keys are 1-based old positions for dispatch_project and StateNodes for
    specialize.
    """

    entries: dict

    def block_start(self, key) -> int:
        return self.entries[key][0]

    def block_len(self, key) -> int:
        return self.entries[key][1]

    def to_csv(self) -> str:
        lines = ["old_key,new_start,new_len"]
        for key, (start, length) in self.entries.items():
            if isinstance(key, StateNode):
                rendered = f"{key.pc}:" + "-".join(str(v) for v in key.registers)
            else:
                rendered = str(key)
            lines.append(f"{rendered},{start},{length}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ProjectionReport:
    mode: str
    source: Program
    output: Program
    relocation: RelocationMap
    length_before: int
    length_after: int
    mid_before: MidResult
    mid_after: MidResult
    aux_introduced: frozenset[BasicInstruction]

    @property
    def aux_foci(self) -> frozenset[str]:
        return frozenset(b.focus for b in self.aux_introduced)

    def output_params(self, params: ToolParams) -> ToolParams:
        """Params for running or analyzing the projected program: the
        introduced cells are aux-marked and Boolean-cell bound."""
        cells = bound_cell_foci(self.source, params) | self.aux_foci
        return replace(
            params,
            aux=params.aux.union(AuxSpec.of_foci(self.aux_foci)),
            cell_foci=frozenset(cells),
        )

    def summary(self) -> str:
        before = _mid_text(self.mid_before)
        after = _mid_text(self.mid_after)
        return (
            f"mode={self.mode}\n"
            f"lengthBefore={self.length_before}\n"
            f"lengthAfter={self.length_after}\n"
            f"midBefore={before}\n"
            f"midAfter={after}\n"
            f"auxIntroduced={','.join(sorted(str(b) for b in self.aux_introduced))}\n"
        )


def _mid_text(result: MidResult) -> str:
    v = result.finite_value
    return "unbounded" if v is None else str(v)


def _jump(from_pos: int, to_pos: int) -> Instruction:
    d = to_pos - from_pos
    assert d != 0, "a block never jumps to itself"
    return FwdJump(d) if d > 0 else BwdJump(-d)


_DEADLOCK = FwdJump(0)


def specialize(p: Program, params: ToolParams) -> ProjectionReport:
    """Unfold the reachable state graph into a register-free program.

    Every reachable (position, registers) state becomes one block: basics
    and tests are copied with explicit successor jumps, register sets and
    resolved indirect jumps become single direct jumps, deadlocking
    outcomes become '#0'.  Only reachable states are emitted.
    """
    graph = build_state_graph(p, params)
    order = list(graph.edges)
    sizes = {}
    for node in order:
        match p.at(node.pc):
            case Halt():
                sizes[node] = 1
            case Plain():
                sizes[node] = 2
            case PosTest() | NegTest():
                sizes[node] = 3
            case _:
                sizes[node] = 1
    starts = {}
    at = 1
    for node in order:
        starts[node] = at
        at += sizes[node]

    def succ_jump(from_pos: int, target: StateNode | None) -> Instruction:
        if target is None:
            return _DEADLOCK
        return _jump(from_pos, starts[target])

    out: list[Instruction] = []
    for node in order:
        u = p.at(node.pc)
        base = starts[node]
        kind, branches = node_successors(p, node)
        match u:
            case Halt():
                out.append(u)
            case Plain():
                out.append(u)
                out.append(succ_jump(base + 1, branches[0]))
            case PosTest():
                on_true, on_false = branches
                out.append(u)
                out.append(succ_jump(base + 1, on_true))
                out.append(succ_jump(base + 2, on_false))
            case NegTest():
                on_true, on_false = branches
                out.append(u)
                out.append(succ_jump(base + 1, on_false))
                out.append(succ_jump(base + 2, on_true))
            case _:
                # Direct jumps keep their role; register sets and indirect
                # jumps resolve against the state and become direct jumps.
                out.append(succ_jump(base, branches[0]))

    output = Program(tuple(out))
    relocation = RelocationMap({node: (starts[node], sizes[node]) for node in order})
    mid_before = compute_mid(graph, params.aux)
    mid_after = compute_mid(build_state_graph(output, params), params.aux)
    return ProjectionReport(
        mode="specialize",
        source=p,
        output=output,
        relocation=relocation,
        length_before=len(p),
        length_after=len(output),
        mid_before=mid_before,
        mid_after=mid_after,
        aux_introduced=frozenset(),
    )


def _tree_size(levels: int) -> int:
    # One test per internal node, a branch jump per non-bottom node, two
    # leaf jumps per bottom node: 5 * 2^(levels-1) - 2 instructions.
    return 5 * 2 ** (levels - 1) - 2


def _fresh_cell_prefix(p: Program) -> str:
    foci = {b.focus for u in p.instructions if (b := basic_of(u)) is not None}
    prefix = "r"
    while any(re.fullmatch(rf"{prefix}\d+b\d+", f) for f in foci):
        prefix += "r"
    return prefix


def dispatch_project(p: Program, params: ToolParams) -> ProjectionReport:
    """Replace registers with aux Boolean cells, keeping the block layout.

    With b = bits needed for [0, maxn], register i is held in cells
    <prefix>ib0..b-1 (prefix 'r' unless taken).  A register set writes all
    b bits; an indirect jump becomes a balanced decision tree testing bits
    most-significant-first whose 2^b leaves are direct jumps to the
    relocated targets, in ascending value order; value 0 and out-of-range
    targets deadlock.
    """
    diags = validate(p, params)
    if diags:
        raise ValueError("invalid program: " + "; ".join(map(str, diags)))
    length = len(p)
    bits = params.maxn.bit_length()
    prefix = _fresh_cell_prefix(p)
    tree = _tree_size(bits)

    sizes = [0] * (length + 2)
    for pos in range(length, 0, -1):
        match p.at(pos):
            case RegSet():
                sizes[pos] = bits
            case IndFwdJump() | IndBwdJump():
                sizes[pos] = tree
            case PosTest() | NegTest():
                # A bare test skips exactly one output instruction on its
                # non-proceeding reply, so it can only be copied verbatim
                # when the following block is a single instruction.
                sizes[pos] = 1 if (pos + 1 > length or sizes[pos + 1] == 1) else 3
            case _:
                sizes[pos] = 1
    starts = [0] * (length + 1)
    at = 1
    for pos in range(1, length + 1):
        starts[pos] = at
        at += sizes[pos]

    aux_used: set[BasicInstruction] = set()

    def cell(register: int, bit: int, method: str) -> BasicInstruction:
        b = BasicInstruction(f"{prefix}{register}b{bit}", method)
        aux_used.add(b)
        return b

    def retarget(from_pos: int, old_target: int) -> Instruction:
        if old_target < 1 or old_target > length:
            return _DEADLOCK
        return _jump(from_pos, starts[old_target])

    out: list[Instruction] = []

    def emit_tree(register: int, sign: int, old_pos: int, at: int) -> int:
        def leaf(pos_out: int, value: int) -> Instruction:
            if value == 0:
                return _DEADLOCK
            return retarget(pos_out, old_pos + sign * value)

        def rec(value_prefix: int, levels: int, pos_out: int) -> int:
            if levels == 1:
                v0 = value_prefix << 1
                out.append(NegTest(cell(register, 0, "get")))
                out.append(leaf(pos_out + 1, v0))
                out.append(leaf(pos_out + 2, v0 | 1))
                return pos_out + 3
            zero_size = _tree_size(levels - 1)
            one_start = pos_out + 2 + zero_size
            out.append(PosTest(cell(register, levels - 1, "get")))
            out.append(_jump(pos_out + 1, one_start))
            end = rec(value_prefix << 1, levels - 1, pos_out + 2)
            assert end == one_start
            return rec((value_prefix << 1) | 1, levels - 1, one_start)

        return rec(0, bits, at)

    for pos in range(1, length + 1):
        u = p.at(pos)
        base = starts[pos]
        match u:
            case Halt() | Plain():
                out.append(u)
            case PosTest() | NegTest():
                if sizes[pos] == 1:
                    out.append(u)
                else:
                    out.append(u)
                    out.append(retarget(base + 1, pos + 1))
                    out.append(retarget(base + 2, pos + 2))
            case FwdJump(l):
                out.append(u if l == 0 else retarget(base, pos + l))
            case BwdJump(l):
                out.append(u if l == 0 else retarget(base, pos - l))
            case RegSet(i, n):
                for bit in range(bits - 1, -1, -1):
                    method = "set:T" if (n >> bit) & 1 else "set:F"
                    out.append(Plain(cell(i, bit, method)))
            case IndFwdJump(i):
                end = emit_tree(i, 1, pos, base)
                assert end == base + tree
            case IndBwdJump(i):
                end = emit_tree(i, -1, pos, base)
                assert end == base + tree

    output = Program(tuple(out))
    relocation = RelocationMap(
        {pos: (starts[pos], sizes[pos]) for pos in range(1, length + 1)}
    )
    aux_introduced = frozenset(aux_used)
    aux_after = params.aux.union(AuxSpec.of_foci(frozenset(b.focus for b in aux_introduced)))
    mid_before = compute_mid(build_state_graph(p, params), params.aux)
    mid_after = compute_mid(build_state_graph(output, params), aux_after)
    return ProjectionReport(
        mode="dispatch",
        source=p,
        output=output,
        relocation=relocation,
        length_before=length,
        length_after=len(output),
        mid_before=mid_before,
        mid_after=mid_after,
        aux_introduced=aux_introduced,
    )


def thread_jumps(p: Program) -> Program:
    """Retarget each direct jump to the end of its jump chain.

    Chains stop at the first non-jump instruction or at a jump that itself
    deadlocks (distance 0 or out-of-range target); jump cycles are left
    intact.  Length-preserving and idempotent.
    """
    if not is_pglb(p):
        raise ValueError("thread_jumps expects a register-free program")
    src = p.instructions
    length = len(src)
    out = list(src)
    for pos in range(1, length + 1):
        u = src[pos - 1]
        if not isinstance(u, (FwdJump, BwdJump)):
            continue
        if u.distance == 0:
            continue
        target = pos + u.distance if isinstance(u, FwdJump) else pos - u.distance
        if target < 1 or target > length:
            continue
        visited = {pos}
        cur = target
        cyclic = False
        while isinstance(v := src[cur - 1], (FwdJump, BwdJump)):
            if cur in visited:
                cyclic = True
                break
            visited.add(cur)
            if v.distance == 0:
                break
            nxt = cur + v.distance if isinstance(v, FwdJump) else cur - v.distance
            if nxt < 1 or nxt > length:
                break
            cur = nxt
        if cyclic or cur == target:
            continue
        out[pos - 1] = _jump(pos, cur)
    return Program(tuple(out))


@dataclass(frozen=True)
class OracleSuite:
    """Exhaustive reply prefixes up to a branch depth, then seeded streams.

    `step_limit` bounds each checked run (further capped by the params
    limit); runs cut by it are inconclusive, never counterexamples.
    """

    exhaustive_depth: int = 10
    seeds: tuple[int, ...] = (101, 102, 103, 104, 105)
    step_limit: int = 4096


@dataclass(frozen=True)
class Counterexample:
    oracle: str
    p_events: tuple[ObservableEvent, ...]
    q_events: tuple[ObservableEvent, ...]
    p_final: Status | None
    q_final: Status | None


@dataclass(frozen=True)
class Verdict:
    equivalent: bool
    counterexample: Counterexample | None
    checked: int
    inconclusive: int


def _reply_prefixes(
    p: Program, params: ToolParams, depth: int, step_limit: int
) -> set[tuple[bool, ...]]:
    """All oracle-reply prefixes of runs of p, branching up to `depth`."""
    seqs: set[tuple[bool, ...]] = set()
    stack = [(initial_config(p, params, Scripted(())), 0, ())]
    while stack:
        cfg, steps, sigma = stack.pop()
        if cfg.status is not Status.RUNNING or steps >= step_limit:
            seqs.add(sigma)
            continue
        u = p.at(cfg.pc)
        b = basic_of(u)
        consuming = isinstance(u, (PosTest, NegTest)) and b.focus not in cfg.cells
        if consuming:
            if len(sigma) >= depth:
                seqs.add(sigma)
                continue
            for r in (False, True):
                nxt, _ = step(p, replace(cfg, oracle=Scripted((r,))))
                stack.append((nxt, steps + 1, sigma + (r,)))
        else:
            nxt, _ = step(p, cfg)
            stack.append((nxt, steps + 1, sigma))
    return seqs


def _run_bounded(p: Program, params: ToolParams, oracle, step_limit: int):
    """Run to completion, step limit, or oracle exhaustion (final=None)."""
    cfg = initial_config(p, params, oracle)
    events: list[TraceEvent] = []
    for _ in range(step_limit):
        try:
            cfg, ev = step(p, cfg)
        except OracleExhausted:
            return tuple(events), None
        events.append(ev)
        if cfg.status is not Status.RUNNING:
            return tuple(events), cfg.status
    return tuple(events), Status.STEP_LIMIT


def check_equivalence(
    p: Program, q: Program, params: ToolParams, suite: OracleSuite
) -> Verdict:
    """Compare observable traces of p and q over the oracle suite.

    Runs cut by the step limit or by reply-prefix exhaustion are
    inconclusive: their common observable prefix must still agree, but no
    verdict is drawn from the cut itself.  The first disagreement under the
    fixed oracle ordering is reported.
    """
    for prog in (p, q):
        diags = validate(prog, params)
        if diags:
            raise ValueError("invalid program: " + "; ".join(map(str, diags)))
    aux = params.aux
    budget = min(params.step_limit, suite.step_limit)
    checked = 0
    inconclusive = 0

    def compare(label, p_run, q_run):
        nonlocal checked, inconclusive
        (p_ev, p_final), (q_ev, q_final) = p_run, q_run
        po = observable_events(p_ev, aux)
        qo = observable_events(q_ev, aux)
        checked += 1
        conclusive = p_final in (Status.TERMINATED, Status.DEADLOCKED) and q_final in (
            Status.TERMINATED,
            Status.DEADLOCKED,
        )
        if conclusive:
            if po == qo and p_final == q_final:
                return None
            return Counterexample(label, po, qo, p_final, q_final)
        inconclusive += 1
        m = min(len(po), len(qo))
        if po[:m] != qo[:m]:
            return Counterexample(label, po, qo, p_final, q_final)
        return None

    prefixes = _reply_prefixes(p, params, suite.exhaustive_depth, budget)
    prefixes |= _reply_prefixes(q, params, suite.exhaustive_depth, budget)
    for sigma in sorted(prefixes):
        label = "exhaustive:" + "".join("T" if r else "F" for r in sigma)
        cex = compare(
            label,
            _run_bounded(p, params, Exhaustive(sigma), budget),
            _run_bounded(q, params, Exhaustive(sigma), budget),
        )
        if cex:
            return Verdict(False, cex, checked, inconclusive)
    for seed in suite.seeds:
        cex = compare(
            f"seeded:{seed}",
            _run_bounded(p, params, Seeded(seed), budget),
            _run_bounded(q, params, Seeded(seed), budget),
        )
        if cex:
            return Verdict(False, cex, checked, inconclusive)
    return Verdict(True, None, checked, inconclusive)
