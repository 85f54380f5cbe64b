"""Exact internal-delay analysis over the reachable machine-state graph.

Internal delay weighs each executed instruction: external (non-aux) basic
instructions and halt cost 0, direct jumps, register sets and aux basics
cost 1, indirect jumps cost 2.  The maximal internal delay (MID) of a
program is the largest total weight of a run segment closed between two
consecutive zero-weight occurrences ("anchors").

The state graph over-approximates runs by treating every test reply as
nondeterministic — Boolean-cell determinism is deliberately ignored, so the
analysis needs no service bindings.  `brute_force_mid` is an independent
run-enumeration oracle over the same reply nondeterminism.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

from .isa import (
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
    validate,
)
from .vm import MachineConfig, Scripted, Status, step

AuxPredicate = Callable[[BasicInstruction], bool]


def id_weight(u: Instruction, aux: AuxPredicate) -> int:
    """Internal-delay weight of one instruction occurrence."""
    match u:
        case Plain(b) | PosTest(b) | NegTest(b):
            return 1 if aux(b) else 0
        case FwdJump() | BwdJump() | RegSet():
            return 1
        case IndFwdJump() | IndBwdJump():
            return 2
        case Halt():
            return 0
    raise TypeError(f"not an instruction: {u!r}")


class StateNode(NamedTuple):
    pc: int
    registers: tuple[int, ...]


class StateLimitExceeded(RuntimeError):
    def __init__(self, limit: int):
        self.limit = limit
        super().__init__(f"state graph exceeds the configured limit of {limit} nodes")


def node_successors(
    p: Program, node: StateNode
) -> tuple[str, tuple[StateNode | None, ...]]:
    """Role-tagged successors of a state under nondeterministic replies.

    Returns (kind, branches): kind is 'halt', 'test' or 'next'.  Tests list
    (on-true, on-false); every other kind lists its single continuation.
    None marks an outcome that deadlocks.
    """
    length = len(p)
    pc, regs = node
    u = p.at(pc)

    def goto(target: int | None) -> StateNode | None:
        if target is None or target < 1 or target > length:
            return None
        return StateNode(target, regs)

    match u:
        case Halt():
            return "halt", ()
        case Plain():
            return "next", (goto(pc + 1),)
        case PosTest():
            return "test", (goto(pc + 1), goto(pc + 2))
        case NegTest():
            return "test", (goto(pc + 2), goto(pc + 1))
        case FwdJump(l):
            return "next", (goto(pc + l if l > 0 else None),)
        case BwdJump(l):
            return "next", (goto(pc - l if l > 0 else None),)
        case RegSet(i, n):
            new_regs = regs[: i - 1] + (n,) + regs[i:]
            if pc + 1 > length:
                return "next", (None,)
            return "next", (StateNode(pc + 1, new_regs),)
        case IndFwdJump(i):
            l = regs[i - 1]
            return "next", (goto(pc + l if l > 0 else None),)
        case IndBwdJump(i):
            l = regs[i - 1]
            return "next", (goto(pc - l if l > 0 else None),)
    raise TypeError(f"not an instruction: {u!r}")


@dataclass
class StateGraph:
    """Reachable closure from (pc=1, all registers 0); edges in BFS order."""

    program: Program
    initial: StateNode
    edges: dict[StateNode, tuple[StateNode, ...]]
    terminated: frozenset[StateNode]
    deadlocked: frozenset[StateNode]

    @property
    def nodes(self):
        return self.edges.keys()

    @property
    def node_count(self) -> int:
        return len(self.edges)

    @property
    def edge_count(self) -> int:
        return sum(len(s) for s in self.edges.values())

    def weight(self, node: StateNode, aux: AuxPredicate) -> int:
        return id_weight(self.program.at(node.pc), aux)


def build_state_graph(p: Program, params: ToolParams) -> StateGraph:
    diags = validate(p, params)
    if diags:
        raise ValueError("invalid program: " + "; ".join(map(str, diags)))
    initial = StateNode(1, (0,) * params.maxr)
    edges: dict[StateNode, tuple[StateNode, ...]] = {}
    terminated: set[StateNode] = set()
    deadlocked: set[StateNode] = set()
    interned: dict[tuple[int, ...], tuple[int, ...]] = {initial.registers: initial.registers}
    queue: deque[StateNode] = deque([initial])
    seen = {initial}
    while queue:
        node = queue.popleft()
        kind, branches = node_successors(p, node)
        succs = []
        if kind == "halt":
            terminated.add(node)
        else:
            if any(b is None for b in branches):
                deadlocked.add(node)
            for b in branches:
                if b is None:
                    continue
                regs = interned.setdefault(b.registers, b.registers)
                if regs is not b.registers:
                    b = StateNode(b.pc, regs)
                succs.append(b)
                if b not in seen:
                    seen.add(b)
                    queue.append(b)
        edges[node] = tuple(succs)
        if len(seen) > params.state_limit:
            raise StateLimitExceeded(params.state_limit)
    return StateGraph(p, initial, edges, frozenset(terminated), frozenset(deadlocked))


@dataclass(frozen=True)
class Finite:
    value: int


@dataclass(frozen=True)
class Unbounded:
    pass


@dataclass(frozen=True)
class MidResult:
    """Outcome of the MID computation.

    For a Finite value, `witness` is a run segment (state sequence) with
    zero-weight endpoints achieving the value.  For Unbounded, the
    (stem, cycle, exit_path) triple exhibits a positive-weight anchor-free
    cycle with anchors on both sides, and `witness` is one replayable pass:
    stem, one full cycle lap, exit.
    """

    value: Finite | Unbounded
    witness: tuple[StateNode, ...]
    stem: tuple[StateNode, ...] = ()
    cycle: tuple[StateNode, ...] = ()
    exit_path: tuple[StateNode, ...] = ()
    no_anchor: bool = False
    open_tail: int = 0
    open_tail_unbounded: bool = False

    @property
    def finite_value(self) -> int | None:
        return self.value.value if isinstance(self.value, Finite) else None


def _find_cycle(
    nodes: set[StateNode], edges: dict[StateNode, tuple[StateNode, ...]]
) -> tuple[StateNode, ...] | None:
    """Any cycle in the induced subgraph, as a node tuple, else None."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = dict.fromkeys(nodes, WHITE)
    for root in nodes:
        if color[root] != WHITE:
            continue
        stack: list[tuple[StateNode, int]] = [(root, 0)]
        path: list[StateNode] = []
        while stack:
            node, idx = stack.pop()
            if idx == 0:
                color[node] = GRAY
                path.append(node)
            succs = [t for t in edges[node] if t in nodes]
            if idx < len(succs):
                stack.append((node, idx + 1))
                t = succs[idx]
                if color[t] == GRAY:
                    return tuple(path[path.index(t):])
                if color[t] == WHITE:
                    stack.append((t, 0))
            else:
                color[node] = BLACK
                path.pop()
    return None


def compute_mid(graph: StateGraph, aux: AuxPredicate) -> MidResult:
    p = graph.program
    wpc = [0] + [id_weight(p.at(pos), aux) for pos in p.positions()]
    edges = graph.edges

    anchors = [n for n in edges if wpc[n.pc] == 0]
    if not anchors:
        return MidResult(Finite(0), (), no_anchor=True)

    # Nonzero-weight region reachable from an anchor without touching
    # another zero-weight node, with parents for witness stems.
    parent: dict[StateNode, StateNode] = {}
    frontier: deque[StateNode] = deque()
    for a in anchors:
        for s in edges[a]:
            if wpc[s.pc] > 0 and s not in parent:
                parent[s] = a
                frontier.append(s)
    reach_from = set(parent)
    while frontier:
        n = frontier.popleft()
        for t in edges[n]:
            if wpc[t.pc] > 0 and t not in reach_from:
                reach_from.add(t)
                parent[t] = n
                frontier.append(t)

    # Nonzero nodes that can reach an anchor through nonzero nodes.
    rev: dict[StateNode, list[StateNode]] = {}
    end_nodes = []
    for n in reach_from:
        closes = False
        for t in edges[n]:
            if wpc[t.pc] > 0:
                if t in reach_from:
                    rev.setdefault(t, []).append(n)
            else:
                closes = True
        if closes:
            end_nodes.append(n)
    reach_to: set[StateNode] = set(end_nodes)
    frontier = deque(end_nodes)
    while frontier:
        n = frontier.popleft()
        for u in rev.get(n, ()):
            if u not in reach_to:
                reach_to.add(u)
                frontier.append(u)

    segment_nodes = reach_from & reach_to

    cycle = _find_cycle(segment_nodes, edges)
    if cycle is not None:
        c0 = cycle[0]
        stem = _walk_parents(parent, wpc, c0)
        exit_path = _exit_to_anchor(edges, wpc, segment_nodes, c0)
        witness = stem + cycle[1:] + (c0,) + exit_path[1:]
        tail = _open_tail(edges, wpc, anchors, reach_from, segment_nodes, assume_acyclic=False)
        return MidResult(
            Unbounded(), witness, stem=stem, cycle=cycle, exit_path=exit_path,
            open_tail=tail[0], open_tail_unbounded=tail[1],
        )

    # Acyclic case: longest interior-weight path from anchor successors
    # back to an anchor, by DP in reverse topological order.
    order = _topological(segment_nodes, edges)
    best_from: dict[StateNode, int] = {}
    best_next: dict[StateNode, StateNode | None] = {}
    for n in reversed(order):
        best: int | None = None
        chosen: StateNode | None = None
        for t in edges[n]:
            if wpc[t.pc] == 0:
                cand = 0
                nxt = t
            elif t in segment_nodes:
                cand = best_from[t]
                nxt = t
            else:
                continue
            if best is None or cand > best:
                best, chosen = cand, nxt
        assert best is not None  # n reaches an anchor by construction
        best_from[n] = wpc[n.pc] + best
        best_next[n] = chosen

    mid = 0
    arg: tuple[StateNode, StateNode] | None = None
    for a in anchors:
        for s in edges[a]:
            if s in segment_nodes and best_from[s] > mid:
                mid = best_from[s]
                arg = (a, s)

    if arg is None:
        witness = (anchors[0],)
    else:
        a, s = arg
        chain = [a, s]
        while wpc[chain[-1].pc] > 0:
            chain.append(best_next[chain[-1]])
        witness = tuple(chain)

    tail = _open_tail(edges, wpc, anchors, reach_from, segment_nodes, assume_acyclic=True)
    return MidResult(Finite(mid), witness, open_tail=tail[0], open_tail_unbounded=tail[1])


def _walk_parents(parent, wpc, node: StateNode) -> tuple[StateNode, ...]:
    path = [node]
    while wpc[path[-1].pc] > 0:
        path.append(parent[path[-1]])
    return tuple(reversed(path))


def _exit_to_anchor(edges, wpc, region, start: StateNode) -> tuple[StateNode, ...]:
    prev = {start: None}
    queue = deque([start])
    while queue:
        n = queue.popleft()
        for t in edges[n]:
            if wpc[t.pc] == 0:
                path = [t, n]
                while prev[path[-1]] is not None:
                    path.append(prev[path[-1]])
                return tuple(reversed(path))
            if t in region and t not in prev:
                prev[t] = n
                queue.append(t)
    raise AssertionError("region node cannot reach an anchor")


def _topological(nodes: set[StateNode], edges) -> list[StateNode]:
    indeg = dict.fromkeys(nodes, 0)
    for n in nodes:
        for t in edges[n]:
            if t in indeg:
                indeg[t] += 1
    queue = deque(n for n, d in indeg.items() if d == 0)
    order = []
    while queue:
        n = queue.popleft()
        order.append(n)
        for t in edges[n]:
            if t in indeg:
                indeg[t] -= 1
                if indeg[t] == 0:
                    queue.append(t)
    assert len(order) == len(nodes)
    return order


def _open_tail(edges, wpc, anchors, reach_from, segment_nodes, assume_acyclic):
    """Max weight of a nonzero path from an anchor that never closes.

    Returns (value, unbounded).  Paths pumping a cycle that cannot reach an
    anchor never close, so any cycle in the from-anchor region outside the
    segment region makes the open tail unbounded.
    """
    tail_region = reach_from
    if not tail_region:
        return 0, False
    if _find_cycle(tail_region - segment_nodes, edges) is not None:
        return 0, True
    if not assume_acyclic and _find_cycle(tail_region, edges) is not None:
        return 0, True
    best: dict[StateNode, int | None] = {}
    for n in reversed(_topological(tail_region, edges)):
        succs = edges[n]
        if not succs:
            best[n] = wpc[n.pc]
            continue
        cont = [best[t] for t in succs if wpc[t.pc] > 0 and best.get(t) is not None]
        best[n] = wpc[n.pc] + max(cont) if cont else None
    out = 0
    for a in anchors:
        for s in edges[a]:
            if wpc[s.pc] > 0 and best.get(s) is not None:
                out = max(out, best[s])
    return out, False


def brute_force_mid(p: Program, params: ToolParams, depth: int) -> int:
    """Independent oracle: explore every reply sequence up to `depth` steps.

    Replies are fully nondeterministic (cell bindings ignored), matching the
    state-graph semantics.  Sound lower bound of the true MID; exact once
    `depth` exceeds the longest simple path of an acyclic state graph.
    Arriving at an already-explored (state, accumulation) with no more
    remaining steps is pruned — the continuations are a subset of what was
    already explored, so the result is that of the full enumeration.
    """
    diags = validate(p, params)
    if diags:
        raise ValueError("invalid program: " + "; ".join(map(str, diags)))
    aux = params.aux
    # No cell bindings: every test reply is a free choice, as in the graph.
    initial = MachineConfig(1, (0,) * params.maxr, {}, Scripted(()))
    best = 0
    earliest: dict[tuple[int, tuple[int, ...], int, bool], int] = {}
    # DFS over the run tree: (config, steps, weight since last anchor, seen one)
    stack: list[tuple[MachineConfig, int, int, bool]] = [(initial, 0, 0, False)]
    while stack:
        cfg, steps, acc, opened = stack.pop()
        if cfg.status is not Status.RUNNING or steps >= depth:
            continue
        key = (cfg.pc, cfg.registers, acc, opened)
        prior = earliest.get(key)
        if prior is not None and prior <= steps:
            continue
        earliest[key] = steps
        u = p.at(cfg.pc)
        w = id_weight(u, aux)
        if w == 0:
            if opened and acc > best:
                best = acc
            nacc, nopened = 0, True
        else:
            nacc, nopened = (acc + w if opened else 0), opened
        if isinstance(u, (PosTest, NegTest)):
            for r in (False, True):
                nxt, _ = step(p, replace(cfg, oracle=Scripted((r,))))
                stack.append((nxt, steps + 1, nacc, nopened))
        else:
            nxt, _ = step(p, cfg)
            stack.append((nxt, steps + 1, nacc, nopened))
    return best


def replay_segment(p: Program, params: ToolParams, nodes: tuple[StateNode, ...]) -> int:
    """Replay a witness through vm.step and return its interior weight sum.

    Raises AssertionError if the claimed node sequence is not a run segment.
    """
    assert nodes, "empty witness"
    for a, b in zip(nodes, nodes[1:]):
        u = p.at(a.pc)
        replies: tuple[bool, ...] = ()
        if isinstance(u, PosTest):
            replies = (b.pc == a.pc + 1,)
        elif isinstance(u, NegTest):
            replies = (b.pc != a.pc + 1,)
        cfg = MachineConfig(a.pc, a.registers, {}, Scripted(replies))
        nxt, _ = step(p, cfg)
        assert nxt.status is Status.RUNNING, f"segment dies at {a}"
        assert (nxt.pc, nxt.registers) == (b.pc, b.registers), f"bad edge {a} -> {b}"
    return sum(id_weight(p.at(n.pc), params.aux) for n in nodes[1:-1])
