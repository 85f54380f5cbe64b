"""Instruction model, concrete syntax, and static checks for PGLB/PGLBij programs.

A program is a non-empty, semicolon-separated sequence of primitive
instructions.  PGLBij is the full notation (direct jumps, register sets,
indirect jumps); PGLB is the register-free fragment.  Positions are 1-based
throughout, matching the counting used by the jump instructions themselves.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterator, Union

FOCUS_PATTERN = re.compile(r"[a-z][a-z0-9]*")
METHOD_PATTERN = re.compile(r"[a-zA-Z][a-zA-Z0-9]*(?::[a-zA-Z0-9]+)*")

#: Reserved to keep `set:i:n` unambiguous under single-token lookahead.
RESERVED_FOCUS = "set"


class ParseError(ValueError):
    """Raised on malformed program text; carries the 1-based source position."""

    def __init__(self, message: str, line: int, column: int, token: str = ""):
        self.line = line
        self.column = column
        self.token = token
        super().__init__(f"{line}:{column}: {message}")


@dataclass(frozen=True)
class BasicInstruction:
    """A focus.method pair naming one request to the execution environment."""

    focus: str
    method: str

    def __post_init__(self) -> None:
        if not FOCUS_PATTERN.fullmatch(self.focus):
            raise ValueError(f"bad focus {self.focus!r}")
        if self.focus == RESERVED_FOCUS:
            raise ValueError(f"focus {RESERVED_FOCUS!r} is reserved")
        if not METHOD_PATTERN.fullmatch(self.method):
            raise ValueError(f"bad method {self.method!r}")

    def __str__(self) -> str:
        return f"{self.focus}.{self.method}"


@dataclass(frozen=True)
class Plain:
    """Execute the basic instruction and proceed regardless of its reply."""

    basic: BasicInstruction


@dataclass(frozen=True)
class PosTest:
    """Execute the basic instruction; on True proceed, on False skip one."""

    basic: BasicInstruction


@dataclass(frozen=True)
class NegTest:
    """Execute the basic instruction; on False proceed, on True skip one."""

    basic: BasicInstruction


@dataclass(frozen=True)
class FwdJump:
    distance: int

    def __post_init__(self) -> None:
        if self.distance < 0:
            raise ValueError("jump distance must be a natural number")


@dataclass(frozen=True)
class BwdJump:
    distance: int

    def __post_init__(self) -> None:
        if self.distance < 0:
            raise ValueError("jump distance must be a natural number")


@dataclass(frozen=True)
class RegSet:
    """Store a positive literal into a register and proceed."""

    register: int
    value: int

    def __post_init__(self) -> None:
        if self.register < 1:
            raise ValueError("register index must be >= 1")
        if self.value < 1:
            raise ValueError("register literal must be >= 1")


@dataclass(frozen=True)
class IndFwdJump:
    """Forward jump whose distance is read from a register."""

    register: int

    def __post_init__(self) -> None:
        if self.register < 1:
            raise ValueError("register index must be >= 1")


@dataclass(frozen=True)
class IndBwdJump:
    """Backward jump whose distance is read from a register."""

    register: int

    def __post_init__(self) -> None:
        if self.register < 1:
            raise ValueError("register index must be >= 1")


@dataclass(frozen=True)
class Halt:
    """Terminate execution successfully."""


Instruction = Union[
    Plain, PosTest, NegTest, FwdJump, BwdJump, RegSet, IndFwdJump, IndBwdJump, Halt
]

#: Instruction kinds that are part of the register-free PGLB fragment.
_PGLB_KINDS = (Plain, PosTest, NegTest, FwdJump, BwdJump, Halt)


def basic_of(u: Instruction) -> BasicInstruction | None:
    """The basic instruction carried by `u`, if any."""
    if isinstance(u, (Plain, PosTest, NegTest)):
        return u.basic
    return None


def render_instruction(u: Instruction) -> str:
    match u:
        case Plain(b):
            return str(b)
        case PosTest(b):
            return f"+{b}"
        case NegTest(b):
            return f"-{b}"
        case FwdJump(l):
            return f"#{l}"
        case BwdJump(l):
            return f"\\#{l}"
        case RegSet(i, n):
            return f"set:{i}:{n}"
        case IndFwdJump(i):
            return f"i#{i}"
        case IndBwdJump(i):
            return f"i\\#{i}"
        case Halt():
            return "!"
    raise TypeError(f"not an instruction: {u!r}")


@dataclass(frozen=True)
class Program:
    """An immutable instruction sequence; `at()` uses 1-based positions."""

    instructions: tuple[Instruction, ...]

    def __post_init__(self) -> None:
        if not self.instructions:
            raise ValueError("a program has at least one instruction")

    def __len__(self) -> int:
        return len(self.instructions)

    def at(self, position: int) -> Instruction:
        if not 1 <= position <= len(self.instructions):
            raise IndexError(f"position {position} out of range")
        return self.instructions[position - 1]

    def positions(self) -> Iterator[int]:
        return iter(range(1, len(self.instructions) + 1))

    def __str__(self) -> str:
        return render_program(self)


def render_program(p: Program) -> str:
    """Canonical text: instructions joined by ' ; ', no trailing separator."""
    return " ; ".join(render_instruction(u) for u in p.instructions)


# One anchored pattern per instruction form.  `set:`/`i#` are tried before
# the basic-instruction form so `set` and `i` never lex as foci of a basic.
_INSTR_FORMS: list[tuple[re.Pattern[str], Callable[[re.Match[str]], Instruction]]] = [
    (re.compile(r"!"), lambda m: Halt()),
    (re.compile(r"set:(\d+):(\d+)"), lambda m: RegSet(int(m.group(1)), int(m.group(2)))),
    (re.compile(r"i#(\d+)"), lambda m: IndFwdJump(int(m.group(1)))),
    (re.compile(r"i\\#(\d+)"), lambda m: IndBwdJump(int(m.group(1)))),
    (re.compile(r"#(\d+)"), lambda m: FwdJump(int(m.group(1)))),
    (re.compile(r"\\#(\d+)"), lambda m: BwdJump(int(m.group(1)))),
    (
        re.compile(r"([+-]?)([a-z][a-z0-9]*)\.([a-zA-Z][a-zA-Z0-9]*(?::[a-zA-Z0-9]+)*)"),
        lambda m: {"": Plain, "+": PosTest, "-": NegTest}[m.group(1)](
            BasicInstruction(m.group(2), m.group(3))
        ),
    ),
]


def _strip_comments(text: str) -> str:
    # '//' starts a comment running to end of line; the grammar has no
    # string literals, so a plain per-line cut is safe.
    return "\n".join(line.split("//", 1)[0] for line in text.split("\n"))


def parse_program(text: str) -> Program:
    """Parse program text (UTF-8, '//' line comments) into a Program."""
    stripped = _strip_comments(text)
    line_starts = [0]
    for i, ch in enumerate(stripped):
        if ch == "\n":
            line_starts.append(i + 1)

    def position(offset: int) -> tuple[int, int]:
        lo, hi = 0, len(line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if line_starts[mid] <= offset:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, offset - line_starts[lo] + 1

    instructions: list[Instruction] = []
    offset = 0
    for chunk in stripped.split(";"):
        body = chunk.strip()
        start = offset + (len(chunk) - len(chunk.lstrip()))
        line, col = position(start)
        offset += len(chunk) + 1
        if not body:
            raise ParseError("empty instruction", line, col)
        for pattern, build in _INSTR_FORMS:
            m = pattern.fullmatch(body)
            if m:
                try:
                    instructions.append(build(m))
                except ValueError as exc:
                    raise ParseError(str(exc), line, col, body) from None
                break
        else:
            raise ParseError(f"unrecognized instruction {body!r}", line, col, body)
    return Program(tuple(instructions))


@dataclass(frozen=True)
class AuxSpec:
    """Predicate over basic instructions given as focus.method patterns.

    Each pattern is an exact `focus.method` pair or `focus.*`, the wildcard
    covering every method of that focus.
    """

    patterns: frozenset[tuple[str, str | None]] = frozenset()

    @classmethod
    def parse(cls, text: str) -> "AuxSpec":
        pats: set[tuple[str, str | None]] = set()
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            focus, _, method = item.partition(".")
            if not focus or not method:
                raise ValueError(f"bad aux pattern {item!r} (want focus.method)")
            pats.add((focus, None if method == "*" else method))
        return cls(frozenset(pats))

    @classmethod
    def of_foci(cls, foci: "frozenset[str] | set[str]") -> "AuxSpec":
        return cls(frozenset((f, None) for f in foci))

    def union(self, other: "AuxSpec") -> "AuxSpec":
        return AuxSpec(self.patterns | other.patterns)

    def __call__(self, basic: BasicInstruction) -> bool:
        return (basic.focus, basic.method) in self.patterns or (
            basic.focus,
            None,
        ) in self.patterns

    def render(self) -> str:
        return ",".join(
            sorted(f"{f}.{'*' if m is None else m}" for f, m in self.patterns)
        )


@dataclass(frozen=True)
class ToolParams:
    """Machine parameters shared by the interpreter, analyzer and projections.

    `maxr`/`maxn` bound register indexes and literals; the register content
    range is a machine parameter, not a program property.  `aux` marks basic
    instructions whose occurrences count as internal delay.  `cell_foci`
    fixes which foci are bound to Boolean-cell services; None means the
    default binding of every focus matching bool<digits>.
    """

    maxr: int = 2
    maxn: int = 7
    aux: AuxSpec = field(default_factory=AuxSpec)
    step_limit: int = 1_000_000
    state_limit: int = 5_000_000
    cell_foci: frozenset[str] | None = None
    cell_init: bool = False

    def __post_init__(self) -> None:
        if self.maxr < 1 or self.maxn < 1:
            raise ValueError("maxr and maxn must be >= 1")


@dataclass(frozen=True)
class Diagnostic:
    position: int
    message: str

    def __str__(self) -> str:
        return f"position {self.position}: {self.message}"


def validate(p: Program, params: ToolParams) -> list[Diagnostic]:
    """Static checks against the machine parameters.

    Register indexes must lie in [1, maxr] and register literals in
    [1, maxn].  Jump targets are deliberately not checked: out-of-range
    jumps are legal programs that deadlock at run time.
    """
    out: list[Diagnostic] = []
    for pos in p.positions():
        u = p.at(pos)
        reg = None
        match u:
            case RegSet(i, n):
                reg = i
                if n > params.maxn:
                    out.append(Diagnostic(pos, f"register literal {n} exceeds maxn={params.maxn}"))
            case IndFwdJump(i) | IndBwdJump(i):
                reg = i
        if reg is not None and reg > params.maxr:
            out.append(Diagnostic(pos, f"register index {reg} exceeds maxr={params.maxr}"))
    return out


def is_pglb(p: Program) -> bool:
    """True iff the program avoids register and indirect-jump instructions."""
    return all(isinstance(u, _PGLB_KINDS) for u in p.instructions)
