"""Leveled oblivious branching programs and k-OBDDs.

A program is stored as a flat list of levels grouped into layers.  Every
inner node lives on exactly one level and its two edges point either at a
node of the *next* level, written as a ``(level, index)`` pair with a global
level number, or at one of the two sinks ``"sink0"`` / ``"sink1"``.  The
source is node 0 of level 0.

Sinks sit outside the levels and never count toward width.
"""
from __future__ import annotations

import json
import random
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

SINK0 = "sink0"
SINK1 = "sink1"
SINKS = (SINK0, SINK1)

FORMAT_VERSION = 1
TRUTH_TABLE_LIMIT = 24

Ref = tuple[int, int] | str


class ArityError(ValueError):
    """Input length does not match the program or function arity."""


def parse_bits(text: str) -> tuple[int, ...]:
    """Parse an assignment string; character ``j`` is the value of ``x_j``."""
    text = text.strip()
    if any(ch not in "01" for ch in text):
        raise ValueError(f"assignment must consist of '0'/'1' characters, got {text!r}")
    return tuple(int(ch) for ch in text)


def format_bits(bits: Iterable[int]) -> str:
    return "".join("1" if b else "0" for b in bits)


@dataclass(frozen=True)
class VariableOrder:
    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(v) for v in self.perm)
        object.__setattr__(self, "perm", perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"order is not a permutation of 0..{len(perm) - 1}: {perm}")

    @classmethod
    def identity(cls, n: int) -> VariableOrder:
        return cls(tuple(range(n)))

    def __len__(self):
        return len(self.perm)

    def position(self) -> dict[int, int]:
        return {v: i for i, v in enumerate(self.perm)}


@dataclass(frozen=True, slots=True)
class Node:
    """Inner node.  ``var is None`` marks a pass-through node (``lo == hi``)."""

    var: int | None
    lo: Ref
    hi: Ref
    role: str = ""

    @property
    def is_pass(self) -> bool:
        return self.var is None


def passthrough(target: Ref, role: str = "") -> Node:
    return Node(None, target, target, role)


@dataclass(frozen=True, slots=True)
class Level:
    var: int
    nodes: tuple[Node, ...]


class LeveledProgram:
    """An immutable leveled branching program made of one or more layers."""

    def __init__(self, n: int, layers: Sequence[Sequence[Level]],
                 order: VariableOrder | None = None):
        self.n = int(n)
        self.layers: tuple[tuple[Level, ...], ...] = tuple(
            tuple(layer) for layer in layers)
        self.order = order if order is not None else VariableOrder.identity(self.n)
        if len(self.order) != self.n:
            raise ValueError("order length differs from n")
        if not self.layers or not self.layers[0]:
            raise ValueError("program needs at least one level")
        self.levels: tuple[Level, ...] = tuple(
            level for layer in self.layers for level in layer)
        bounds, start = [], 0
        for layer in self.layers:
            bounds.append((start, start + len(layer)))
            start += len(layer)
        self.layer_bounds: tuple[tuple[int, int], ...] = tuple(bounds)

    def __repr__(self):
        return (f"LeveledProgram(n={self.n}, layers={len(self.layers)}, "
                f"levels={len(self.levels)})")

    def __eq__(self, other):
        if not isinstance(other, LeveledProgram):
            return NotImplemented
        return (self.n, self.order, self.layers) == (other.n, other.order, other.layers)

    def __hash__(self):
        return hash((self.n, self.order.perm, len(self.levels)))

    def layer_of_level(self, g: int) -> int:
        for li, (lo, hi) in enumerate(self.layer_bounds):
            if lo <= g < hi:
                return li
        raise IndexError(g)

    @cached_property
    def _tables(self) -> list[np.ndarray]:
        # Row r of level g holds the next-level indices for bit 0/1; two
        # trailing rows carry sink0/sink1 forward.  After the last level the
        # sinks are indices 0 and 1 of a virtual empty level.
        tables = []
        count = len(self.levels)
        for g, level in enumerate(self.levels):
            width_next = len(self.levels[g + 1].nodes) if g + 1 < count else 0

            def target(ref: Ref) -> int:
                if ref == SINK0:
                    return width_next
                if ref == SINK1:
                    return width_next + 1
                lv, idx = ref
                if lv != g + 1 or not 0 <= idx < width_next:
                    raise ValueError(f"level {g}: edge to {ref} is not into the next level")
                return idx

            table = np.empty((len(level.nodes) + 2, 2), dtype=np.intp)
            for r, node in enumerate(level.nodes):
                table[r, 0] = target(node.lo)
                table[r, 1] = target(node.hi)
            table[-2, :] = width_next
            table[-1, :] = width_next + 1
            tables.append(table.ravel())
        return tables


def _check_arity(program_n: int, bits: Sequence[int]) -> None:
    if len(bits) != program_n:
        raise ArityError(f"input has {len(bits)} bits, program expects {program_n}")


def evaluate(program: LeveledProgram, bits: Sequence[int] | str) -> int:
    """Follow the computation path for ``bits`` and return the sink label."""
    if isinstance(bits, str):
        bits = parse_bits(bits)
    _check_arity(program.n, bits)
    ref: Ref = (0, 0)
    levels = program.levels
    while not isinstance(ref, str):
        g, i = ref
        node = levels[g].nodes[i]
        nxt = node.lo if node.var is None or not bits[node.var] else node.hi
        if not isinstance(nxt, str) and nxt[0] != g + 1:
            raise ValueError(f"level {g}: edge to {nxt} skips levels")
        ref = nxt
    return 1 if ref == SINK1 else 0


def evaluate_batch(program: LeveledProgram, inputs: np.ndarray,
                   record: Iterable[int] = ()) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Evaluate many inputs at once.

    ``inputs`` is an ``(N, n)`` 0/1 array.  For every level number in
    ``record`` the node index occupied just before that level is read is
    captured; values past the last node index mean a sink was already reached.
    """
    inputs = np.asarray(inputs)
    if inputs.ndim != 2 or inputs.shape[1] != program.n:
        raise ArityError(f"inputs must have shape (N, {program.n}), got {inputs.shape}")
    cols = np.ascontiguousarray(inputs.T.astype(np.uint8, copy=False))
    record = set(record)
    captured: dict[int, np.ndarray] = {}
    cur = np.zeros(inputs.shape[0], dtype=np.intp)
    for g, (level, table) in enumerate(zip(program.levels, program._tables)):
        if g in record:
            captured[g] = cur.copy()
        cur *= 2
        cur += cols[level.var]
        cur = table[cur]
    return cur.astype(np.uint8), captured


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str

    def __str__(self):
        return f"{self.kind}: {self.message}"


NON_OBLIVIOUS = "non-oblivious level"
REPEATED = "variable repeated within layer"
ORDER = "layer disagrees with shared order"
BAD_EDGE = "edge crossing more than one level"
PASS_BRANCH = "pass-through node with two targets"


def validate_kobdd(program: LeveledProgram) -> list[Violation]:
    """Structural k-OBDD check; an empty list means the program passes."""
    out: list[Violation] = []
    pos = program.order.position()
    count = len(program.levels)
    for li, (start, stop) in enumerate(program.layer_bounds):
        seen: set[int] = set()
        last_pos = -1
        for g in range(start, stop):
            level = program.levels[g]
            if not 0 <= level.var < program.n:
                out.append(Violation(NON_OBLIVIOUS, f"level {g} labels unknown variable {level.var}"))
                continue
            if level.var in seen:
                out.append(Violation(REPEATED, f"layer {li} level {g} tests x{level.var} again"))
            seen.add(level.var)
            if pos[level.var] <= last_pos:
                out.append(Violation(ORDER, f"layer {li} level {g} tests x{level.var} out of order"))
            last_pos = max(last_pos, pos[level.var])
            width_next = len(program.levels[g + 1].nodes) if g + 1 < count else 0
            for i, node in enumerate(level.nodes):
                if node.var is not None and node.var != level.var:
                    out.append(Violation(
                        NON_OBLIVIOUS,
                        f"level {g} node {i} tests x{node.var}, level tests x{level.var}"))
                if node.var is None and node.lo != node.hi:
                    out.append(Violation(PASS_BRANCH, f"level {g} node {i}"))
                for ref in (node.lo, node.hi):
                    if isinstance(ref, str):
                        if ref not in SINKS:
                            out.append(Violation(BAD_EDGE, f"level {g} node {i} -> {ref!r}"))
                    elif ref[0] != g + 1 or not 0 <= ref[1] < width_next:
                        out.append(Violation(BAD_EDGE, f"level {g} node {i} -> {ref}"))
    if len(program.levels[0].nodes) < 1:
        out.append(Violation(BAD_EDGE, "level 0 has no source node"))
    return out


@dataclass(frozen=True)
class ProgramMetrics:
    width: int
    size: int
    layer_count: int
    n: int

    @property
    def size_bound(self) -> int:
        return self.width * self.n * self.layer_count

    @property
    def size_bound_holds(self) -> bool:
        """Strict ``size < width * n * layer_count``."""
        return self.size < self.size_bound


def metrics(program: LeveledProgram) -> ProgramMetrics:
    return ProgramMetrics(
        width=max(len(level.nodes) for level in program.levels),
        size=sum(len(level.nodes) for level in program.levels),
        layer_count=len(program.layers),
        n=program.n,
    )


def leveled_width(program: LeveledProgram) -> int:
    """Width after routing early sink edges through carrier nodes.

    An edge into a sink from a level other than the last one bypasses the
    levels below it; a strictly leveled equivalent needs one carrier per
    such sink on each bypassed level.
    """
    early: set[str] = set()
    width = 0
    last = len(program.levels) - 1
    for g, level in enumerate(program.levels):
        width = max(width, len(level.nodes) + len(early))
        if g < last:
            for node in level.nodes:
                early.update(r for r in (node.lo, node.hi) if isinstance(r, str))
    return width


def all_inputs(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows ``start..stop`` of the input enumeration; row ``i`` has bit ``j`` = ``(i >> j) & 1``."""
    stop = 1 << n if stop is None else stop
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.uint8)


def truth_table(program: LeveledProgram, limit: int = TRUTH_TABLE_LIMIT) -> np.ndarray:
    if program.n > limit:
        raise ValueError(
            f"truth table of {program.n} variables refused: limit is {limit} (2^{limit} rows)")
    size = 1 << program.n
    out = np.empty(size, dtype=np.uint8)
    chunk = 1 << 16
    for start in range(0, size, chunk):
        stop = min(size, start + chunk)
        out[start:stop], _ = evaluate_batch(program, all_inputs(program.n, start, stop))
    return out


def random_kobdd(k: int, w: int, n: int, seed: int) -> LeveledProgram:
    """Random k-OBDD in the identity order.

    Every level holds ``w`` nodes except the very first, which holds only the
    source.  Edges are drawn uniformly into the next level; the last level of
    the last layer points into the sinks.
    """
    if k < 1 or w < 1 or n < 1:
        raise ValueError("k, w and n must be positive")
    rng = random.Random(seed)
    total = k * n
    levels = []
    for g in range(total):
        count = 1 if g == 0 else w
        if g == total - 1:
            targets: list[Ref] = [SINK0, SINK1]
        else:
            targets = [(g + 1, i) for i in range(w)]
        var = g % n
        nodes = tuple(Node(var, rng.choice(targets), rng.choice(targets)) for _ in range(count))
        levels.append(Level(var, nodes))
    layers = [levels[i * n:(i + 1) * n] for i in range(k)]
    return LeveledProgram(n, layers)


def _dot_name(program: LeveledProgram, ref: Ref) -> str:
    if isinstance(ref, str):
        return ref
    g, i = ref
    li = program.layer_of_level(g)
    return f"L{li}_V{g - program.layer_bounds[li][0]}_N{i}"


def export_dot(program: LeveledProgram) -> str:
    lines = ["digraph kobdd {", "  rankdir=TB;"]
    used_sinks: set[str] = set()
    edges: list[str] = []
    for li, (start, stop) in enumerate(program.layer_bounds):
        lines.append(f"  subgraph cluster_L{li} {{")
        lines.append(f'    label="layer {li}";')
        for g in range(start, stop):
            level = program.levels[g]
            names = []
            for i, node in enumerate(level.nodes):
                name = _dot_name(program, (g, i))
                names.append(f'"{name}"')
                label = "*" if node.is_pass else f"x{node.var}"
                extra = f"\\n{node.role}" if node.role else ""
                shape = "point" if node.is_pass and not node.role else "circle"
                lines.append(f'    "{name}" [label="{label}{extra}", shape={shape}];')
                src = f'"{name}"'
                if node.is_pass:
                    edges.append(f'  {src} -> "{_dot_name(program, node.lo)}" [label="*"];')
                else:
                    edges.append(f'  {src} -> "{_dot_name(program, node.lo)}" [label="0", style=dashed];')
                    edges.append(f'  {src} -> "{_dot_name(program, node.hi)}" [label="1"];')
                used_sinks.update(r for r in (node.lo, node.hi) if isinstance(r, str))
            lines.append(f"    {{ rank=same; {' '.join(names)} }}")
        lines.append("  }")
    for sink in SINKS:
        if sink in used_sinks:
            lines.append(f'  "{sink}" [label="{sink[-1]}", shape=box];')
    lines.extend(edges)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _ref_to_json(ref: Ref):
    return ref if isinstance(ref, str) else [ref[0], ref[1]]


def _ref_from_json(obj) -> Ref:
    if isinstance(obj, str):
        if obj not in SINKS:
            raise ValueError(f"unknown sink {obj!r}")
        return obj
    g, i = obj
    return (int(g), int(i))


def to_dict(program: LeveledProgram) -> dict:
    layers = []
    for layer in program.layers:
        out_layer = []
        for level in layer:
            nodes = []
            for node in level.nodes:
                entry: dict = {"pass": True} if node.is_pass else {"var": node.var}
                entry["lo"] = _ref_to_json(node.lo)
                entry["hi"] = _ref_to_json(node.hi)
                if node.role:
                    entry["role"] = node.role
                nodes.append(entry)
            out_layer.append({"var": level.var, "nodes": nodes})
        layers.append(out_layer)
    return {
        "version": FORMAT_VERSION,
        "n": program.n,
        "order": list(program.order.perm),
        "layers": layers,
        "sinks": {SINK0: 0, SINK1: 1},
    }


def from_dict(doc: dict) -> LeveledProgram:
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported program format version {doc.get('version')!r}")
    layers = []
    for layer in doc["layers"]:
        levels = []
        for level in layer:
            nodes = tuple(
                Node(None if entry.get("pass") else int(entry["var"]),
                     _ref_from_json(entry["lo"]), _ref_from_json(entry["hi"]),
                     entry.get("role", ""))
                for entry in level["nodes"])
            levels.append(Level(int(level["var"]), nodes))
        layers.append(levels)
    return LeveledProgram(int(doc["n"]), layers, VariableOrder(tuple(doc["order"])))


def dumps(program: LeveledProgram) -> str:
    return json.dumps(to_dict(program), separators=(",", ":"))


def loads(text: str) -> LeveledProgram:
    return from_dict(json.loads(text))
