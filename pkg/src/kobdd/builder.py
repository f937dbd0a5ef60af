"""Explicit 2k-OBDD computing SAF_{k,w} in the natural variable order.

Layer ``2t`` (0-based) computes step1(t) and layer ``2t + 1`` computes
step2(t).  Each layer scans the blocks left to right.  While the wanted
block has not been found, a node remembers the carried value ``c`` and how
the address bits read so far compare with the target; on the first matching
block the popcount of its value bits is accumulated mod ``w``; afterwards the
result rides pass-through nodes to the end of the layer.

Node roles (stored in ``Node.role``)::

    check c=<c> q=<q>   address comparison for carried value c, class q
    accum s=<s>         partial popcount of the matching block
    carry c=<c>         block did not match, skip its value bits
    result v=<v>        value found in this layer (v = Val, or FAIL)

Values in results are always Val in {0..w-1}; a step1 layer's output is
``Val + w``.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .program import (SINK0, SINK1, LeveledProgram, Level, Node, Ref,
                      evaluate_batch, metrics)
from .saf import FAIL, BlockLayout, SafParams, validate_params

ROLE_KINDS = ("check", "accum", "carry", "result")
_RANK = {"check": 0, "accum": 1, "carry": 2, "result": 3, "fail": 4}


class AddressMatcher:
    """Quasi-reduced comparator for one target ``(step tk, slot tw)``.

    Reads the address bits of a block least significant first and tells
    whether ``adr_k == tk`` and ``adr_w == tw``.  ``trans[j][q]`` gives the
    class after reading bit 0/1 at address position ``j`` from class ``q``;
    at the last position the entries are booleans (match or not).
    Prefixes are merged exactly when they admit the same completions.
    """

    def __init__(self, k: int, w: int, k_bits: int, w_bits: int, tk: int, tw: int):
        self.m = m = k_bits + w_bits

        def start():
            return ("w", 0 % k == tk, 0) if k_bits == 0 else ("k", 0)

        def nxt(j, st, bit):
            if j < k_bits:
                kv = st[1] + (bit << j)
                return ("w", kv % k == tk, 0) if j + 1 == k_bits else ("k", kv)
            return ("w", st[1], st[2] + (bit << (j - k_bits)))

        def accept(st):
            return bool(st[1]) and st[2] % (2 * w) == tw

        raw = [[start()]]
        for j in range(m):
            raw.append(sorted({nxt(j, s, b) for s in raw[j] for b in (0, 1)}))

        cls_next = {s: accept(s) for s in raw[m]}
        self.trans: list[list[tuple]] = [[] for _ in range(m)]
        self.classes: list[int] = [0] * m
        for j in range(m - 1, -1, -1):
            ids: dict[tuple, int] = {}
            cls_here = {}
            for s in raw[j]:
                sig = (cls_next[nxt(j, s, 0)], cls_next[nxt(j, s, 1)])
                if sig not in ids:
                    ids[sig] = len(ids)
                    self.trans[j].append(sig)
                cls_here[s] = ids[sig]
            self.classes[j] = len(ids)
            cls_next = cls_here
        self.initial = cls_next[raw[0][0]]


@dataclass
class _Ctx:
    layout: BlockLayout
    matchers: dict = field(default_factory=dict)

    def matcher(self, layer: int, c: int) -> AddressMatcher:
        lay = self.layout
        key = (layer // 2, c + (lay.w if layer % 2 else 0))
        if key not in self.matchers:
            self.matchers[key] = AddressMatcher(lay.k, lay.w, lay.k_bits, lay.w_bits, *key)
        return self.matchers[key]


def _role(state) -> str:
    kind = state[0]
    if kind == "check":
        return f"check c={state[1]} q={state[2]}"
    if kind == "accum":
        return f"accum s={state[1]}"
    if kind == "carry":
        return f"carry c={state[1]}"
    if kind == "result":
        return f"result v={state[1]}"
    return "result v=FAIL"


def _successors(ctx: _Ctx, layer: int, j: int, state):
    """Successor states (bit 0, bit 1) and whether the node tests its variable.

    Successors are states of the next level, or sink names.
    """
    lay = ctx.layout
    w = lay.w
    p, pos = divmod(j, lay.a)
    last_block = p == lay.block_count - 1
    end_of_block = pos == lay.a - 1
    end_of_layer = last_block and end_of_block
    final_layer = layer == 2 * lay.k - 1

    def handoff(v):
        if final_layer:
            return SINK1 if v is not FAIL and v >= 1 else SINK0
        if v is FAIL:
            return ("fail",)
        return ("check", v, ctx.matcher(layer + 1, v).initial)

    kind = state[0]
    if kind == "check":
        _, c, q = state
        outs = []
        for res in ctx.matcher(layer, c).trans[pos][q]:
            if pos < lay.addr_bits - 1:
                outs.append(("check", c, res))
            else:
                outs.append(("accum", 0) if res else ("carry", c))
        return tuple(outs), True
    if kind == "accum":
        outs = []
        for bit in (0, 1):
            s = (state[1] + bit) % w
            if not end_of_block:
                outs.append(("accum", s))
            elif end_of_layer:
                outs.append(handoff(s))
            else:
                outs.append(("result", s))
        return tuple(outs), True
    if kind == "carry":
        c = state[1]
        if not end_of_block:
            nxt = ("carry", c)
        elif not last_block:
            nxt = ("check", c, ctx.matcher(layer, c).initial)
        else:
            nxt = handoff(FAIL)
        return (nxt, nxt), False
    v = state[1] if kind == "result" else FAIL
    nxt = handoff(v) if end_of_layer else state
    return (nxt, nxt), False


def _sort_key(state):
    return (_RANK[state[0]],) + tuple(state[1:])


def build(params: SafParams) -> LeveledProgram:
    """Construct the 2k-layer program computing SAF_{k,w} for ``params``."""
    params = validate_params(params.k, params.w, params.n, relaxed=params.relaxed)
    ctx = _Ctx(params.layout)
    n = params.n
    total = 2 * params.k * n
    states = [("check", 0, ctx.matcher(0, 0).initial)]
    levels: list[Level] = []
    for g in range(total):
        layer, j = divmod(g, n)
        succ = [_successors(ctx, layer, j, s) for s in states]
        following = sorted({t for outs, _ in succ for t in outs if not isinstance(t, str)},
                           key=_sort_key)
        index = {s: i for i, s in enumerate(following)}

        def ref(t) -> Ref:
            return t if isinstance(t, str) else (g + 1, index[t])

        nodes = []
        for s, ((s0, s1), tests) in zip(states, succ):
            if tests:
                nodes.append(Node(j, ref(s0), ref(s1), _role(s)))
            else:
                nodes.append(Node(None, ref(s0), ref(s0), _role(s)))
        levels.append(Level(j, tuple(nodes)))
        states = following
    layers = [levels[i * n:(i + 1) * n] for i in range(2 * params.k)]
    return LeveledProgram(n, layers)


_ROLE_RE = re.compile(r"^(check|accum|carry|result)((?: \w+=\w+)*)$")


def parse_role(role: str) -> tuple[str, dict[str, str]] | None:
    m = _ROLE_RE.match(role)
    if not m:
        return None
    fields = dict(part.split("=", 1) for part in m.group(2).split())
    return m.group(1), fields


@dataclass
class ExplainReport:
    level_counts: list[list[dict[str, int]]]
    max_counts: dict[str, int]
    width: int
    unknown: list[tuple[int, int, str]]

    def as_dict(self) -> dict:
        return {
            "max_counts": dict(self.max_counts),
            "width": self.width,
            "unknown": [list(u) for u in self.unknown],
            "layers": [
                {"max": {kind: max(c.get(kind, 0) for c in layer) for kind in ROLE_KINDS}}
                for layer in self.level_counts],
        }


def explain(program: LeveledProgram) -> ExplainReport:
    """Count node roles per level."""
    per_layer = []
    unknown = []
    maxima = Counter({kind: 0 for kind in ROLE_KINDS})
    for li, (start, stop) in enumerate(program.layer_bounds):
        rows = []
        for g in range(start, stop):
            counts = Counter({kind: 0 for kind in ROLE_KINDS})
            for i, node in enumerate(program.levels[g].nodes):
                parsed = parse_role(node.role)
                if parsed is None:
                    unknown.append((g, i, node.role))
                    continue
                counts[parsed[0]] += 1
            for kind in ROLE_KINDS:
                maxima[kind] = max(maxima[kind], counts[kind])
            rows.append(dict(counts))
        per_layer.append(rows)
    return ExplainReport(per_layer, dict(maxima), metrics(program).width, unknown)


def width_bound(params: SafParams) -> int:
    return 3 * params.w + 1


def layer_outputs(program: LeveledProgram, params: SafParams, inputs: np.ndarray) -> np.ndarray:
    """Decode the step value produced by every layer.

    Returns an ``(N, 2k)`` array laid out like :func:`kobdd.saf.trace_batch`
    (column ``2t`` is step1(t), ``2t + 1`` is step2(t), -1 is FAIL).
    """
    w = params.w
    inputs = np.asarray(inputs)
    lasts = [stop - 1 for _, stop in program.layer_bounds]
    _, seen = evaluate_batch(program, inputs, record=lasts)
    out = np.empty((inputs.shape[0], len(lasts)), dtype=np.int64)
    for li, g in enumerate(lasts):
        level = program.levels[g]
        kinds = np.full(len(level.nodes) + 2, -1, dtype=np.int64)
        values = np.zeros(len(level.nodes) + 2, dtype=np.int64)
        for i, node in enumerate(level.nodes):
            parsed = parse_role(node.role)
            if parsed is None:
                raise ValueError(f"level {g} node {i} has no builder role")
            kind, fields = parsed
            if kind == "accum":
                kinds[i], values[i] = 0, int(fields["s"])
            elif kind == "result" and fields["v"] != "FAIL":
                kinds[i], values[i] = 1, int(fields["v"])
        idx = seen[g]
        bit = inputs[:, level.var].astype(np.int64)
        kind = kinds[idx]
        v = np.where(kind == 0, (values[idx] + bit) % w, values[idx])
        v = np.where(kind < 0, -1, v)
        if li % 2 == 0:
            v = np.where(v >= 0, v + w, -1)
        out[:, li] = v
    return out


def structured_suite(params: SafParams, seed: int = 0, chains: int = 256) -> np.ndarray:
    """Hand-made inputs: constant inputs, one-block inputs, block-targeted
    inputs and full step chains (some cut short so a step fails)."""
    from .subfn import _set_block, chain_witness

    lay = params.layout
    rows = [[0] * lay.n, [1] * lay.n]
    for p in range(lay.block_count):
        bits = [0] * lay.n
        for j in lay.block_range(p):
            bits[j] = 1
        rows.append(bits)
    for p in range(lay.block_count):
        for t in range(lay.k):
            for i in range(2 * lay.w):
                bits = [0] * lay.n
                _set_block(bits, lay, p, (t, i), (p + t + i) % lay.w)
                rows.append(bits)
    rng = np.random.default_rng(seed)
    for c in range(chains):
        length = 2 * lay.k if c % 4 else int(rng.integers(0, 2 * lay.k))
        values = [int(v) for v in rng.integers(0, lay.w, length)]
        blocks = [int(b) for b in rng.permutation(lay.block_count)[:length]]
        rows.append(list(chain_witness(params, values, blocks, seed=int(rng.integers(1 << 30)))))
    return np.array(rows, dtype=np.uint8)


@dataclass
class CheckReport:
    k: int
    w: int
    n: int
    samples: int
    structured: int
    mismatches: list[str]
    layer_checked: int
    layer_mismatches: list[str]
    accepted: int

    @property
    def ok(self) -> bool:
        return not self.mismatches and not self.layer_mismatches

    def as_dict(self) -> dict:
        return {
            "k": self.k, "w": self.w, "n": self.n,
            "samples": self.samples, "structured": self.structured,
            "accepted": self.accepted,
            "mismatch_count": len(self.mismatches), "mismatches": self.mismatches,
            "layer_checked": self.layer_checked,
            "layer_mismatch_count": len(self.layer_mismatches),
            "layer_mismatches": self.layer_mismatches,
            "ok": self.ok,
        }


def differential_check(params: SafParams, samples: int = 100_000, seed: int = 1,
                       layer_samples: int = 1000, program: LeveledProgram | None = None,
                       chunk: int = 10_000) -> CheckReport:
    """Compare the built program with the reference evaluator.

    Runs ``samples`` seeded uniform inputs plus :func:`structured_suite`.
    Per-layer decoding is compared with the reference trace on the first
    ``layer_samples`` random inputs and on the whole structured suite.
    """
    from .saf import trace_batch

    program = build(params) if program is None else program
    rng = np.random.default_rng(seed)
    mismatches: set[str] = set()
    layer_bad: set[str] = set()
    accepted = 0
    layer_checked = 0

    def run(batch: np.ndarray, layers: int):
        nonlocal accepted, layer_checked
        got, _ = evaluate_batch(program, batch)
        want, steps = trace_batch(params, batch)
        accepted += int(want.sum())
        for row in np.flatnonzero(got != want):
            mismatches.add("".join(map(str, batch[row].tolist())))
        if layers:
            decoded = layer_outputs(program, params, batch[:layers])
            layer_checked += layers
            for row in np.flatnonzero((decoded != steps[:layers]).any(axis=1)):
                layer_bad.add("".join(map(str, batch[row].tolist())))

    suite = structured_suite(params, seed)
    run(suite, len(suite))
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        batch = rng.integers(0, 2, (size, params.n), dtype=np.uint8)
        run(batch, max(0, min(size, layer_samples - done)))
        done += size
    return CheckReport(params.k, params.w, params.n, samples, len(suite),
                       sorted(mismatches), layer_checked, sorted(layer_bad), accepted)
