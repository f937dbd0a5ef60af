"""Subfunction census and the bounds built on it.

``N^pi(f)`` counts distinct subfunctions ``f|rho`` over all assignments
``rho`` to the first part ``X_A`` of a partition.  ``N^theta`` maximises over
the prefix cuts of an order and ``N(f)`` minimises that over all orders.
"""
from __future__ import annotations

import itertools
import random
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from math import ceil

import numpy as np

from .program import (ArityError, LeveledProgram, VariableOrder, all_inputs,
                      leveled_width, metrics, parse_bits, random_kobdd, truth_table)
from .saf import FAIL, BlockLayout, SafParams, eval_saf, eval_saf_batch

CENSUS_LIMIT = 20
GLOBAL_LIMIT = 8


@dataclass(frozen=True, eq=False)
class BoolFunction:
    n: int
    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.uint8).ravel()
        if table.size != 1 << self.n:
            raise ArityError(f"truth table has {table.size} entries, arity {self.n} needs {1 << self.n}")
        object.__setattr__(self, "table", table)

    def __eq__(self, other):
        return (isinstance(other, BoolFunction) and self.n == other.n
                and np.array_equal(self.table, other.table))

    @classmethod
    def from_bits(cls, text: str) -> BoolFunction:
        """Bit string of length ``2^n``; character ``i`` is ``f`` at input ``i``."""
        bits = parse_bits(text)
        n = len(bits).bit_length() - 1
        if len(bits) != 1 << n:
            raise ArityError(f"truth table length {len(bits)} is not a power of two")
        return cls(n, np.array(bits, dtype=np.uint8))

    @classmethod
    def from_program(cls, program: LeveledProgram) -> BoolFunction:
        return cls(program.n, truth_table(program, limit=CENSUS_LIMIT))

    @classmethod
    def from_callable(cls, n: int, fn: Callable[[Sequence[int]], int]) -> BoolFunction:
        rows = all_inputs(n)
        return cls(n, np.array([fn(tuple(r)) for r in rows], dtype=np.uint8))

    def __call__(self, bits: Sequence[int]) -> int:
        return int(self.table[sum(b << j for j, b in enumerate(bits))])

    def to_bits(self) -> str:
        return "".join(map(str, self.table.tolist()))


@dataclass(frozen=True)
class Partition:
    order: VariableOrder
    cut: int

    def __post_init__(self):
        if not 1 <= self.cut <= len(self.order) - 1:
            raise ValueError(f"cut must lie in 1..{len(self.order) - 1}, got {self.cut}")

    @classmethod
    def from_sets(cls, n: int, a_vars: Iterable[int]) -> Partition:
        a = sorted(set(a_vars))
        rest = [j for j in range(n) if j not in set(a)]
        return cls(VariableOrder(tuple(a + rest)), len(a))

    @property
    def a_vars(self) -> tuple[int, ...]:
        return self.order.perm[:self.cut]

    @property
    def b_vars(self) -> tuple[int, ...]:
        return self.order.perm[self.cut:]


def _check_guard(n: int, limit: int) -> None:
    if n > limit:
        raise ValueError(f"census of {n} variables refused: limit is {limit}")


def subfunction_rows(f: BoolFunction, a_vars: Iterable[int]) -> np.ndarray:
    """Matrix whose row ``r`` is the truth table of ``f|rho`` for restriction number ``r``.

    Restrictions and columns are both enumerated in variable-index order.
    """
    n = f.n
    a = sorted(set(a_vars))
    b = [j for j in range(n) if j not in set(a)]
    cube = f.table.reshape((2,) * n) if n else f.table
    axes = [n - 1 - j for j in reversed(a)] + [n - 1 - j for j in reversed(b)]
    return cube.transpose(axes).reshape(1 << len(a), 1 << len(b))


def _count_rows(rows: np.ndarray) -> int:
    return len({r.tobytes() for r in np.packbits(rows, axis=1)})


def census_set(f: BoolFunction, a_vars: Iterable[int]) -> int:
    """Distinct subfunctions when the variables ``a_vars`` are fixed."""
    return _count_rows(subfunction_rows(f, a_vars))


def census_pi(f: BoolFunction, partition: Partition) -> int:
    _check_guard(f.n, CENSUS_LIMIT)
    if len(partition.order) != f.n:
        raise ArityError("partition and function arities differ")
    return census_set(f, partition.a_vars)


def _cuts(n: int, include_first_cut: bool) -> range:
    return range(1 if include_first_cut else 2, n)


def census_theta(f: BoolFunction, order: VariableOrder, include_first_cut: bool = True) -> int:
    _check_guard(f.n, CENSUS_LIMIT)
    return max((census_pi(f, Partition(order, u)) for u in _cuts(f.n, include_first_cut)),
               default=1)


@dataclass(frozen=True)
class Census:
    n_global: int
    order: VariableOrder
    n_theta: int
    cut: int | None
    n_pi: int


def census_global(f: BoolFunction, include_first_cut: bool = True) -> Census:
    """Exact ``N(f)`` by a bottleneck path through the subset lattice.

    ``N^pi`` only depends on the set ``X_A``, so an order is a chain of
    subsets from the empty set to ``X`` and ``N^theta`` is the largest cost on
    that chain; the best chain is found by dynamic programming over masks.
    """
    n = f.n
    _check_guard(n, GLOBAL_LIMIT)
    if n <= 1 or (n == 2 and not include_first_cut):
        order = VariableOrder.identity(n)
        return Census(1, order, 1, None, 1)
    lo = 1 if include_first_cut else 2
    full = (1 << n) - 1
    cost = [0] * (1 << n)
    best = [0] * (1 << n)
    back = [-1] * (1 << n)
    for mask in sorted(range(1, full), key=lambda m: (bin(m).count("1"), m)):
        size = bin(mask).count("1")
        here = census_set(f, (j for j in range(n) if mask >> j & 1)) if size >= lo else 0
        cost[mask] = here
        if size == 1:
            best[mask], back[mask] = here, 0
            continue
        sub, pick = min((best[mask & ~(1 << j)], mask & ~(1 << j))
                        for j in range(n) if mask >> j & 1)
        best[mask], back[mask] = max(here, sub), pick
    value, last = min((best[full & ~(1 << j)], full & ~(1 << j)) for j in range(n))

    chain = [full, last]
    while chain[-1]:
        chain.append(back[chain[-1]])
    chain.reverse()
    perm = [(b ^ a).bit_length() - 1 for a, b in zip(chain, chain[1:])]
    order = VariableOrder(tuple(perm))
    cut_costs = [(cost[chain[u]], u) for u in _cuts(n, include_first_cut)]
    n_pi, cut = max(cut_costs)
    return Census(value, order, value, cut, n_pi)


def census_by_orders(f: BoolFunction, include_first_cut: bool = True) -> int:
    """``N(f)`` by enumerating all ``n!`` orders; the oracle for :func:`census_global`."""
    _check_guard(f.n, GLOBAL_LIMIT)
    memo: dict[tuple[int, ...], int] = {}
    best = None
    for perm in itertools.permutations(range(f.n)):
        worst = 1
        for u in _cuts(f.n, include_first_cut):
            prefix = perm[:u]
            if prefix not in memo:
                memo[prefix] = census_pi(f, Partition(VariableOrder(perm), u))
            worst = max(worst, memo[prefix])
        best = worst if best is None else min(best, worst)
    return 1 if best is None else best


def ak13_bound(k: int, w: int) -> int:
    """Upper bound ``w^((k-1)w+1)`` on ``N(f)`` for a k-OBDD of width ``w``."""
    return w ** ((k - 1) * w + 1)


def saf_lower_bound(k: int, w: int) -> int:
    """Lower bound ``w^((k-1)(w-2))`` on ``N(SAF_{k,w})``."""
    return w ** ((k - 1) * (w - 2))


@dataclass(frozen=True)
class Ak13Verdict:
    census: int
    bound: int
    layers: int
    width: int

    @property
    def ok(self) -> bool:
        return self.census <= self.bound


def check_ak13(program: LeveledProgram) -> Ak13Verdict:
    """Compare ``N(f)`` of the program's function with the width bound.

    Width is measured after routing early sink edges through carriers, which
    is the width the bound speaks about.
    """
    _check_guard(program.n, GLOBAL_LIMIT)
    f = BoolFunction.from_program(program)
    layers = metrics(program).layer_count
    width = leveled_width(program)
    return Ak13Verdict(census_global(f).n_global, ak13_bound(layers, width), layers, width)


def ak13_sweep(count: int, max_k: int, max_w: int, max_n: int, seed: int) -> list[dict]:
    """Random k-OBDDs checked against the width bound."""
    rng = random.Random(seed)
    rows = []
    for _ in range(count):
        k, w, n = rng.randint(1, max_k), rng.randint(1, max_w), rng.randint(1, max_n)
        s = rng.randrange(1 << 30)
        program = random_kobdd(k, w, n, s)
        verdict = check_ak13(program)
        m = metrics(program)
        rows.append({"k": k, "w": w, "n": n, "seed": s, "N": verdict.census,
                     "bound": verdict.bound, "width": verdict.width, "ok": verdict.ok,
                     "size": m.size, "size_bound_holds": m.size_bound_holds})
    return rows


@dataclass(frozen=True)
class GoodSet:
    i_a: tuple[int, ...]
    i_b: tuple[int, ...]
    b_rich: tuple[int, ...]
    min_b_outside: int | None

    @property
    def balanced(self) -> bool:
        return len(self.i_a) == len(self.i_b)

    def holds(self, layout: BlockLayout) -> bool:
        """Good-set property; vacuous unless ``|I_A| = kw``."""
        kw = layout.k * layout.w
        if len(self.i_a) != kw:
            return True
        return (len(self.i_b) == kw and self.min_b_outside is not None
                and self.min_b_outside >= layout.w + 1)


def _value_counts(layout: BlockLayout, a_vars: Iterable[int]) -> np.ndarray:
    in_a = np.zeros(layout.n, dtype=bool)
    in_a[list(a_vars)] = True
    per_block = in_a.reshape(layout.block_count, layout.a)[:, layout.addr_bits:]
    return per_block.sum(axis=1)


def classify_partition(layout: BlockLayout, partition: Partition) -> GoodSet:
    """Blocks with at least ``w`` value variables on the A side, and the rest."""
    if len(partition.order) != layout.n:
        raise ArityError("partition and layout arities differ")
    in_a = _value_counts(layout, partition.a_vars)
    in_b = layout.b - in_a
    i_a = tuple(int(p) for p in np.flatnonzero(in_a >= layout.w))
    i_b = tuple(int(p) for p in np.flatnonzero(in_a < layout.w))
    b_rich = tuple(int(p) for p in np.flatnonzero(in_b >= layout.w))
    outside = in_b[list(i_b)]
    return GoodSet(i_a, i_b, b_rich, int(outside.min()) if outside.size else None)


def good_cut(layout: BlockLayout, order: VariableOrder) -> int:
    """Smallest cut of ``order`` whose A side is rich in exactly ``kw`` blocks.

    The rich-block count grows by at most one per variable, so such a cut
    always exists.
    """
    target = layout.k * layout.w
    counts = np.zeros(layout.block_count, dtype=np.int64)
    rich = 0
    for u, j in enumerate(order.perm, start=1):
        if not layout.is_address(j):
            p = layout.block_of(j)
            counts[p] += 1
            if counts[p] == layout.w:
                rich += 1
        if rich == target:
            return u
    raise AssertionError("rich-block count never reached kw")


def _set_block(bits: list[int], layout: BlockLayout, p: int, address: tuple[int, int],
               value: int | None = None) -> None:
    tk, tw = address
    base = p * layout.a
    for j in range(layout.k_bits):
        bits[base + j] = tk >> j & 1
    for j in range(layout.w_bits):
        bits[base + layout.k_bits + j] = tw >> j & 1
    if value is not None:
        for r, j in enumerate(layout.value_vars(p)):
            bits[j] = 1 if r < value else 0


def chain_witness(params: SafParams | BlockLayout, values: Sequence[int],
                  blocks: Sequence[int] | None = None,
                  seed: int | None = None) -> tuple[int, ...]:
    """Input whose step chain reads the block values ``values`` in turn.

    Step ``q`` is served by block ``blocks[q]`` (default ``q``).  With fewer
    than ``2k`` values the next step finds no block and fails.  Unused blocks
    are parked on an address no step asks for; with a ``seed`` their value
    bits are random.
    """
    layout = params.layout if isinstance(params, SafParams) else params
    k, w = layout.k, layout.w
    if len(values) > 2 * k:
        raise ValueError(f"at most {2 * k} step values")
    if any(not 0 <= v < w for v in values):
        raise ValueError(f"values must lie in 0..{w - 1}")
    blocks = list(range(len(values))) if blocks is None else list(blocks)
    if len(set(blocks)) != len(blocks) or len(blocks) < len(values):
        raise ValueError("need one distinct block per step")
    bits = [0] * layout.n
    queried = []
    prev = 0
    for q in range(min(len(values) + 1, 2 * k)):
        t = q // 2
        slot = prev if q % 2 == 0 else prev + w
        queried.append((t, slot))
        if q < len(values):
            _set_block(bits, layout, blocks[q], (t, slot), values[q])
            prev = values[q]
    free = [(t, i) for t in range(k) for i in range(2 * w) if (t, i) not in queried]
    rng = random.Random(seed) if seed is not None else None
    used = set(blocks[:len(values)])
    for p in range(layout.block_count):
        if p in used:
            continue
        _set_block(bits, layout, p, free[0],
                   rng.randrange(layout.b + 1) if rng else 0)
    return tuple(bits)


@dataclass
class DistinguishResult:
    gamma: dict[int, int] | None
    method: str | None
    tries: int
    relaxed: bool
    outputs: tuple[int, int] | None = None

    @property
    def found(self) -> bool:
        return self.gamma is not None


class _Planner:
    """Depth-first search for a shared B-side assignment that splits two traces.

    Blocks whose address lies entirely in ``X_B`` are *open*: the search may
    give them any address.  Other blocks keep the address implied by the A
    side (their B address bits are zero).  Every block's B value bits can
    add any popcount up to their number.
    """

    def __init__(self, layout: BlockLayout, a_vars, sides, budget: int):
        self.layout = layout
        self.budget = budget
        self.nodes = 0
        a_set = set(a_vars)
        self.sides = sides
        self.open = [all(j not in a_set for j in layout.address_vars(p))
                     for p in range(layout.block_count)]
        self.b_values = [[j for j in layout.value_vars(p) if j not in a_set]
                         for p in range(layout.block_count)]
        self.fixed_addr = []
        self.pop_a = []
        for side in sides:
            x = [side.get(j, 0) for j in range(layout.n)]
            addrs, pops = [], []
            for p in range(layout.block_count):
                base = p * layout.a
                kv = sum(x[base + j] << j for j in range(layout.k_bits)) % layout.k
                wv = sum(x[base + layout.k_bits + j] << j
                         for j in range(layout.w_bits)) % (2 * layout.w)
                addrs.append((kv, wv))
                pops.append(sum(x[j] for j in layout.value_vars(p) if j in a_set))
            self.fixed_addr.append(addrs)
            self.pop_a.append(pops)
        self.assigned: dict[int, tuple[int, int]] = {}
        self.pop_b: dict[int, int] = {}
        self.queries: list[tuple[tuple[int, int], int]] = []

    def address(self, p, side):
        if self.open[p]:
            return self.assigned.get(p)
        return self.fixed_addr[side][p]

    def value(self, p, side):
        return (self.pop_a[side][p] + self.pop_b[p]) % self.layout.w

    def forbidden(self, p, target):
        return any(t == target and p < chosen for t, chosen in self.queries)

    def pop_choices(self, p):
        if p in self.pop_b:
            return [None]
        return list(range(min(len(self.b_values[p]), self.layout.w - 1) + 1))

    def search(self, q: int, side: int, cur: list):
        lay = self.layout
        self.nodes += 1
        if self.nodes > self.budget:
            return None
        if q == 2 * lay.k:
            outs = [0 if c is FAIL or c <= 0 else 1 for c in cur]
            return self.finish() if outs[0] != outs[1] else None
        nq, nside = (q, 1) if side == 0 else (q + 1, 0)
        if cur[side] is FAIL:
            return self.search(nq, nside, cur)
        t = q // 2
        target = (t, cur[side] if q % 2 == 0 else cur[side] + lay.w)
        matches = [p for p in range(lay.block_count) if self.address(p, side) == target]
        m_det = min(matches) if matches else None
        options = []
        if m_det is not None:
            options.append((m_det, False))
        limit = lay.block_count if m_det is None else m_det
        opens = [p for p in range(limit)
                 if self.open[p] and p not in self.assigned and not self.forbidden(p, target)]
        options.extend((p, True) for p in opens[:3])
        for p, assign in options:
            if assign:
                self.assigned[p] = target
            for r in self.pop_choices(p):
                if r is not None:
                    self.pop_b[p] = r
                self.queries.append((target, p))
                nxt = list(cur)
                nxt[side] = self.value(p, side)
                found = self.search(nq, nside, nxt)
                self.queries.pop()
                if r is not None:
                    del self.pop_b[p]
                if found is not None:
                    return found
            if assign:
                del self.assigned[p]
        if m_det is None:
            self.queries.append((target, lay.block_count))
            nxt = list(cur)
            nxt[side] = FAIL
            found = self.search(nq, nside, nxt)
            self.queries.pop()
            return found
        return None

    def finish(self) -> dict[int, int] | None:
        lay = self.layout
        asked = {t for t, _ in self.queries}
        free = [(t, i) for t in range(lay.k) for i in range(2 * lay.w) if (t, i) not in asked]
        gamma: dict[int, int] = {}
        for p in range(lay.block_count):
            for j in lay.address_vars(p):
                gamma[j] = 0
            for r, j in enumerate(self.b_values[p]):
                gamma[j] = 1 if r < self.pop_b.get(p, 0) else 0
            if self.open[p]:
                addr = self.assigned.get(p)
                if addr is None:
                    if not free:
                        return None
                    addr = free[0]
                base = p * lay.a
                for j in range(lay.k_bits):
                    gamma[base + j] = addr[0] >> j & 1
                for j in range(lay.w_bits):
                    gamma[base + lay.k_bits + j] = addr[1] >> j & 1
        a_set = set().union(*(s.keys() for s in self.sides))
        return {j: v for j, v in gamma.items() if j not in a_set}


def _merge(n: int, sigma: Mapping[int, int], gamma: Mapping[int, int]) -> tuple[int, ...]:
    bits = [0] * n
    for j, v in itertools.chain(sigma.items(), gamma.items()):
        bits[j] = int(v)
    return tuple(bits)


def distinguish(params: SafParams, sigma: Mapping[int, int], sigma_p: Mapping[int, int],
                partition: Partition, budget: int = 20000, seed: int = 0) -> DistinguishResult:
    """Search an assignment ``gamma`` of ``X_B`` on which the two restrictions disagree.

    A structured depth-first plan over the step chain runs first, then random
    ``gamma`` are tried; both stop after ``budget`` attempts.  A miss is
    inconclusive.
    """
    layout = params.layout
    a_vars = set(partition.a_vars)
    b_vars = list(partition.b_vars)
    for name, s in (("sigma", sigma), ("sigma'", sigma_p)):
        if set(s) != a_vars or any(v not in (0, 1) for v in s.values()):
            raise ValueError(f"{name} must assign 0/1 to exactly the A-side variables")
    if dict(sigma) == dict(sigma_p):
        raise ValueError("sigma and sigma' must differ")

    planner = _Planner(layout, a_vars, (dict(sigma), dict(sigma_p)), budget)
    gamma = planner.search(0, 0, [0, 0])
    tries = planner.nodes
    if gamma is not None:
        x, xp = _merge(layout.n, sigma, gamma), _merge(layout.n, sigma_p, gamma)
        outs = (eval_saf(params, x), eval_saf(params, xp))
        if outs[0] != outs[1]:
            return DistinguishResult(gamma, "structured", tries, params.relaxed, outs)

    rng = np.random.default_rng(seed)
    base = np.array(_merge(layout.n, sigma, {}), dtype=np.uint8)
    base_p = np.array(_merge(layout.n, sigma_p, {}), dtype=np.uint8)
    done = 0
    batch = 1024
    while done < budget:
        size = min(batch, budget - done)
        fill = rng.integers(0, 2, (size, len(b_vars)), dtype=np.uint8)
        x = np.tile(base, (size, 1))
        xp = np.tile(base_p, (size, 1))
        x[:, b_vars] = fill
        xp[:, b_vars] = fill
        o, op = eval_saf_batch(params, x), eval_saf_batch(params, xp)
        hits = np.flatnonzero(o != op)
        if hits.size:
            row = int(hits[0])
            gamma = {j: int(v) for j, v in zip(b_vars, fill[row])}
            return DistinguishResult(gamma, "random", tries + done + row + 1, params.relaxed,
                                     (int(o[row]), int(op[row])))
        done += size
    return DistinguishResult(None, None, tries + done, params.relaxed)


@dataclass(frozen=True)
class GapReport:
    k: int
    w: int
    lhs: int
    rhs: int
    in_range: bool

    @property
    def separated(self) -> bool:
        return self.lhs > self.rhs

    def as_dict(self) -> dict:
        return {
            "k": self.k, "w": self.w, "separated": self.separated, "in_range": self.in_range,
            "lhs": {"base": ceil(self.w / 4),
                    "exp": (ceil(self.k / 3) - 1) * (ceil(self.w / 4) - 2),
                    "bits": self.lhs.bit_length()},
            "rhs": {"base": self.w // 16 - 3,
                    "exp": (self.k - 1) * (self.w // 16 - 3) + 1,
                    "bits": self.rhs.bit_length()},
        }


def hierarchy_gap(k: int, w: int) -> GapReport:
    """Compare the witness lower bound with the smaller class's ceiling, exactly.

    ``lhs = ceil(w/4)^((ceil(k/3)-1)(ceil(w/4)-2))`` bounds ``N`` of
    ``SAF_{ceil(k/3), ceil(w/4)}`` from below; ``rhs`` is the k-OBDD bound for
    width ``floor(w/16) - 3``.
    """
    small = w // 16 - 3
    lhs = saf_lower_bound(ceil(k / 3), ceil(w / 4))
    rhs = small ** ((k - 1) * small + 1)
    return GapReport(k, w, lhs, rhs, in_range=k >= 2 and w >= 64)


def separation_threshold(w: int, k_max: int = 64) -> int | None:
    """Smallest ``k >= 2`` for which :func:`hierarchy_gap` separates."""
    return next((k for k in range(2, k_max + 1) if hierarchy_gap(k, w).separated), None)
