"""Reference evaluator for the Shuffled Address Function SAF_{k,w}.

Variables are split into ``2kw`` contiguous blocks of ``a`` variables.  The
first ``addr_bits = ceil(log2 k) + ceil(log2 2w)`` variables of a block are
address bits (low ones select the iteration step, high ones the slot), the
remaining ``b`` are value bits whose popcount mod ``w`` is the block value.

Failure is the :data:`FAIL` sentinel.  It is distinct from every integer and
absorbs: once a step fails every later step fails and the output is 0.
"""
from __future__ import annotations

import enum
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .program import ArityError, parse_bits


class Sentinel(enum.Enum):
    FAIL = "FAIL"

    def __repr__(self):
        return "FAIL"

    __str__ = __repr__


FAIL = Sentinel.FAIL
ExtValue = int | Sentinel


class InvalidParams(ValueError):
    """Raised when (k, w, n) cannot carry SAF_{k,w}."""


def ceil_log2(x: int) -> int:
    return (x - 1).bit_length()


def address_bits(k: int, w: int) -> int:
    return ceil_log2(k) + ceil_log2(2 * w)


def size_bound(k: int, w: int) -> int:
    """The quantity n has to exceed: ``2kw(2w + ceil(log k) + ceil(log 2w))``."""
    return 2 * k * w * (2 * w + address_bits(k, w))


def min_valid_n(k: int, w: int) -> int:
    blocks = 2 * k * w
    return (size_bound(k, w) // blocks + 1) * blocks


@dataclass(frozen=True)
class SafParams:
    k: int
    w: int
    n: int
    relaxed: bool = False

    @property
    def block_count(self) -> int:
        return 2 * self.k * self.w

    @property
    def k_bits(self) -> int:
        return ceil_log2(self.k)

    @property
    def w_bits(self) -> int:
        return ceil_log2(2 * self.w)

    @property
    def addr_bits(self) -> int:
        return self.k_bits + self.w_bits

    @property
    def a(self) -> int:
        return self.n // self.block_count

    @property
    def b(self) -> int:
        return self.a - self.addr_bits

    @cached_property
    def layout(self) -> BlockLayout:
        return BlockLayout(self)


def validate_params(k: int, w: int, n: int, relaxed: bool = False) -> SafParams:
    """Check (k, w, n) and return :class:`SafParams`.

    With ``relaxed=True`` the size inequality is waived; blocks must still
    tile ``n`` and carry at least one value bit.  Relaxed parameters exist
    only for tiny experiments and are flagged on the result.
    """
    if k < 2 or w < 2:
        raise InvalidParams(f"need k >= 2 and w >= 2, got k={k}, w={w}")
    blocks = 2 * k * w
    bound = size_bound(k, w)
    if not relaxed and not bound < n:
        raise InvalidParams(
            f"size inequality violated: 2kw(2w+ceil(log k)+ceil(log 2w)) = {bound} "
            f"is not < n = {n}; smallest valid n is {min_valid_n(k, w)}")
    if n % blocks:
        if relaxed:
            hint = (n // blocks + 1) * blocks
        else:
            hint = max(min_valid_n(k, w), (n // blocks + 1) * blocks)
        raise InvalidParams(f"2kw = {blocks} does not divide n = {n}; try n = {hint}")
    params = SafParams(k, w, n, relaxed)
    if params.b < 1:
        raise InvalidParams(f"blocks of {params.a} variables leave no value bits")
    return params


class BlockLayout:
    """Maps global variable indices to block roles."""

    def __init__(self, params: SafParams):
        self.params = params
        self.k, self.w, self.n = params.k, params.w, params.n
        self.block_count = params.block_count
        self.a, self.b = params.a, params.b
        self.k_bits, self.w_bits = params.k_bits, params.w_bits
        self.addr_bits = params.addr_bits

    def __repr__(self):
        return f"BlockLayout(k={self.k}, w={self.w}, n={self.n}, a={self.a}, b={self.b})"

    def block_range(self, p: int) -> range:
        return range(p * self.a, (p + 1) * self.a)

    def address_vars(self, p: int) -> range:
        return range(p * self.a, p * self.a + self.addr_bits)

    def value_vars(self, p: int) -> range:
        return range(p * self.a + self.addr_bits, (p + 1) * self.a)

    def block_of(self, j: int) -> int:
        return j // self.a

    def is_address(self, j: int) -> bool:
        return j % self.a < self.addr_bits


def _bits(x) -> Sequence[int]:
    return parse_bits(x) if isinstance(x, str) else x


def adr_k(layout: BlockLayout, x, p: int) -> int:
    x = _bits(x)
    base = p * layout.a
    return sum(x[base + j] << j for j in range(layout.k_bits)) % layout.k


def adr_w(layout: BlockLayout, x, p: int) -> int:
    x = _bits(x)
    base = p * layout.a + layout.k_bits
    return sum(x[base + j] << j for j in range(layout.w_bits)) % (2 * layout.w)


def ind(layout: BlockLayout, x, i: int, t: int) -> int | Sentinel:
    """Least block addressed ``(step t, slot i)``, else FAIL."""
    x = _bits(x)
    for p in range(layout.block_count):
        if adr_k(layout, x, p) == t and adr_w(layout, x, p) == i:
            return p
    return FAIL


def block_value(layout: BlockLayout, x, p: int) -> int:
    x = _bits(x)
    return sum(x[j] for j in layout.value_vars(p)) % layout.w


def val(layout: BlockLayout, x, i: int, t: int) -> int | Sentinel:
    p = ind(layout, x, i, t)
    return FAIL if p is FAIL else block_value(layout, x, p)


def _steps(layout: BlockLayout, x, upto: int):
    """Yield ``(t, step1, step2, p1, p2)`` for t = 0..upto."""
    prev = 0
    for t in range(upto + 1):
        p1 = p2 = None
        if prev is FAIL:
            s1 = s2 = FAIL
        else:
            p1 = ind(layout, x, prev, t)
            s1 = FAIL if p1 is FAIL else block_value(layout, x, p1) + layout.w
            if s1 is FAIL:
                p1, s2 = None, FAIL
            else:
                p2 = ind(layout, x, s1, t)
                s2 = FAIL if p2 is FAIL else block_value(layout, x, p2)
                if p2 is FAIL:
                    p2 = None
        yield t, s1, s2, p1, p2
        prev = s2


def step1(layout: BlockLayout, x, t: int) -> ExtValue:
    if t < -1:
        raise ValueError("t must be >= -1")
    if t == -1:
        return 0
    x = _bits(x)
    for _, s1, _, _, _ in _steps(layout, x, t):
        pass
    return s1


def step2(layout: BlockLayout, x, t: int) -> ExtValue:
    if t < -1:
        raise ValueError("t must be >= -1")
    if t == -1:
        return 0
    x = _bits(x)
    for _, _, s2, _, _ in _steps(layout, x, t):
        pass
    return s2


@dataclass(frozen=True)
class StepRecord:
    step1: ExtValue
    step2: ExtValue
    block_for_step1: int | None
    block_for_step2: int | None


@dataclass(frozen=True)
class StepTrace:
    steps: tuple[StepRecord, ...]
    final: int

    def values(self) -> list[ExtValue]:
        """Step values in layer order: step1(0), step2(0), step1(1), ..."""
        out: list[ExtValue] = []
        for rec in self.steps:
            out.extend((rec.step1, rec.step2))
        return out

    def as_dict(self) -> dict:
        def enc(v):
            return "FAIL" if v is FAIL else v
        return {
            "steps": [
                {"t": t, "step1": enc(r.step1), "step2": enc(r.step2),
                 "block_for_step1": r.block_for_step1, "block_for_step2": r.block_for_step2}
                for t, r in enumerate(self.steps)],
            "final": self.final,
        }


def _as_layout(obj) -> BlockLayout:
    return obj.layout if isinstance(obj, SafParams) else obj


def trace(params: SafParams | BlockLayout, x) -> StepTrace:
    layout = _as_layout(params)
    x = _bits(x)
    if len(x) != layout.n:
        raise ArityError(f"input has {len(x)} bits, SAF expects {layout.n}")
    records = tuple(StepRecord(s1, s2, p1, p2)
                    for _, s1, s2, p1, p2 in _steps(layout, x, layout.k - 1))
    last = records[-1].step2
    final = 0 if last is FAIL or last <= 0 else 1
    return StepTrace(records, final)


def eval_saf(params: SafParams | BlockLayout, x) -> int:
    return trace(params, x).final


def block_fields(layout: BlockLayout, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-block ``(adr_k, adr_w, value)`` arrays of shape ``(N, 2kw)``."""
    inputs = np.asarray(inputs)
    if inputs.ndim != 2 or inputs.shape[1] != layout.n:
        raise ArityError(f"inputs must have shape (N, {layout.n}), got {inputs.shape}")
    blocks = inputs.reshape(inputs.shape[0], layout.block_count, layout.a).astype(np.int64)
    kw = 1 << np.arange(layout.k_bits, dtype=np.int64)
    ww = 1 << np.arange(layout.w_bits, dtype=np.int64)
    ak = (blocks[:, :, :layout.k_bits] @ kw) % layout.k
    aw = (blocks[:, :, layout.k_bits:layout.addr_bits] @ ww) % (2 * layout.w)
    vv = blocks[:, :, layout.addr_bits:].sum(axis=2) % layout.w
    return ak, aw, vv


def trace_batch(params: SafParams | BlockLayout, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised trace.

    Returns ``(outputs, steps)`` where ``steps[:, 2t]`` is step1(t) and
    ``steps[:, 2t + 1]`` is step2(t), with -1 standing for FAIL.
    """
    layout = _as_layout(params)
    ak, aw, vv = block_fields(layout, inputs)
    count = ak.shape[0]
    rows = np.arange(count)
    steps = np.full((count, 2 * layout.k), -1, dtype=np.int64)
    cur = np.zeros(count, dtype=np.int64)
    alive = np.ones(count, dtype=bool)
    for q in range(2 * layout.k):
        t = q // 2
        match = (ak == t) & (aw == cur[:, None])
        found = match.any(axis=1) & alive
        p = match.argmax(axis=1)
        value = vv[rows, p]
        if q % 2 == 0:
            value = value + layout.w
        alive = found
        cur = np.where(alive, value, 0)
        steps[:, q] = np.where(alive, value, -1)
    last = steps[:, -1]
    return (last > 0).astype(np.uint8), steps


def eval_saf_batch(params: SafParams | BlockLayout, inputs: np.ndarray) -> np.ndarray:
    return trace_batch(params, inputs)[0]
