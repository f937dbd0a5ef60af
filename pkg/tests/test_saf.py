import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kobdd.program import ArityError
from kobdd.saf import (FAIL, InvalidParams, adr_k, adr_w, block_value, eval_saf,
                       eval_saf_batch, ind, min_valid_n, step1, step2, trace,
                       trace_batch, validate_params, val)
from kobdd.subfn import chain_witness

P22 = validate_params(2, 2, 64)


def with_block(params, p, bits_in_block, base=None):
    x = [0] * params.n if base is None else list(base)
    for j, b in enumerate(bits_in_block):
        x[p * params.a + j] = b
    return x


def smallest_n_by_scan(k, w):
    # independent of the library: scan multiples of 2kw
    addr = (k - 1).bit_length() + (2 * w - 1).bit_length()
    bound = 2 * k * w * (2 * w + addr)
    n = 2 * k * w
    while n <= bound:
        n += 2 * k * w
    return n


def test_validate_examples():
    p = validate_params(2, 2, 64)
    assert (p.block_count, p.a, p.addr_bits, p.b) == (8, 8, 3, 5)
    with pytest.raises(InvalidParams, match="is not < n = 56"):
        validate_params(2, 2, 56)
    with pytest.raises(InvalidParams, match="n = 64"):
        validate_params(2, 2, 60)


@pytest.mark.parametrize("k, w", [(1, 2), (2, 1), (0, 3)])
def test_degenerate_parameters_rejected(k, w):
    with pytest.raises(InvalidParams):
        validate_params(k, w, 10_000 * 2 * max(k, 1) * max(w, 1))


@pytest.mark.parametrize("k, w", [(2, 2), (2, 4), (3, 4), (4, 8), (3, 3), (5, 2), (7, 5)])
def test_min_valid_n_matches_scan(k, w):
    n = min_valid_n(k, w)
    assert n == smallest_n_by_scan(k, w)
    validate_params(k, w, n)
    with pytest.raises(InvalidParams):
        validate_params(k, w, n - 2 * k * w)


def test_grid_minimal_n_values():
    assert [min_valid_n(*kw) for kw in [(2, 2), (2, 4), (3, 4), (4, 8)]] == [64, 208, 336, 1472]


@pytest.mark.parametrize("k", range(2, 9))
@pytest.mark.parametrize("w", range(2, 12))
def test_value_width_exceeds_w(k, w):
    assert validate_params(k, w, min_valid_n(k, w)).b >= w + 1


def test_address_examples():
    lay = P22.layout
    zero = [0] * 64
    assert adr_k(lay, zero, 3) == 0 and adr_w(lay, zero, 3) == 0
    x = with_block(P22, 2, (1, 0, 0))
    assert adr_k(lay, x, 2) == 1
    x = with_block(P22, 2, (0, 1, 1))
    assert adr_w(lay, x, 2) == 3
    x = with_block(P22, 2, (1, 0, 1))
    assert adr_w(lay, x, 2) == 2


def test_adr_k_wraps_modulo_k():
    p = validate_params(3, 2, min_valid_n(3, 2))
    x = with_block(p, 4, (1, 1, 0, 0, 0))
    assert adr_k(p.layout, x, 4) == 0


def test_ind_examples():
    lay = P22.layout
    zero = [0] * 64
    assert ind(lay, zero, 0, 0) == 0
    assert ind(lay, zero, 1, 0) is FAIL
    # park every block on (0, 1), then block 5 alone on (1, 3)
    x = [0] * 64
    for p in range(8):
        x = with_block(P22, p, (0, 1, 0), x)
    x = with_block(P22, 5, (1, 1, 1), x)
    assert ind(lay, x, 3, 1) == 5
    assert ind(lay, x, 1, 0) == 0


def test_val_examples():
    lay = P22.layout
    zero = [0] * 64
    assert val(lay, zero, 0, 0) == 0
    x = with_block(P22, 0, (0, 0, 0, 1, 1, 1, 0, 0))
    assert val(lay, x, 0, 0) == 1
    assert val(lay, zero, 3, 1) is FAIL


def test_step_examples():
    lay = P22.layout
    zero = [0] * 64
    assert step1(lay, zero, -1) == 0 and step2(lay, zero, -1) == 0
    assert step1(lay, zero, 0) == 2
    assert step2(lay, zero, 0) is FAIL
    assert step1(lay, zero, 1) is FAIL
    with pytest.raises(ValueError):
        step1(lay, zero, -2)


def test_all_zero_input_rejected():
    for k, w in [(2, 2), (2, 4), (3, 4)]:
        p = validate_params(k, w, min_valid_n(k, w))
        tr = trace(p, [0] * p.n)
        assert tr.final == 0
        assert tr.steps[0].step2 is FAIL


def test_chain_witness_examples():
    x = chain_witness(P22, [1, 0, 0, 1])
    assert eval_saf(P22, x) == 1
    assert trace(P22, x).values() == [3, 0, 2, 1]
    y = chain_witness(P22, [1, 0, 0, 0])
    assert eval_saf(P22, y) == 0
    # the two inputs differ only in the final addressed block
    diff = {P22.layout.block_of(j) for j in range(64) if x[j] != y[j]}
    assert diff == {3}


def test_trace_arity_and_string_input():
    with pytest.raises(ArityError):
        trace(P22, [0] * 63)
    assert eval_saf(P22, "0" * 64) == 0


def test_trace_dict_encodes_fail():
    d = trace(P22, [0] * 64).as_dict()
    assert d["steps"][0] == {"t": 0, "step1": 2, "step2": "FAIL",
                             "block_for_step1": 0, "block_for_step2": None}
    assert d["final"] == 0


small_params = st.sampled_from([(2, 2), (3, 2), (2, 3), (2, 4), (3, 4)]).map(
    lambda kw: validate_params(kw[0], kw[1], min_valid_n(*kw)))


@st.composite
def param_input(draw):
    p = draw(small_params)
    # bias toward sparse inputs so the chain survives more steps
    density = draw(st.sampled_from([0.05, 0.2, 0.5]))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return p, (rng.random(p.n) < density).astype(int).tolist()


@st.composite
def param_chain(draw):
    p = draw(small_params)
    length = draw(st.integers(0, 2 * p.k))
    values = draw(st.lists(st.integers(0, p.w - 1), min_size=length, max_size=length))
    seed = draw(st.integers(0, 1000))
    return p, list(chain_witness(p, values, seed=seed))


inputs = st.one_of(param_input(), param_chain())


@settings(max_examples=200, deadline=None)
@given(inputs)
def test_fail_absorbs(case):
    p, x = case
    tr = trace(p, x)
    values = tr.values()
    if FAIL in values:
        first = values.index(FAIL)
        assert all(v is FAIL for v in values[first:])
        assert tr.final == 0


@settings(max_examples=200, deadline=None)
@given(inputs)
def test_step_ranges(case):
    p, x = case
    for t, rec in enumerate(trace(p, x).steps):
        if rec.step1 is not FAIL:
            assert p.w <= rec.step1 < 2 * p.w
        if rec.step2 is not FAIL:
            assert 0 <= rec.step2 < p.w
        assert rec.step1 == step1(p.layout, x, t)
        assert rec.step2 == step2(p.layout, x, t)


def queried_addresses(p, tr):
    out, prev = [], 0
    for t, rec in enumerate(tr.steps):
        if prev is FAIL:
            break
        out.append((t, prev))
        if rec.step1 is FAIL:
            break
        out.append((t, rec.step1))
        prev = rec.step2
    return set(out)


@settings(max_examples=150, deadline=None)
@given(inputs, st.integers(0, 2**32 - 1))
def test_unselected_blocks_do_not_matter(case, seed):
    p, x = case
    lay = p.layout
    tr = trace(p, x)
    used = {b for r in tr.steps for b in (r.block_for_step1, r.block_for_step2) if b is not None}
    asked = queried_addresses(p, tr)
    rng = np.random.default_rng(seed)
    y = list(x)
    for q in range(p.block_count):
        if q in used:
            continue
        trial = list(y)
        for j in lay.block_range(q):
            if rng.random() < 0.5:
                trial[j] ^= 1
        # an unselected block may not move onto an address the trace asked for
        if (adr_k(lay, trial, q), adr_w(lay, trial, q)) not in asked:
            y = trial
    assert eval_saf(p, y) == tr.final


@settings(max_examples=150, deadline=None)
@given(inputs, st.data())
def test_block_fields_are_local(case, data):
    p, x = case
    lay = p.layout
    q = data.draw(st.integers(0, p.block_count - 1))
    before = (adr_k(lay, x, q), adr_w(lay, x, q), block_value(lay, x, q))
    y = list(x)
    for j in range(p.n):
        if lay.block_of(j) != q and data.draw(st.booleans()):
            y[j] ^= 1
    assert (adr_k(lay, y, q), adr_w(lay, y, q), block_value(lay, y, q)) == before


@pytest.mark.parametrize("k, w", [(2, 2), (2, 3), (3, 4), (5, 2)])
def test_batch_matches_scalar(k, w):
    p = validate_params(k, w, min_valid_n(k, w))
    rng = np.random.default_rng(k * 100 + w)
    rows = [(rng.random(p.n) < d).astype(np.uint8) for d in (0.02, 0.1, 0.5) for _ in range(100)]
    rows += [np.array(chain_witness(p, list(rng.integers(0, w, 2 * k)), seed=i), dtype=np.uint8)
             for i in range(50)]
    X = np.stack(rows)
    outs, steps = trace_batch(p, X)
    for row, out, st_row in zip(X, outs, steps):
        tr = trace(p, row.tolist())
        assert out == tr.final
        assert st_row.tolist() == [-1 if v is FAIL else v for v in tr.values()]
    assert np.array_equal(eval_saf_batch(p, X), outs)
