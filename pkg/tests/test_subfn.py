import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kobdd.program import ArityError, VariableOrder, random_kobdd
from kobdd.saf import eval_saf, min_valid_n, validate_params
from kobdd.subfn import (BoolFunction, Partition, ak13_bound, census_by_orders,
                         census_global, census_pi, census_theta, chain_witness, check_ak13,
                         classify_partition, distinguish, good_cut, hierarchy_gap,
                         saf_lower_bound, separation_threshold, _merge, _set_block)

from conftest import RELAXED, and_program, constructed_pair


def brute_census(f, a_vars):
    # plain loops: evaluate f on every (rho, gamma) pair
    n = f.n
    b_vars = [j for j in range(n) if j not in a_vars]
    seen = set()
    for rho in itertools.product((0, 1), repeat=len(a_vars)):
        row = []
        for gamma in itertools.product((0, 1), repeat=len(b_vars)):
            x = [0] * n
            for j, v in zip(a_vars, rho):
                x[j] = v
            for j, v in zip(b_vars, gamma):
                x[j] = v
            row.append(f(x))
        seen.add(tuple(row))
    return len(seen)


def brute_global(f, first_cut=True):
    best = None
    for perm in itertools.permutations(range(f.n)):
        worst = max((brute_census(f, list(perm[:u])) for u in range(1 if first_cut else 2, f.n)),
                    default=1)
        best = worst if best is None else min(best, worst)
    return best


def random_function(n, rng):
    return BoolFunction(n, rng.integers(0, 2, 1 << n))


def test_bool_function_from_bits_convention():
    f = BoolFunction.from_bits("0001")
    assert f((1, 1)) == 1 and f((1, 0)) == 0
    with pytest.raises(ArityError):
        BoolFunction.from_bits("011")
    assert f.to_bits() == "0001"


def test_census_pi_examples():
    zero = BoolFunction.from_bits("0" * 8)
    assert census_pi(zero, Partition(VariableOrder.identity(3), 1)) == 1
    proj = BoolFunction.from_callable(2, lambda x: x[0])
    assert census_pi(proj, Partition.from_sets(2, [0])) == 2
    xor3 = BoolFunction.from_callable(3, lambda x: sum(x) % 2)
    for perm in itertools.permutations(range(3)):
        for u in (1, 2):
            assert census_pi(xor3, Partition(VariableOrder(perm), u)) == 2


def test_census_global_examples():
    assert census_global(BoolFunction.from_bits("0" * 16)).n_global == 1
    xor4 = BoolFunction.from_callable(4, lambda x: sum(x) % 2)
    assert census_global(xor4).n_global == 2
    assert census_by_orders(xor4) == 2
    conj = BoolFunction.from_callable(2, lambda x: x[0] & x[1])
    assert census_global(conj).n_global == 2


def test_census_guards():
    with pytest.raises(ValueError, match="limit"):
        census_global(BoolFunction(9, np.zeros(512)))
    with pytest.raises(ValueError):
        Partition(VariableOrder.identity(3), 0)


def test_global_witness_order_attains_value():
    rng = np.random.default_rng(4)
    for n in (3, 4, 5):
        for _ in range(10):
            f = random_function(n, rng)
            c = census_global(f)
            assert census_theta(f, c.order) == c.n_global
            assert census_pi(f, Partition(c.order, c.cut)) == c.n_pi == c.n_theta


@pytest.mark.parametrize("n", [2, 3, 4])
def test_census_pi_matches_brute_force(n):
    rng = np.random.default_rng(n)
    for _ in range(15):
        f = random_function(n, rng)
        for size in range(1, n):
            for a in itertools.combinations(range(n), size):
                assert census_pi(f, Partition.from_sets(n, a)) == brute_census(f, list(a))


def test_dp_matches_brute_force_small():
    rng = np.random.default_rng(11)
    for n in (3, 4):
        for _ in range(8):
            f = random_function(n, rng)
            assert census_global(f).n_global == brute_global(f)
            assert census_global(f, include_first_cut=False).n_global == brute_global(f, False)


def test_dp_matches_orders_all_three_variable_functions():
    for code in range(256):
        f = BoolFunction(3, [(code >> i) & 1 for i in range(8)])
        assert census_global(f).n_global == census_by_orders(f)


def test_first_cut_does_not_change_global_minimum_on_corpus():
    rng = np.random.default_rng(21)
    for n in (3, 4, 5):
        for _ in range(15):
            f = random_function(n, rng)
            with_first = census_global(f).n_global
            without = census_global(f, include_first_cut=False).n_global
            assert without <= with_first
            assert census_by_orders(f, include_first_cut=False) == without


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1), st.data())
def test_census_depends_only_on_the_cut_set(n, seed, data):
    f = random_function(n, np.random.default_rng(seed))
    perm = data.draw(st.permutations(range(n)))
    u = data.draw(st.integers(1, n - 1))
    a, b = list(perm[:u]), list(perm[u:])
    random.Random(seed).shuffle(a)
    random.Random(seed + 1).shuffle(b)
    value = census_pi(f, Partition(VariableOrder(tuple(perm)), u))
    assert census_pi(f, Partition(VariableOrder(tuple(a + b)), u)) == value
    assert 1 <= value <= min(2 ** u, 2 ** (2 ** (n - u)))


def test_bound_examples():
    assert ak13_bound(2, 2) == 8
    assert all(ak13_bound(1, w) == w for w in range(1, 10))
    assert saf_lower_bound(2, 4) == 16
    assert saf_lower_bound(3, 4) == 256
    assert all(saf_lower_bound(k, 2) == 1 for k in range(2, 10))


def test_check_ak13_examples():
    verdict = check_ak13(and_program())
    assert verdict.census == 2 and verdict.ok
    for seed in range(40):
        program = random_kobdd(1 + seed % 3, 1 + seed % 4, 1 + seed % 6, seed)
        assert check_ak13(program).ok


GRID = [(2, 2), (2, 4), (3, 4)]


@pytest.mark.parametrize("k, w", GRID)
def test_classify_partition_examples(k, w):
    p = validate_params(k, w, min_valid_n(k, w))
    lay = p.layout
    half = classify_partition(lay, Partition(VariableOrder.identity(p.n), p.n // 2))
    assert len(half.i_a) + len(half.i_b) == 2 * k * w
    first = classify_partition(lay, Partition(VariableOrder.identity(p.n), 1))
    assert first.i_a == ()


@pytest.mark.parametrize("k, w", GRID)
def test_good_cut_balances_blocks(k, w):
    p = validate_params(k, w, min_valid_n(k, w))
    lay = p.layout
    rng = np.random.default_rng(k * w)
    for _ in range(50):
        order = VariableOrder(tuple(int(v) for v in rng.permutation(p.n)))
        u = good_cut(lay, order)
        g = classify_partition(lay, Partition(order, u))
        assert len(g.i_a) == k * w and g.balanced and g.holds(lay)
        before = classify_partition(lay, Partition(order, u - 1))
        assert len(before.i_a) == k * w - 1


def test_distinguish_rejects_bad_restrictions():
    p = validate_params(*RELAXED[0][:2], RELAXED[0][2], relaxed=True)
    sigma, sigma_p, part = constructed_pair(p, 0)
    with pytest.raises(ValueError):
        distinguish(p, sigma, dict(sigma), part)
    with pytest.raises(ValueError):
        distinguish(p, {0: 1}, sigma_p, part)


@pytest.mark.parametrize("k, w, n", RELAXED)
def test_distinguish_finds_constructed_pairs(k, w, n):
    p = validate_params(k, w, n, relaxed=True)
    for seed in range(2):
        sigma, sigma_p, part = constructed_pair(p, seed)
        res = distinguish(p, sigma, sigma_p, part, seed=seed)
        assert res.found and res.relaxed
        x, xp = _merge(n, sigma, res.gamma), _merge(n, sigma_p, res.gamma)
        assert eval_saf(p, x) != eval_saf(p, xp)
        assert set(res.gamma) == set(part.b_vars)


def test_distinguish_shadowed_block_not_found():
    p = validate_params(2, 2, 32, relaxed=True)
    lay = p.layout
    part = Partition(VariableOrder.identity(p.n), 2 * p.a)
    x = [0] * p.n
    # both A-side blocks share one address; block 0 always wins the lookup
    _set_block(x, lay, 0, (1, 3), 0)
    _set_block(x, lay, 1, (1, 3), 0)
    xp = list(x)
    _set_block(xp, lay, 1, (1, 3), 1)
    sigma = {j: x[j] for j in part.a_vars}
    sigma_p = {j: xp[j] for j in part.a_vars}
    res = distinguish(p, sigma, sigma_p, part, budget=3000, seed=0)
    assert not res.found and res.tries >= 3000


def test_chain_witness_validation():
    p = validate_params(2, 2, 64)
    with pytest.raises(ValueError):
        chain_witness(p, [0] * 5)
    with pytest.raises(ValueError):
        chain_witness(p, [2])
    with pytest.raises(ValueError):
        chain_witness(p, [0, 1], blocks=[3, 3])


def power(base, exp):
    # square and multiply, independent of the ** operator
    out = 1
    while exp:
        if exp & 1:
            out *= base
        base *= base
        exp >>= 1
    return out


def test_gap_examples():
    r = hierarchy_gap(6, 64)
    assert r.lhs == 16 ** 14 and r.rhs == 1 and r.separated
    r = hierarchy_gap(2, 64)
    assert r.lhs == 1 and r.rhs == 1 and not r.separated
    assert hierarchy_gap(64, 1024).separated
    assert not hierarchy_gap(6, 32).in_range


@pytest.mark.parametrize("w", [64, 128, 256, 1024])
def test_gap_matches_independent_arithmetic(w):
    for k in (2, 3, 4, 6, 17, 64):
        r = hierarchy_gap(k, w)
        a, b = -(-w // 4), w // 16 - 3
        assert r.lhs == power(a, (-(-k // 3) - 1) * (a - 2))
        assert r.rhs == power(b, (k - 1) * b + 1)
        assert r.as_dict()["lhs"]["bits"] == r.lhs.bit_length()


def test_separation_threshold():
    assert separation_threshold(64) == 4
    assert not hierarchy_gap(3, 64).separated
