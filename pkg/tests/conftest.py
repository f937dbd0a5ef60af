import pytest

from kobdd.program import SINK0, SINK1, LeveledProgram, Level, Node, VariableOrder

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def and_program() -> LeveledProgram:
    # x0 AND x1; the x0 = 0 edge leaves straight for sink0
    return LeveledProgram(2, [[
        Level(0, (Node(0, SINK0, (1, 0)),)),
        Level(1, (Node(1, SINK0, SINK1),)),
    ]])


def const_reject(n: int = 2) -> LeveledProgram:
    return LeveledProgram(n, [[Level(0, (Node(0, SINK0, SINK0),))]])


def xor3_program() -> LeveledProgram:
    # two nodes per level track the running parity
    return LeveledProgram(3, [[
        Level(0, (Node(0, (1, 0), (1, 1)),)),
        Level(1, (Node(1, (2, 0), (2, 1)), Node(1, (2, 1), (2, 0)))),
        Level(2, (Node(2, SINK0, SINK1), Node(2, SINK1, SINK0))),
    ]], VariableOrder((0, 1, 2)))


@pytest.fixture
def and_prog():
    return and_program()


@pytest.fixture
def reject_prog():
    return const_reject()


@pytest.fixture
def xor3_prog():
    return xor3_program()


RELAXED = [(2, 2, 32), (2, 3, 72), (3, 2, 72), (3, 3, 162), (2, 4, 128)]


def constructed_pair(params, seed):
    """Restrictions to the first two blocks that steer step2(0) apart.

    Both come from one full chain witness; the second changes the value of
    the block serving step2(0).
    """
    import random

    from kobdd.program import VariableOrder
    from kobdd.subfn import Partition, _set_block, chain_witness

    rng = random.Random(seed)
    w = params.w
    values = [rng.randrange(w) for _ in range(2 * params.k)]
    x = list(chain_witness(params, values, seed=seed))
    xp = list(x)
    _set_block(xp, params.layout, 1, (0, values[0] + w), (values[1] + 1 + rng.randrange(w - 1)) % w)
    partition = Partition(VariableOrder.identity(params.n), 2 * params.a)
    sigma = {j: x[j] for j in partition.a_vars}
    sigma_p = {j: xp[j] for j in partition.a_vars}
    return sigma, sigma_p, partition
