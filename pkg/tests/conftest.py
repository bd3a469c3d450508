import numpy as np
import pytest

from csgbp.instance import Edge, GenSpec, Instance, Kind, Sign, generate_gilbert


def make_t3() -> Instance:
    return Instance(3, (Edge(0, 1, 1.0), Edge(0, 2, -2.0), Edge(1, 2, 3.0)), Kind.EDGE_SUM, "T3")


def make_s3() -> Instance:
    return Instance(3, (Edge(0, 1, sign=Sign.PLUS), Edge(0, 2, sign=Sign.MINUS),
                        Edge(1, 2, sign=Sign.PLUS)), Kind.CORRELATION, "S3")


def make_k3() -> Instance:
    return Instance(3, (Edge(0, 1, 1.0), Edge(0, 2, 1.0), Edge(1, 2, 1.0)), Kind.COORDINATION, "K3")


def random_instance(kind: Kind, n: int, seed: int, s: int = 0, p: float = 0.8,
                    unit_weights: bool | None = None) -> Instance:
    spec = GenSpec(n, p, p_sign=0.6, s=s, seed=seed, unit_weights=unit_weights)
    return generate_gilbert(spec, kind)


@pytest.fixture
def t3():
    return make_t3()


@pytest.fixture
def s3():
    return make_s3()


@pytest.fixture
def k3():
    return make_k3()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
