import numpy as np
import pytest

from shifted_sgmres.sparse_core import ProblemInstance, gen_random_sparse, gen_rhs


def random_instance(seed, n=100, shifts=(0.0, 0.4, 2.0)):
    A = gen_random_sparse(n, nnz_per_row=5, seed=seed)
    b = gen_rhs(n, "seeded_random", seed)
    return ProblemInstance(A, b, list(shifts))


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
