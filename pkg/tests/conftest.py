import numpy as np
import pytest

from n2dsolve import Square, build_tree, gauss_legendre, make_spec
from n2dsolve import oracle, solver

UNIT = Square(0.0, 0.0, 1.0)


@pytest.fixture(scope="session")
def domain():
    return UNIT


@pytest.fixture(scope="session")
def suite(domain):
    return oracle.analytic_suite(domain)


@pytest.fixture(scope="session")
def state_l2_g10_k1(domain):
    """Constant-coefficient build reused by many tests: L=2, n_gauss=10."""
    spec = make_spec(domain, a="const", b="const", v="cosh_x", kappa=1.0, n_gauss=10)
    tree = build_tree(domain, 2, gauss_legendre(10))
    return solver.build(spec, tree)


@pytest.fixture(scope="session")
def state_l2_g10_k2(domain):
    spec = make_spec(domain, a="const", b="const", v="cosh_x", kappa=2.0, n_gauss=10)
    tree = build_tree(domain, 2, gauss_legendre(10))
    return solver.build(spec, tree)


@pytest.fixture(scope="session")
def state_l2_g10_var(domain):
    """Variable-coefficient build: smooth-bump a, oscillatory b."""
    spec = make_spec(domain, a="bump", b="osc", v="cosh_x", kappa=1.0, n_gauss=10)
    tree = build_tree(domain, 2, gauss_legendre(10))
    return solver.build(spec, tree)


def stacked_rel_diff(tree, flux_a, flux_b, edge_ids):
    a = np.concatenate([flux_a[e] for e in edge_ids])
    b = np.concatenate([flux_b[e] for e in edge_ids])
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))
