import numpy as np
import pytest

from n2dsolve import Square, build_tree, gauss_legendre, make_spec
from n2dsolve import oracle, solver
from n2dsolve.errors import InvalidArgumentError, N2DError
from n2dsolve.geometry import EAST, WEST
from n2dsolve.problem import ZeroFlux
from conftest import stacked_rel_diff

UNIT = Square(0.0, 0.0, 1.0)


def cosh_k1(suite):
    return [s for s in suite if s.name == "cosh_x_k1"][0]


def max_edge_potential_error(tree, sol, exact):
    return max(
        float(np.max(np.abs(sol.edge_potential[e.id] - exact.value(e.nodes))))
        for e in tree.edges
    )


# -- build -----------------------------------------------------------------------


def test_build_l1_has_three_records(domain):
    spec = make_spec(domain, n_gauss=6)
    tree = build_tree(domain, 1, gauss_legendre(6))
    state = solver.build(spec, tree)
    assert list(state.merge_records) == [1]
    assert len(state.merge_records[1]) == 3


def test_build_rejects_rule_mismatch(domain):
    spec = make_spec(domain, n_gauss=6)
    tree = build_tree(domain, 1, gauss_legendre(8))
    with pytest.raises(InvalidArgumentError):
        solver.build(spec, tree)


def test_root_operator_covers_exterior_edges(state_l2_g10_k1):
    tree = state_l2_g10_k1.tree
    assert sorted(state_l2_g10_k1.root_op.edge_ids) == sorted(tree.exterior_edge_ids)


def test_root_reproduces_boundary_data(state_l2_g10_k1, suite):
    tree = state_l2_g10_k1.tree
    exact = cosh_k1(suite)
    u, v = oracle.box_boundary_data(exact, tree.boxes[1], tree)
    err = np.linalg.norm(u - state_l2_g10_k1.root_op.matrix @ v) / np.linalg.norm(u)
    assert err <= 1e-7


def test_interior_edges_eliminated_exactly_once(state_l2_g10_k1):
    tree = state_l2_g10_k1.tree
    eliminated = []
    for recs in state_l2_g10_k1.merge_records.values():
        for rec in recs:
            eliminated.extend(rec.shared_edge_ids)
    assert sorted(eliminated) == sorted(tree.interior_edge_ids)


def test_threaded_build_matches_serial(domain):
    spec = make_spec(domain, n_gauss=5)
    tree = build_tree(domain, 1, gauss_legendre(5))
    a = solver.build(spec, tree, threads=1)
    b = solver.build(spec, tree, threads=4)
    for lid in tree.leaf_ids:
        assert np.array_equal(a.leaf_ops[lid].matrix, b.leaf_ops[lid].matrix)


def test_merge_flop_growth_factor(domain):
    # cost per level multiplies by ~8 once the hierarchy dominates
    flops = []
    for levels in (2, 3, 4):
        spec = make_spec(domain, n_gauss=4)
        tree = build_tree(domain, levels, gauss_legendre(4))
        state = solver.build(spec, tree)
        flops.append(state.flops.merge)
    ratios = [b / a for a, b in zip(flops, flops[1:])]
    assert 7.0 <= ratios[-1] <= 12.0


# -- solve -----------------------------------------------------------------------


def test_solve_matches_analytic(state_l2_g10_k1, suite):
    sol = solver.solve(state_l2_g10_k1)
    err = max_edge_potential_error(state_l2_g10_k1.tree, sol, cosh_k1(suite))
    assert err <= 1e-7


def test_solve_zero_data_is_zero(state_l2_g10_k1):
    sol = solver.solve(state_l2_g10_k1, ZeroFlux())
    for e in state_l2_g10_k1.tree.edges:
        assert np.max(np.abs(sol.edge_flux[e.id])) <= 1e-10
        assert np.max(np.abs(sol.edge_potential[e.id])) <= 1e-10


def test_solve_linearity(state_l2_g10_k1, suite):
    s1 = cosh_k1(suite)
    s2 = [s for s in suite if s.name == "exp_y_k1"][0]

    class SumFlux:
        def coordinate_values(self, pts, orientation, sign):
            return s1.as_flux().coordinate_values(
                pts, orientation, sign
            ) + s2.as_flux().coordinate_values(pts, orientation, sign)

    a = solver.solve(state_l2_g10_k1, s1.as_flux())
    b = solver.solve(state_l2_g10_k1, s2.as_flux())
    ab = solver.solve(state_l2_g10_k1, SumFlux())
    for e in state_l2_g10_k1.tree.edges:
        assert np.max(
            np.abs(ab.edge_potential[e.id] - a.edge_potential[e.id] - b.edge_potential[e.id])
        ) <= 1e-10
        assert np.max(
            np.abs(ab.edge_flux[e.id] - a.edge_flux[e.id] - b.edge_flux[e.id])
        ) <= 1e-10


def test_repeated_solves_reuse_build(state_l2_g10_k1, suite):
    before = state_l2_g10_k1.flops.merge
    solver.solve(state_l2_g10_k1, cosh_k1(suite).as_flux())
    solver.solve(state_l2_g10_k1, ZeroFlux())
    assert state_l2_g10_k1.flops.merge == before  # no refactorization
    assert state_l2_g10_k1.flops.solve < 0.05 * state_l2_g10_k1.flops.build


def test_missing_record_aborts(domain):
    spec = make_spec(domain, n_gauss=4)
    tree = build_tree(domain, 2, gauss_legendre(4))
    state = solver.build(spec, tree)
    records = dict(state.merge_records)
    del records[2]
    broken = solver.SolverState(
        tree, spec, state.leaf_ops, records, state.root_op, state.flops
    )
    with pytest.raises((N2DError, KeyError)):
        solver.solve(broken)


def test_interior_evaluation(state_l2_g10_k1, suite):
    exact = cosh_k1(suite)
    sol = solver.solve(state_l2_g10_k1)
    tree = state_l2_g10_k1.tree
    lid = tree.leaf_ids[6]
    box = tree.boxes[lid].box
    xs = np.linspace(box.x + 0.02, box.x + box.side - 0.02, 6)
    ys = np.linspace(box.y + 0.02, box.y + box.side - 0.02, 6)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    assert np.max(np.abs(sol.evaluate_interior(lid, pts) - exact.value(pts))) <= 1e-7


def test_interior_evaluation_approaches_edge_potential(state_l2_g10_k1):
    sol = solver.solve(state_l2_g10_k1)
    tree = state_l2_g10_k1.tree
    lid = tree.leaf_ids[0]
    box = tree.boxes[lid]
    eid = box.side_edges[EAST][0]
    edge = tree.edges[eid]
    u_edge = sol.edge_potential[eid]
    errs = []
    for d in (1e-3, 1e-6, 0.0):
        pts = edge.nodes.copy()
        pts[:, 0] -= d
        errs.append(np.max(np.abs(sol.evaluate_interior(lid, pts) - u_edge)))
    assert errs[0] >= errs[1] >= errs[2]
    assert errs[2] <= 1e-9


def test_interior_evaluation_zero_data(state_l2_g10_k1):
    sol = solver.solve(state_l2_g10_k1, ZeroFlux())
    tree = state_l2_g10_k1.tree
    lid = tree.leaf_ids[3]
    box = tree.boxes[lid].box
    pts = np.array([box.center])
    assert np.max(np.abs(sol.evaluate_interior(lid, pts))) <= 1e-10


def test_interior_evaluation_rejects_outside_points(state_l2_g10_k1):
    sol = solver.solve(state_l2_g10_k1)
    lid = state_l2_g10_k1.tree.leaf_ids[0]
    with pytest.raises(InvalidArgumentError):
        sol.evaluate_interior(lid, np.array([[5.0, 5.0]]))


def test_solution_rows_cover_all_nodes(state_l2_g10_k1):
    sol = solver.solve(state_l2_g10_k1)
    rows = sol.rows()
    tree = state_l2_g10_k1.tree
    assert len(rows) == len(tree.edges) * tree.rule.order


# -- flat path -----------------------------------------------------------------


@pytest.fixture(scope="module")
def flat_l2(state_l2_g10_k1):
    tree = state_l2_g10_k1.tree
    system = solver.assemble_flat(state_l2_g10_k1.spec, tree, state_l2_g10_k1.leaf_ops)
    return system


def test_flat_block_row_census(flat_l2):
    assert len(flat_l2.interior_ids) == 24
    assert len(flat_l2.exterior_ids) == 16
    counts = flat_l2.block_counts
    assert max(counts.values()) == 7
    assert min(counts.values()) < 7  # boundary-adjacent rows are sparser


def test_flat_center_edge_has_seven_blocks(flat_l2):
    tree = flat_l2.tree
    # a vertical edge between the two middle columns, middle rows
    for eid in flat_l2.interior_ids:
        e = tree.edges[eid]
        if e.orientation == "v" and abs(e.p0[0] - 0.5) < 1e-12 and abs(e.p0[1] - 0.5) < 1e-12:
            assert flat_l2.block_counts[eid] == 7
            return
    raise AssertionError("central edge not found")


def test_flat_diagonal_block_structure(flat_l2, state_l2_g10_k1):
    # the diagonal block of edge i is T1[east,east] - T2[west,west]
    tree = flat_l2.tree
    g = 10
    eid = next(e for e in flat_l2.interior_ids if tree.edges[e].orientation == "v")
    k = flat_l2.interior_ids.index(eid)
    block = flat_l2.matrix[k * g : (k + 1) * g, k * g : (k + 1) * g].toarray()
    b1, b2 = tree.edge_boxes[eid]
    op1 = state_l2_g10_k1.leaf_ops[b1]
    op2 = state_l2_g10_k1.leaf_ops[b2]
    if tree.boxes[b1].side_edges[EAST][0] != eid:
        op1, op2 = op2, op1
    expect = (
        op1.matrix[op1.edge_slice(eid), op1.edge_slice(eid)]
        - op2.matrix[op2.edge_slice(eid), op2.edge_slice(eid)]
    )
    assert np.max(np.abs(block - expect)) <= 1e-14


def test_flat_exterior_contributions_in_rhs_only(flat_l2):
    g = 10
    assert flat_l2.matrix.shape == (24 * g, 24 * g)
    assert flat_l2.exterior_matrix.shape == (24 * g, 16 * g)


def test_flat_agrees_with_hierarchical_constant(state_l2_g10_k1, flat_l2):
    tree = state_l2_g10_k1.tree
    sol = solver.solve(state_l2_g10_k1)
    flat = solver.solve_flat(flat_l2)
    rel = stacked_rel_diff(tree, sol.edge_flux, flat.flux, tree.interior_edge_ids)
    assert rel <= 1e-9
    assert flat.residual_rel <= 1e-11


def test_flat_agrees_with_hierarchical_variable(state_l2_g10_var):
    tree = state_l2_g10_var.tree
    sol = solver.solve(state_l2_g10_var)
    system = solver.assemble_flat(state_l2_g10_var.spec, tree, state_l2_g10_var.leaf_ops)
    flat = solver.solve_flat(system)
    rel = stacked_rel_diff(tree, sol.edge_flux, flat.flux, tree.interior_edge_ids)
    assert rel <= 1e-9
    assert flat.residual_rel <= 1e-11
