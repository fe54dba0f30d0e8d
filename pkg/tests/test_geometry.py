import itertools

import numpy as np
import pytest

from n2dsolve.errors import InvalidArgumentError
from n2dsolve.geometry import (
    EAST,
    NORTH,
    SOUTH,
    WEST,
    Square,
    build_tree,
    write_summary_csv,
)
from n2dsolve.quadrature import gauss_legendre

RULE = gauss_legendre(4)
UNIT = Square(0.0, 0.0, 1.0)


def test_l2_census_matches_sixteen_box_tiling():
    tree = build_tree(UNIT, 2, RULE)
    assert len(tree.leaf_ids) == 16
    assert len(tree.edges) == 40
    assert len(tree.interior_edge_ids) == 24
    assert len(tree.exterior_edge_ids) == 16


def test_l1_census():
    tree = build_tree(UNIT, 1, RULE)
    assert len(tree.leaf_ids) == 4
    assert len(tree.edges) == 12
    assert len(tree.interior_edge_ids) == 4
    assert len(tree.exterior_edge_ids) == 8


@pytest.mark.parametrize("levels", (1, 2, 3))
def test_edge_census_formula(levels):
    n = 2**levels
    tree = build_tree(UNIT, levels, RULE)
    assert len(tree.interior_edge_ids) == 2 * n * (n - 1)
    assert len(tree.exterior_edge_ids) == 4 * n
    assert len(tree.edges) == 2 * n * (n - 1) + 4 * n


def test_every_interior_edge_shared_by_two_leaves():
    tree = build_tree(UNIT, 3, RULE)
    for eid in tree.interior_edge_ids:
        assert len(tree.edge_boxes[eid]) == 2
    for eid in tree.exterior_edge_ids:
        assert len(tree.edge_boxes[eid]) == 1


def test_shared_edge_adjacent_and_diagonal():
    tree = build_tree(UNIT, 2, RULE)
    lid = {tree.boxes[b].grid: b for b in tree.leaf_ids}
    a, b = tree.boxes[lid[(0, 0)]], tree.boxes[lid[(1, 0)]]
    eid = tree.shared_edge(a, b)
    assert eid is not None and tree.edges[eid].orientation == "v"
    assert tree.shared_edge(a, tree.boxes[lid[(1, 1)]]) is None


def test_shared_edge_pair_count_matches_interior_edges():
    tree = build_tree(UNIT, 2, RULE)
    found = sum(
        1
        for a, b in itertools.combinations(tree.leaf_ids, 2)
        if tree.shared_edge(tree.boxes[a], tree.boxes[b]) is not None
    )
    assert found == 24


def test_shared_edge_requires_leaves():
    tree = build_tree(UNIT, 2, RULE)
    with pytest.raises(InvalidArgumentError):
        tree.shared_edge(tree.boxes[1], tree.boxes[tree.leaf_ids[0]])


def test_child_order_geometry():
    tree = build_tree(UNIT, 1, RULE)
    sw, nw, se, ne = (tree.boxes[c] for c in tree.child_order(tree.boxes[1]))
    assert sw.box.x == 0.0 and sw.box.y == 0.0
    assert nw.box.x == 0.0 and nw.box.y == 0.5
    assert se.box.x == 0.5 and se.box.y == 0.0
    assert ne.box.x == 0.5 and ne.box.y == 0.5
    # sw and se are horizontally adjacent
    assert tree.shared_edge(sw, se) is not None
    # bottom pair plus top pair tile the parent
    assert sw.box.side * 2 == tree.boxes[1].box.side


def test_child_order_rejects_leaf():
    tree = build_tree(UNIT, 1, RULE)
    with pytest.raises(InvalidArgumentError):
        tree.child_order(tree.boxes[tree.leaf_ids[0]])


def test_ids_level_by_level():
    tree = build_tree(UNIT, 2, RULE)
    assert tree.boxes[1].level == 0
    assert tree.boxes[1].children == (2, 3, 4, 5)
    assert all(tree.boxes[b].level == 1 for b in (2, 3, 4, 5))
    assert sorted(tree.level_ids(2)) == list(range(6, 22))


def test_leaf_side_lists_single_edge():
    tree = build_tree(UNIT, 2, RULE)
    for lid in tree.leaf_ids:
        for side in tree.boxes[lid].side_edges:
            assert len(side) == 1


def test_parent_side_lists_concatenate_children():
    tree = build_tree(UNIT, 3, RULE)
    for bid, box in tree.boxes.items():
        if box.is_leaf:
            continue
        sw, nw, se, ne = (tree.boxes[c] for c in box.children)
        assert box.side_edges[SOUTH] == sw.side_edges[SOUTH] + se.side_edges[SOUTH]
        assert box.side_edges[NORTH] == nw.side_edges[NORTH] + ne.side_edges[NORTH]
        assert box.side_edges[WEST] == sw.side_edges[WEST] + nw.side_edges[WEST]
        assert box.side_edges[EAST] == se.side_edges[EAST] + ne.side_edges[EAST]


def test_side_lists_ordered_by_coordinate():
    tree = build_tree(UNIT, 2, RULE)
    box = tree.boxes[1]
    for side_idx, axis in ((SOUTH, 0), (NORTH, 0), (EAST, 1), (WEST, 1)):
        coords = [tree.edges[e].p0[axis] for e in box.side_edges[side_idx]]
        assert coords == sorted(coords)


def test_every_node_in_exactly_one_edge():
    tree = build_tree(UNIT, 2, RULE)
    pts = np.vstack([e.nodes for e in tree.edges])
    uniq = np.unique(np.round(pts, 12), axis=0)
    assert uniq.shape[0] == pts.shape[0]


def test_edge_geometry_conventions():
    tree = build_tree(UNIT, 2, RULE)
    for e in tree.edges:
        if e.orientation == "h":
            assert e.p0[1] == e.p1[1]
            assert np.all(np.diff(e.nodes[:, 0]) > 0)
        else:
            assert e.p0[0] == e.p1[0]
            assert np.all(np.diff(e.nodes[:, 1]) > 0)
        # nodes strictly inside the open segment
        lo = min(e.p0[0], e.p1[0]), min(e.p0[1], e.p1[1])
        hi = max(e.p0[0], e.p1[0]), max(e.p0[1], e.p1[1])
        assert np.all(e.nodes[:, 0] >= lo[0]) and np.all(e.nodes[:, 0] <= hi[0])
        assert not np.any(np.all(e.nodes == np.array(e.p0), axis=1))


def test_boundary_side_of():
    tree = build_tree(UNIT, 1, RULE)
    for eid in tree.exterior_edge_ids:
        edge = tree.edges[eid]
        side = tree.boundary_side_of(edge)
        if side == SOUTH:
            assert edge.p0[1] == 0.0
        elif side == NORTH:
            assert edge.p0[1] == 1.0
        elif side == WEST:
            assert edge.p0[0] == 0.0
        else:
            assert edge.p0[0] == 1.0
    with pytest.raises(InvalidArgumentError):
        tree.boundary_side_of(tree.edges[tree.interior_edge_ids[0]])


def test_zero_levels_rejected():
    with pytest.raises(InvalidArgumentError):
        build_tree(UNIT, 0, RULE)


def test_summary_csv(tmp_path):
    tree = build_tree(UNIT, 2, RULE)
    path = tmp_path / "tree.csv"
    write_summary_csv(tree, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("level,")
    assert len(lines) == 4  # header + levels 0..2
