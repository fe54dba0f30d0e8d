"""The full direct solver and its independent flat-system twin.

Build: construct every leaf operator by patch sampling, then sweep the tree
upwards merging four children at a time until the root operator is known.
Every merge leaves behind its elimination map.

Solve: tabulate the given boundary data on the exterior edges, then sweep
downwards; at each box the stored maps recover the fluxes on the edges that
merge eliminated, parents before children and the final vertical record
before its two horizontal ones, so every map only ever sees known data. One
upward build supports any number of downward solves.

The flat path assembles the same unknowns into one global block system (one
block row per interior edge, at most 7 nonzero blocks each) and solves it
directly. It shares nothing with the hierarchical elimination beyond the
leaf operators, which makes it a strong structural cross-check at small
sizes.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateProblemError, InvalidArgumentError, N2DError
from .flops import FlopCounter, matmul_flops
from .geometry import EAST, NORTH, SOUTH, WEST, QuadTree
from .leafop import build_leaf_n2d, default_patch_order, solve_patch
from .merge import MergeRecord, merge_four
from .operators import N2DOperator
from .problem import ProblemSpec
from .quadrature import interp_matrix


@dataclass
class SolverState:
    """Everything produced by one upward build."""

    tree: QuadTree
    spec: ProblemSpec
    leaf_ops: dict[int, N2DOperator]
    merge_records: dict[int, tuple[MergeRecord, MergeRecord, MergeRecord]]
    root_op: N2DOperator
    flops: FlopCounter


def build(spec: ProblemSpec, tree: QuadTree, threads: int = 1) -> SolverState:
    """Build all leaf operators and merge them up to the root."""
    if spec.n_gauss != tree.rule.order:
        raise InvalidArgumentError(
            f"spec.n_gauss={spec.n_gauss} does not match the tree's rule order "
            f"{tree.rule.order}"
        )
    spec.validate(tree.root_box)
    counter = FlopCounter()

    leaf_ids = list(tree.leaf_ids)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            ops = list(
                pool.map(
                    lambda lid: build_leaf_n2d(spec, tree.boxes[lid], tree, counter),
                    leaf_ids,
                )
            )
        leaf_ops = dict(zip(leaf_ids, ops))
    else:
        leaf_ops = {
            lid: build_leaf_n2d(spec, tree.boxes[lid], tree, counter)
            for lid in leaf_ids
        }

    ops: dict[int, N2DOperator] = dict(leaf_ops)
    records: dict[int, tuple[MergeRecord, MergeRecord, MergeRecord]] = {}
    for level in range(tree.levels - 1, -1, -1):
        for bid in tree.level_ids(level):
            box = tree.boxes[bid]
            children = tree.child_order(box)
            parent_op, recs = merge_four(
                tuple(ops[c] for c in children), counter=counter, parent_id=bid
            )
            ops[bid] = parent_op
            records[bid] = recs
            for c in children:
                if c not in leaf_ops:
                    del ops[c]  # parents of merged boxes are not needed again
    return SolverState(tree, spec, leaf_ops, records, ops[1], counter)


@dataclass
class Solution:
    """Edge fluxes and potentials of one solve, plus interior evaluation."""

    state: SolverState
    edge_flux: dict[int, np.ndarray]
    edge_potential: dict[int, np.ndarray]

    def evaluate_interior(self, leaf_id: int, points) -> np.ndarray:
        return evaluate_interior(self, leaf_id, points)

    def rows(self):
        """(edge_id, orientation, x, y, u, v) tuples for CSV export."""
        tree = self.state.tree
        out = []
        for edge in tree.edges:
            u = self.edge_potential[edge.id]
            v = self.edge_flux[edge.id]
            for k in range(tree.rule.order):
                out.append(
                    (
                        edge.id,
                        edge.orientation,
                        edge.nodes[k, 0],
                        edge.nodes[k, 1],
                        u[k],
                        v[k],
                    )
                )
        return out


def tabulate_exterior_flux(tree: QuadTree, data) -> dict[int, np.ndarray]:
    """Evaluate boundary data at the exterior edge nodes.

    Data objects see the edge orientation and the outward-normal sign of the
    wall the edge lies on, so presets defined in the outward-normal
    convention can convert themselves to the coordinate convention stored
    everywhere in the solver.
    """
    from .geometry import OUTWARD_SIGN

    flux: dict[int, np.ndarray] = {}
    for eid in tree.exterior_edge_ids:
        edge = tree.edges[eid]
        side = tree.boundary_side_of(edge)
        flux[eid] = data.coordinate_values(
            edge.nodes, edge.orientation, OUTWARD_SIGN[side]
        )
    return flux


def solve(state: SolverState, neumann_data=None) -> Solution:
    """Recover all edge fluxes and potentials for given boundary data."""
    tree = state.tree
    data = neumann_data if neumann_data is not None else state.spec.neumann_data
    flux = tabulate_exterior_flux(tree, data)

    for level in range(tree.levels):
        for bid in tree.level_ids(level):
            box = tree.boxes[bid]
            if box.is_leaf:
                continue
            rec_bottom, rec_top, rec_final = state.merge_records[bid]
            rec_final.apply(flux, counter=state.flops)
            rec_bottom.apply(flux, counter=state.flops)
            rec_top.apply(flux, counter=state.flops)

    missing = [e.id for e in tree.edges if e.id not in flux]
    if missing:
        raise N2DError(
            f"downward pass left {len(missing)} edge fluxes unset "
            f"(first: {missing[:4]}); the record traversal is inconsistent"
        )

    potential: dict[int, np.ndarray] = {}
    for lid in tree.leaf_ids:
        op = state.leaf_ops[lid]
        state.flops.add("solve", matmul_flops(op.n_nodes, op.n_nodes, 1))
        u = op.matrix @ op.stack(flux)
        for eid, vals in op.scatter(u).items():
            potential.setdefault(eid, vals)
    return Solution(state, flux, potential)


def evaluate_interior(solution: Solution, leaf_id: int, points) -> np.ndarray:
    """Evaluate the potential inside one leaf from its recovered fluxes.

    Re-solves the local Neumann problem on the leaf box itself through the
    patch machinery, with the leaf's edge fluxes interpolated to the local
    solver's boundary points.
    """
    state = solution.state
    tree = state.tree
    box = tree.boxes[leaf_id]
    if not box.is_leaf:
        raise InvalidArgumentError(f"box {leaf_id} is not a leaf")
    points = np.atleast_2d(points)
    if not np.all(box.box.contains(points)):
        raise InvalidArgumentError(f"points are not inside leaf {leaf_id}")

    g = tree.rule.order
    side_flux = []
    for side_idx in (SOUTH, EAST, NORTH, WEST):
        eid = box.side_edges[side_idx][0]
        side_flux.append((side_idx, solution.edge_flux[eid]))

    from .geometry import OUTWARD_SIGN

    def local_flux(sides, t, pts, s):
        out = np.empty(len(t))
        for side_idx, vals in side_flux:
            mask = sides == side_idx
            if not np.any(mask):
                continue
            interp = interp_matrix(tree.rule, t[mask])
            out[mask] = OUTWARD_SIGN[side_idx] * (interp @ vals)
        return out

    sol = solve_patch(state.spec, box.box, local_flux, default_patch_order(g))
    return sol.value(points)


# -- flat equilibrium path -------------------------------------------------------


@dataclass
class EquilibriumSystem:
    """Global block system over the interior edge fluxes.

    matrix couples interior-edge unknowns; exterior_matrix carries the known
    exterior contributions to the right-hand side (rhs = -exterior_matrix
    times the stacked exterior fluxes). block_counts records the number of
    structurally nonzero blocks per block row.
    """

    tree: QuadTree
    spec: ProblemSpec
    interior_ids: tuple[int, ...]
    exterior_ids: tuple[int, ...]
    matrix: sp.csr_matrix
    exterior_matrix: sp.csr_matrix
    block_counts: dict[int, int]

    def rhs(self, flux: dict[int, np.ndarray] | None = None) -> np.ndarray:
        if flux is None:
            flux = tabulate_exterior_flux(self.tree, self.spec.neumann_data)
        v_ext = np.concatenate([flux[eid] for eid in self.exterior_ids])
        return -self.exterior_matrix @ v_ext


def assemble_flat(
    spec: ProblemSpec, tree: QuadTree, leaf_ops: dict[int, N2DOperator]
) -> EquilibriumSystem:
    """One block row per interior edge, equating the two neighbor boxes'
    predictions of the shared potential."""
    g = spec.n_gauss
    interior = tuple(tree.interior_edge_ids)
    exterior = tuple(tree.exterior_edge_ids)
    int_pos = {eid: k for k, eid in enumerate(interior)}
    ext_pos = {eid: k for k, eid in enumerate(exterior)}

    rows_i, cols_i, vals_i = [], [], []
    rows_e, cols_e, vals_e = [], [], []
    block_counts: dict[int, int] = {}

    for eid in interior:
        edge = tree.edges[eid]
        boxes = tree.edge_boxes[eid]
        if edge.orientation == "v":
            # west neighbor reports through its east side, east neighbor
            # through its west side
            b1 = next(b for b in boxes if tree.boxes[b].side_edges[EAST][0] == eid)
            b2 = next(b for b in boxes if tree.boxes[b].side_edges[WEST][0] == eid)
        else:
            b1 = next(b for b in boxes if tree.boxes[b].side_edges[NORTH][0] == eid)
            b2 = next(b for b in boxes if tree.boxes[b].side_edges[SOUTH][0] == eid)

        row0 = int_pos[eid] * g
        nblocks = 0
        for box_id, sign in ((b1, 1.0), (b2, -1.0)):
            op = leaf_ops[box_id]
            rows_u = op.edge_slice(eid)
            for other in op.edge_ids:
                block = sign * op.matrix[rows_u, op.edge_slice(other)]
                rr, cc = np.meshgrid(np.arange(g), np.arange(g), indexing="ij")
                if other in int_pos:
                    rows_i.append(row0 + rr.ravel())
                    cols_i.append(int_pos[other] * g + cc.ravel())
                    vals_i.append(block.ravel())
                    nblocks += 1
                else:
                    rows_e.append(row0 + rr.ravel())
                    cols_e.append(ext_pos[other] * g + cc.ravel())
                    vals_e.append(block.ravel())
        block_counts[eid] = nblocks - 1  # the two diagonal blocks merge

    n_i = len(interior) * g
    n_e = len(exterior) * g
    matrix = sp.csr_matrix(
        (np.concatenate(vals_i), (np.concatenate(rows_i), np.concatenate(cols_i))),
        shape=(n_i, n_i),
    )
    exterior_matrix = sp.csr_matrix(
        (np.concatenate(vals_e), (np.concatenate(rows_e), np.concatenate(cols_e))),
        shape=(n_i, n_e),
    )
    return EquilibriumSystem(
        tree, spec, interior, exterior, matrix, exterior_matrix, block_counts
    )


@dataclass
class FlatResult:
    flux: dict[int, np.ndarray]
    residual_rel: float


def solve_flat(system: EquilibriumSystem, flux=None) -> FlatResult:
    """Direct sparse solve of the flat system; the check path at desk scale."""
    ext_flux = (
        tabulate_exterior_flux(system.tree, system.spec.neumann_data)
        if flux is None
        else flux
    )
    rhs = system.rhs(ext_flux)
    try:
        lu = spla.splu(system.matrix.tocsc())
    except RuntimeError as exc:
        raise DegenerateProblemError(f"flat system is singular: {exc}") from exc
    x = lu.solve(rhs)
    denom = float(np.linalg.norm(rhs)) or 1.0
    residual = float(np.linalg.norm(system.matrix @ x - rhs)) / denom

    g = system.spec.n_gauss
    out = dict(ext_flux)
    for k, eid in enumerate(system.interior_ids):
        out[eid] = x[k * g : (k + 1) * g]
    return FlatResult(out, residual)
