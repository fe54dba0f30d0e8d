"""Construction of a box's N2D operator by patch sampling and least squares.

The operator of a small box is found without ever discretizing the box
itself: a family of solutions of the PDE is generated on a concentric patch
strictly containing the box, each solution is tabulated on the box's boundary
nodes (potential and coordinate-direction flux), and the operator is the
least-squares fit mapping the flux samples to the potential samples. Because
every sample solves the PDE on a neighborhood of the box, its restriction is
smooth up to the box corners and no corner treatment is needed at this level.

The patch problems are pure Neumann problems solved by tensor-polynomial
least-squares collocation: a Chebyshev-coefficient unknown, the PDE enforced
at an interior Gauss grid and the normal derivative at Gauss points along
each patch side. Gauss points never touch the patch corners, which keeps the
collocation rows well defined even though the sampling fluxes are only
continuous (not smooth) there.

Sampling fluxes generically violate the corner compatibility condition (their
arclength derivative does not cancel between the two sides meeting at a patch
corner), so the exact patch solutions contain an r^2 log r component at each
corner that a pure polynomial basis resolves only algebraically. The basis is
therefore augmented with one closed-form corner solution per patch corner:
the harmonic function Re(z^2 log z) in corner-local coordinates, whose normal
data on the two adjacent sides is exactly linear (zero on one, pi*r on the
other). These four extra columns absorb the leading corner behavior and
restore spectral accuracy of the samples on the box itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import chebyshev as cheb

from .errors import (
    AccuracyError,
    DegenerateProblemError,
    InsufficientSamplingError,
    InvalidArgumentError,
)
from .flops import matmul_flops, qr_apply_flops, qr_flops, svd_flops
from .geometry import EAST, NORTH, SOUTH, WEST, BoxNode, QuadTree, Square
from .operators import N2DOperator
from .problem import ProblemSpec
from .quadrature import gauss_legendre


def make_patch(leaf: BoxNode | Square, enlargement: float) -> Square:
    """Concentric square patch with side = enlargement * box side."""
    box = leaf.box if isinstance(leaf, BoxNode) else leaf
    if enlargement <= 1.0:
        raise InvalidArgumentError(
            f"patch enlargement must exceed 1, got {enlargement}"
        )
    cx, cy = box.center
    side = enlargement * box.side
    return Square(cx - 0.5 * side, cy - 0.5 * side, side)


class PerimeterFlux:
    """One member of the boundary sampling family: a Fourier mode in the
    arclength around the patch perimeter, applied as outward-normal data."""

    def __init__(self, k: int, kind: str, perimeter: float):
        self.k = k
        self.kind = kind  # "cos" or "sin"
        self.perimeter = perimeter

    @property
    def name(self) -> str:
        return "const" if self.k == 0 else f"{self.kind}{self.k}"

    def values(self, s: np.ndarray) -> np.ndarray:
        if self.k == 0:
            return np.ones_like(s)
        arg = 2.0 * np.pi * self.k * s / self.perimeter
        return np.cos(arg) if self.kind == "cos" else np.sin(arg)

    def __call__(self, side: int, t: np.ndarray, pts: np.ndarray, s: np.ndarray):
        return self.values(s)


def sample_boundary_fluxes(patch: Square, n_samp: int) -> list[PerimeterFlux]:
    """First n_samp modes: constant, then cos/sin pairs of increasing k."""
    if n_samp < 1:
        raise InvalidArgumentError(f"n_samp must be >= 1, got {n_samp}")
    perimeter = 4.0 * patch.side
    out = [PerimeterFlux(0, "cos", perimeter)]
    k = 1
    while len(out) < n_samp:
        out.append(PerimeterFlux(k, "cos", perimeter))
        if len(out) < n_samp:
            out.append(PerimeterFlux(k, "sin", perimeter))
        k += 1
    return out


def perimeter_arclength(patch: Square, side: int, pts: np.ndarray) -> np.ndarray:
    """Arclength of boundary points, counterclockwise from the SW corner."""
    s0 = patch.side
    x0, y0 = patch.x, patch.y
    if side == SOUTH:
        return pts[:, 0] - x0
    if side == EAST:
        return s0 + (pts[:, 1] - y0)
    if side == NORTH:
        return 2 * s0 + (x0 + s0 - pts[:, 0])
    return 3 * s0 + (y0 + s0 - pts[:, 1])


class CornerBasis:
    """Closed-form corner solutions Re(z^2 log z), one per patch corner.

    In corner-local coordinates (both axes pointing into the patch) the
    function is harmonic with outward-normal data exactly 0 along one
    adjacent side and pi*r along the other, which is precisely the data
    profile a smooth field cannot produce. Higher-order corner terms are
    left to the polynomial part: they are smooth enough to be captured at
    the working orders, and adding them as explicit columns only degrades
    the conditioning. Values and gradients vanish at the corner itself;
    second derivatives are never evaluated there because collocation points
    stay clear of the corners.
    """

    powers = (2,)

    def __init__(self, patch: Square):
        x0, y0 = patch.x, patch.y
        x1, y1 = patch.x + patch.side, patch.y + patch.side
        # (corner x, corner y, sign x, sign y) with signs mapping the patch
        # into the local first quadrant
        self.frames = (
            (x0, y0, 1.0, 1.0),
            (x1, y0, -1.0, 1.0),
            (x0, y1, 1.0, -1.0),
            (x1, y1, -1.0, -1.0),
        )
        s = patch.side
        self.scales = tuple(
            1.0 / (s**m * (1.0 + abs(math.log(s)))) for m in self.powers
        )

    @property
    def n(self) -> int:
        return len(self.frames) * len(self.powers)

    def _zeta(self, pts, frame):
        cx, cy, sx, sy = frame
        return sx * (pts[:, 0] - cx) + 1j * sy * (pts[:, 1] - cy)

    def value(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        cols = []
        for frame in self.frames:
            z = self._zeta(pts, frame)
            nz = z != 0
            logz = np.zeros(len(z), dtype=complex)
            logz[nz] = np.log(z[nz])
            for m, scale in zip(self.powers, self.scales):
                cols.append(scale * np.real(z**m * logz))
        return np.stack(cols, axis=1)

    def grad(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """d/dx and d/dy columns, each (n_pts, 8), in global coordinates."""
        pts = np.atleast_2d(pts)
        gx, gy = [], []
        for frame in self.frames:
            _, _, sx, sy = frame
            z = self._zeta(pts, frame)
            nz = z != 0
            logz = np.zeros(len(z), dtype=complex)
            logz[nz] = np.log(z[nz])
            for m, scale in zip(self.powers, self.scales):
                fp = z ** (m - 1) * (m * logz + 1.0)
                gx.append(scale * sx * np.real(fp))
                gy.append(scale * (-sy) * np.imag(fp))
        return np.stack(gx, axis=1), np.stack(gy, axis=1)

    def pde_rows(self, pts, a_grad, b_vals) -> np.ndarray:
        """Columns of the PDE operator applied to the corner functions.

        The functions are harmonic, so only the gradient and zero-order terms
        survive: -grad(a).grad(w) + b w.
        """
        gx, gy = self.grad(pts)
        return (
            -a_grad[:, 0][:, None] * gx
            - a_grad[:, 1][:, None] * gy
            + b_vals[:, None] * self.value(pts)
        )

    def normal_rows(self, pts, side: int) -> np.ndarray:
        gx, gy = self.grad(pts)
        if side == SOUTH:
            return -gy
        if side == NORTH:
            return gy
        if side == WEST:
            return -gx
        return gx


@dataclass
class PatchSolution:
    """A solution on a patch: tensor polynomial plus corner terms."""

    patch: Square
    coeffs: np.ndarray  # (p, p) Chebyshev coefficients, x degree first
    corner: CornerBasis | None = None
    corner_coeffs: np.ndarray | None = None

    def _local(self, pts: np.ndarray):
        pts = np.atleast_2d(pts)
        sc = 2.0 / self.patch.side
        xi = sc * (pts[:, 0] - self.patch.x) - 1.0
        eta = sc * (pts[:, 1] - self.patch.y) - 1.0
        return xi, eta, sc

    @property
    def coeff_vector(self) -> np.ndarray:
        if self.corner is None:
            return self.coeffs.ravel()
        return np.concatenate([self.coeffs.ravel(), self.corner_coeffs])

    def value(self, pts) -> np.ndarray:
        xi, eta, _ = self._local(pts)
        out = cheb.chebval2d(xi, eta, self.coeffs)
        if self.corner is not None:
            out = out + self.corner.value(np.atleast_2d(pts)) @ self.corner_coeffs
        return out

    def grad(self, pts) -> np.ndarray:
        xi, eta, sc = self._local(pts)
        cx = cheb.chebder(self.coeffs, axis=0) * sc
        cy = cheb.chebder(self.coeffs, axis=1) * sc
        g = np.stack(
            [cheb.chebval2d(xi, eta, cx), cheb.chebval2d(xi, eta, cy)], axis=1
        )
        if self.corner is not None:
            gx, gy = self.corner.grad(np.atleast_2d(pts))
            g[:, 0] += gx @ self.corner_coeffs
            g[:, 1] += gy @ self.corner_coeffs
        return g


class PatchCollocation:
    """Assembled least-squares collocation system for one patch.

    The factorization is reused across all sampling fluxes of the patch, so
    per-flux cost is a pair of triangular solves. Rows are scaled to unit
    norm before factorization; PDE rows otherwise dwarf the flux rows.
    """

    def __init__(self, spec: ProblemSpec, patch: Square, p: int, counter=None):
        if p < 4:
            raise InvalidArgumentError(f"patch order must be >= 4, got {p}")
        self.spec = spec
        self.patch = patch
        self.p = p
        self._counter = counter
        self._assemble()
        self._factor()

    # basis helpers ----------------------------------------------------------

    def _vander(self, t: np.ndarray, deriv: int) -> np.ndarray:
        v = cheb.chebvander(t, self.p - 1)
        if deriv == 0:
            return v
        d = self._dmat
        for _ in range(deriv):
            v = v @ d
        return v

    def _assemble(self):
        p = self.p
        spec = self.spec
        patch = self.patch
        sc = 2.0 / patch.side  # d(xi)/dx

        # coefficient-space differentiation matrix: column j holds the
        # Chebyshev coefficients of T_j'
        d = np.zeros((p, p))
        for j in range(1, p):
            d[: p - 1, j] = cheb.chebder(np.eye(p)[:, j])
        self._dmat = d

        rule = gauss_legendre(p)
        t = rule.nodes
        bx0 = self._vander(t, 0)
        bx1 = self._vander(t, 1)
        bx2 = self._vander(t, 2)

        # interior tensor Gauss grid, x-major point ordering
        xs = patch.x + 0.5 * patch.side * (t + 1.0)
        ys = patch.y + 0.5 * patch.side * (t + 1.0)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)

        a = spec.coeff_a.value(pts)
        ga = spec.coeff_a.grad(pts)
        b = spec.coeff_b.value(pts)

        vals = np.kron(bx0, bx0)
        dxx = np.kron(bx2, bx0) * sc**2
        dyy = np.kron(bx0, bx2) * sc**2
        dx = np.kron(bx1, bx0) * sc
        dy = np.kron(bx0, bx1) * sc

        a_pde = (
            -a[:, None] * (dxx + dyy)
            - ga[:, 0][:, None] * dx
            - ga[:, 1][:, None] * dy
            + b[:, None] * vals
        )
        self.corner = CornerBasis(patch)
        a_pde = np.hstack([a_pde, self.corner.pde_rows(pts, ga, b)])

        # one Gauss set of normal-derivative rows per side; corners excluded
        # by construction since Gauss nodes are interior to the side
        bc_rows = []
        bc_pts = []
        bc_sides = []
        end0 = self._vander(np.array([-1.0]), 0)
        end1 = self._vander(np.array([1.0]), 0)
        d0 = self._vander(np.array([-1.0]), 1)
        d1 = self._vander(np.array([1.0]), 1)
        for side in (SOUTH, EAST, NORTH, WEST):
            if side in (SOUTH, NORTH):
                px = xs
                py = np.full(p, patch.y if side == SOUTH else patch.y + patch.side)
                row_y = d0 if side == SOUTH else d1
                sign = -1.0 if side == SOUTH else 1.0
                rows = sign * sc * np.kron(bx0, row_y)
            else:
                py = ys
                px = np.full(p, patch.x if side == WEST else patch.x + patch.side)
                row_x = d0 if side == WEST else d1
                sign = -1.0 if side == WEST else 1.0
                rows = sign * sc * np.kron(row_x, bx0)
            spts = np.stack([px, py], axis=1)
            rows = np.hstack([rows, self.corner.normal_rows(spts, side)])
            bc_rows.append(rows)
            bc_pts.append(spts)
            bc_sides.append(np.full(p, side))
        a_bc = np.vstack(bc_rows)
        self.bc_points = np.vstack(bc_pts)
        self.bc_side = np.concatenate(bc_sides)
        self.bc_param = np.tile(t, 4)

        a_full = np.vstack([a_pde, a_bc])
        row_norm = np.linalg.norm(a_full, axis=1)
        row_norm[row_norm == 0.0] = 1.0
        self._row_scale = 1.0 / row_norm
        self._matrix = a_full * self._row_scale[:, None]
        self._n_pde = a_pde.shape[0]
        self._pde_rows_unscaled = a_pde

    def _factor(self):
        m, n = self._matrix.shape
        if self._counter is not None:
            self._counter.add("leaf", qr_flops(m, n))
        q, r = sla.qr(self._matrix, mode="economic", check_finite=False)
        diag = np.abs(np.diag(r))
        rcond = (diag.min() / diag.max()) if diag.max() > 0 else 0.0
        self.cond_estimate = np.inf if rcond == 0.0 else 1.0 / rcond
        if self.cond_estimate > 1e13:
            raise DegenerateProblemError(
                f"patch collocation system is numerically singular "
                f"(cond ~ {self.cond_estimate:.2e}) on patch at "
                f"({self.patch.x:g}, {self.patch.y:g}), side {self.patch.side:g}"
            )
        self._q = q
        self._r = r

    # solving ------------------------------------------------------------------

    def rhs_for(self, flux) -> np.ndarray:
        """Right-hand side column for one boundary flux (normal convention).

        `flux` is called with arrays over all boundary collocation points:
        (side indices, side parameters in [-1, 1], points, arclengths).
        """
        g = flux(self.bc_side, self.bc_param, self.bc_points, self._arclengths())
        rhs = np.zeros(self._matrix.shape[0])
        rhs[self._n_pde :] = g
        return rhs * self._row_scale

    def _arclengths(self) -> np.ndarray:
        out = np.empty(self.bc_points.shape[0])
        for side in (SOUTH, EAST, NORTH, WEST):
            mask = self.bc_side == side
            out[mask] = perimeter_arclength(self.patch, side, self.bc_points[mask])
        return out

    def solve_many(self, fluxes) -> list[PatchSolution]:
        rhs = np.stack([self.rhs_for(f) for f in fluxes], axis=1)
        m, n = self._matrix.shape
        if self._counter is not None:
            self._counter.add("leaf", qr_apply_flops(m, n, rhs.shape[1]))
        y = self._q.T @ rhs
        coeffs = sla.solve_triangular(self._r, y, check_finite=False)
        p2 = self.p * self.p
        return [
            PatchSolution(
                self.patch,
                coeffs[:p2, j].reshape(self.p, self.p),
                corner=self.corner,
                corner_coeffs=coeffs[p2:, j].copy(),
            )
            for j in range(coeffs.shape[1])
        ]

    def residual(self, solution: PatchSolution) -> float:
        """Relative PDE residual at the interior collocation points."""
        c = solution.coeff_vector
        r = self._pde_rows_unscaled @ c
        scale = float(np.max(np.abs(self._pde_rows_unscaled) @ np.abs(c)))
        return float(np.max(np.abs(r))) / max(scale, 1e-300)


def solve_patch(
    spec: ProblemSpec, patch: Square, boundary_flux, p_patch: int, counter=None
) -> PatchSolution:
    """Solve one pure-Neumann patch problem; see PatchCollocation."""
    coll = PatchCollocation(spec, patch, p_patch, counter=counter)
    return coll.solve_many([boundary_flux])[0]


# -- building operators ----------------------------------------------------------


def _boundary_eval_matrices(tree: QuadTree, box: BoxNode, patch: Square, p: int):
    """Evaluation matrices from patch coefficients to the box's boundary
    nodes: potentials and coordinate-direction derivatives, stacked in the
    operator's node order. Columns cover the polynomial coefficients followed
    by the corner-function coefficients."""
    sc = 2.0 / patch.side
    d = np.zeros((p, p))
    for j in range(1, p):
        d[: p - 1, j] = cheb.chebder(np.eye(p)[:, j])
    corner = CornerBasis(patch)

    rows_u = []
    rows_v = []
    for side in box.side_edges:
        for eid in side:
            edge = tree.edges[eid]
            xi = sc * (edge.nodes[:, 0] - patch.x) - 1.0
            eta = sc * (edge.nodes[:, 1] - patch.y) - 1.0
            vx = cheb.chebvander(xi, p - 1)
            vy = cheb.chebvander(eta, p - 1)
            # row for point (xi_i, eta_i): kron of the two basis rows
            u = (vx[:, :, None] * vy[:, None, :]).reshape(len(xi), p * p)
            rows_u.append(np.hstack([u, corner.value(edge.nodes)]))
            gx, gy = corner.grad(edge.nodes)
            if edge.orientation == "h":
                dv = vx[:, :, None] * (vy @ d)[:, None, :] * sc
                cg = gy
            else:
                dv = (vx @ d)[:, :, None] * vy[:, None, :] * sc
                cg = gx
            rows_v.append(np.hstack([dv.reshape(len(xi), p * p), cg]))
    return np.vstack(rows_u), np.vstack(rows_v)


def default_patch_order(nodes_per_side: int) -> int:
    """Patch resolution is kept well above the boundary resolution so the
    least-squares fit, not the patch solves, dominates the operator error."""
    return 2 * nodes_per_side + 8


def mode_budget(p: int, enlargement: float, n_gauss: int, edges_per_side: int) -> int:
    """Highest perimeter mode the discretization can actually carry.

    Two ceilings: the patch polynomial must resolve the mode's oscillation
    (about 5.5 points per wavelength, i.e. k <= 0.72 p), and the box-edge
    tabulation must not alias it (at least 3 nodes per wavelength on a leaf
    edge). Requesting modes beyond the budget only injects noise into the
    fit, so the builder clips there; enrichment past the budget is a no-op
    by design.
    """
    k_res = int(0.72 * p)
    k_alias = int(4.0 * enlargement * edges_per_side * n_gauss / 3.0)
    return max(2, min(k_res, k_alias))


def build_box_n2d(
    spec: ProblemSpec, box: BoxNode, tree: QuadTree, counter=None
) -> N2DOperator:
    """Patch-sample the N2D operator of `box` (leaf or larger)."""
    g = spec.n_gauss
    edges_per_side = len(box.side_edges[0])
    nodes_per_side = edges_per_side * g
    n_bnd = 4 * nodes_per_side
    p = default_patch_order(nodes_per_side)
    enlargement = spec.effective_enlargement()

    requested = spec.effective_n_samp(n_bnd)
    cap = 2 * mode_budget(p, enlargement, g, edges_per_side) + 1
    n_samp = min(requested, cap)

    patch = make_patch(box, enlargement)
    coll = PatchCollocation(spec, patch, p, counter=counter)
    fluxes = sample_boundary_fluxes(patch, n_samp)
    sols = coll.solve_many(fluxes)

    eu, ev = _boundary_eval_matrices(tree, box, patch, p)
    coeffs = np.stack([s.coeff_vector for s in sols], axis=1)
    if counter is not None:
        counter.add("leaf", 2 * matmul_flops(n_bnd, p * p + 8, n_samp))
    u = eu @ coeffs
    v = ev @ coeffs

    if counter is not None:
        counter.add("leaf", svd_flops(n_bnd, n_samp))
    pl, sv, qt = np.linalg.svd(v, full_matrices=False)
    keep = sv > spec.epsilon * sv[0]
    rank = int(np.sum(keep))
    min_rank = max(4, n_bnd // 2)
    if rank < min_rank:
        raise InsufficientSamplingError(
            f"flux samples span only rank {rank} of {n_bnd} boundary modes at "
            f"cutoff {spec.epsilon:g} on box {box.id}; raise n_samp "
            f"(currently {n_samp})"
        )
    if counter is not None:
        counter.add("leaf", matmul_flops(n_bnd, n_samp, rank) + matmul_flops(n_bnd, rank, n_bnd))
    t_mat = (u @ qt[keep].T) @ ((1.0 / sv[keep])[:, None] * pl[:, keep].T)

    # the least-squares misfit equals the potential content of the truncated
    # flux directions; it tracks the sampling floor of the current n_gauss,
    # so only a gross inconsistency (broken geometry, bad patch solve) is a
    # hard error here
    fit = float(np.linalg.norm(u - t_mat @ v, 2) / np.linalg.norm(u, 2))
    if fit > 1e-2:
        raise AccuracyError(
            f"operator fit residual {fit:.3e} (relative) on box {box.id}; "
            "the sample solutions are mutually inconsistent"
        )
    op = N2DOperator(box.id, box.side_edges, g, t_mat)
    op.fit_residual_rel = fit
    return op


def build_leaf_n2d(
    spec: ProblemSpec, leaf: BoxNode, tree: QuadTree, counter=None
) -> N2DOperator:
    """Patch-sample the N2D operator of a leaf box."""
    if not leaf.is_leaf:
        raise InvalidArgumentError(f"box {leaf.id} is not a leaf")
    return build_box_n2d(spec, leaf, tree, counter=counter)
