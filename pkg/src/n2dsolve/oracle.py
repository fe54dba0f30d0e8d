"""Independent verification tools: closed-form solutions and an FD solver.

Nothing here shares discretization machinery with the main solver; the
finite-difference path in particular is a deliberately dissimilar second-order
scheme whose known O(h^2) error model makes disagreements attributable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import k0, k1

from .errors import DegenerateProblemError, InvalidArgumentError
from .geometry import NORTH, SOUTH, WEST, BoxNode, QuadTree, Square
from .problem import ConstantField, CoordinateFlux


@dataclass(frozen=True)
class AnalyticSolution:
    """A closed-form solution of the PDE for a specific (a, b) pair."""

    name: str
    kappa: float
    _value: object
    _grad: object
    a_field: object
    b_field: object

    def value(self, pts) -> np.ndarray:
        return self._value(np.atleast_2d(pts))

    def grad(self, pts) -> np.ndarray:
        return self._grad(np.atleast_2d(pts))

    def coordinate_flux(self, pts, orientation: str) -> np.ndarray:
        """d(phi)/dy on horizontal edges, d(phi)/dx on vertical edges."""
        g = self.grad(pts)
        return g[:, 1] if orientation == "h" else g[:, 0]

    def as_flux(self) -> CoordinateFlux:
        return CoordinateFlux(
            lambda pts, orientation: self.coordinate_flux(pts, orientation),
            name=self.name,
        )


def _cosh_dir(kappa: float, theta: float, name: str) -> AnalyticSolution:
    d = np.array([math.cos(theta), math.sin(theta)])

    def val(pts):
        return np.cosh(kappa * (pts @ d))

    def grad(pts):
        return kappa * np.sinh(kappa * (pts @ d))[:, None] * d[None, :]

    return AnalyticSolution(
        name, kappa, val, grad, ConstantField(1.0), ConstantField(kappa**2)
    )


def _exp_y(kappa: float) -> AnalyticSolution:
    def val(pts):
        return np.exp(kappa * pts[:, 1])

    def grad(pts):
        g = np.zeros((pts.shape[0], 2))
        g[:, 1] = kappa * np.exp(kappa * pts[:, 1])
        return g

    return AnalyticSolution(
        f"exp_y_k{kappa:g}", kappa, val, grad, ConstantField(1.0), ConstantField(kappa**2)
    )


def _radial(kappa: float, center: np.ndarray) -> AnalyticSolution:
    """Exponentially decaying radial kernel of -lap + kappa^2, source at `center`."""

    def val(pts):
        r = np.linalg.norm(pts - center[None, :], axis=1)
        return k0(kappa * r)

    def grad(pts):
        d = pts - center[None, :]
        r = np.linalg.norm(d, axis=1)
        return (-kappa * k1(kappa * r) / r)[:, None] * d

    return AnalyticSolution(
        f"radial_k{kappa:g}", kappa, val, grad, ConstantField(1.0), ConstantField(kappa**2)
    )


def analytic_suite(domain: Square, kappas=(1.0, 2.0)) -> list[AnalyticSolution]:
    """Closed-form solutions (all for a = 1, b = kappa^2) used as oracles.

    The radial entry is centered outside the domain with enough margin that
    every sample patch at any refinement level stays away from the source.
    """
    center = np.array([domain.x - 0.7 * domain.side, domain.y + 1.8 * domain.side])
    suite: list[AnalyticSolution] = []
    for kappa in kappas:
        suite.append(_cosh_dir(kappa, 0.0, f"cosh_x_k{kappa:g}"))
        suite.append(_exp_y(kappa))
        suite.append(_cosh_dir(kappa, math.pi / 6.0, f"cosh_rot_k{kappa:g}"))
        suite.append(_radial(kappa, center))
    return suite


def _residual_once(sol_value, a_field, b_field, pts, h: float) -> np.ndarray:
    def d1(fn, axis):
        c = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
        acc = np.zeros(pts.shape[0])
        for k, ck in zip(range(-3, 4), c):
            if ck == 0.0:
                continue
            q = pts.copy()
            q[:, axis] += k * h
            acc += ck * fn(q)
        return acc / h

    def d2(fn, axis):
        c = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0
        acc = np.zeros(pts.shape[0])
        for k, ck in zip(range(-3, 4), c):
            q = pts.copy()
            q[:, axis] += k * h
            acc += ck * fn(q)
        return acc / h**2

    a = a_field.value(pts)
    ga = a_field.grad(pts)
    b = b_field.value(pts)
    lap = d2(sol_value, 0) + d2(sol_value, 1)
    gx = d1(sol_value, 0)
    gy = d1(sol_value, 1)
    return -a * lap - ga[:, 0] * gx - ga[:, 1] * gy + b * sol_value(pts)


def pde_residual(sol_value, a_field, b_field, pts, h: float = 4e-2) -> np.ndarray:
    """Numerical residual of -div(a grad phi) + b phi from point values only.

    Sixth-order stencils at steps h and h/2, Richardson-extrapolated, so no
    closed-form derivative enters; the residual of a true solution sits
    below ~1e-11 relative to the solution scale.
    """
    pts = np.atleast_2d(pts)
    coarse = _residual_once(sol_value, a_field, b_field, pts, h)
    fine = _residual_once(sol_value, a_field, b_field, pts, 0.5 * h)
    return (64.0 * fine - coarse) / 63.0


def box_boundary_data(sol: AnalyticSolution, box: BoxNode, tree: QuadTree):
    """Stack (u, v) of a closed-form solution over a box's boundary nodes.

    The stacking order matches the N2D operators: sides south, east, north,
    west; edges by increasing coordinate; nodes by increasing coordinate.
    """
    us, vs = [], []
    for side in box.side_edges:
        for eid in side:
            edge = tree.edges[eid]
            us.append(sol.value(edge.nodes))
            vs.append(sol.coordinate_flux(edge.nodes, edge.orientation))
    return np.concatenate(us), np.concatenate(vs)


# -- finite-difference reference solver ----------------------------------------


class FDSolution:
    """Nodal FD solution on a uniform grid, with bilinear point sampling."""

    def __init__(self, domain: Square, grid_n: int, values: np.ndarray):
        self.domain = domain
        self.grid_n = grid_n
        self.values = values  # shape (grid_n + 1, grid_n + 1), [ix, iy]
        self.h = domain.side / grid_n

    def sample(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        fx = np.clip((pts[:, 0] - self.domain.x) / self.h, 0, self.grid_n - 1e-12)
        fy = np.clip((pts[:, 1] - self.domain.y) / self.h, 0, self.grid_n - 1e-12)
        ix = np.minimum(fx.astype(int), self.grid_n - 1)
        iy = np.minimum(fy.astype(int), self.grid_n - 1)
        tx = fx - ix
        ty = fy - iy
        v = self.values
        return (
            v[ix, iy] * (1 - tx) * (1 - ty)
            + v[ix + 1, iy] * tx * (1 - ty)
            + v[ix, iy + 1] * (1 - tx) * ty
            + v[ix + 1, iy + 1] * tx * ty
        )


def fd_solve(spec, domain: Square, grid_n: int, flux=None) -> FDSolution:
    """Second-order conservative FD solve with ghost-point Neumann conditions.

    The grid has (grid_n + 1)^2 nodes including the boundary. Fluxes at cell
    faces use coefficient values at face midpoints; ghost values are
    eliminated using the given coordinate-direction boundary data.
    """
    if grid_n < 16:
        raise InvalidArgumentError(f"grid_n must be >= 16, got {grid_n}")
    flux = flux if flux is not None else spec.neumann_data
    m = grid_n
    h = domain.side / m
    xs = domain.x + h * np.arange(m + 1)
    ys = domain.y + h * np.arange(m + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    n_pts = (m + 1) ** 2

    def idx(ix, iy):
        return ix * (m + 1) + iy

    b_vals = spec.coeff_b.value(pts)
    if np.min(b_vals) <= 0.0:
        raise DegenerateProblemError("FD oracle requires b > 0 on the grid")

    # face coefficients a(x +- h/2) horizontally/vertically, padded with the
    # values just outside the boundary (fields are defined on the plane)
    ax_pts = np.stack(
        [np.repeat(domain.x + h * (np.arange(m + 2) - 0.5), m + 1),
         np.tile(ys, m + 2)], axis=1
    )
    a_xface = spec.coeff_a.value(ax_pts).reshape(m + 2, m + 1)
    ay_pts = np.stack(
        [np.repeat(xs, m + 2),
         np.tile(domain.y + h * (np.arange(m + 2) - 0.5), m + 1)], axis=1
    )
    a_yface = spec.coeff_a.value(ay_pts).reshape(m + 1, m + 2)

    rows, cols, data = [], [], []
    rhs = np.zeros(n_pts)

    IX, IY = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
    IX = IX.ravel()
    IY = IY.ravel()
    center = idx(IX, IY)

    aw = a_xface[IX, IY] / h**2        # face towards ix - 1
    ae = a_xface[IX + 1, IY] / h**2    # face towards ix + 1
    as_ = a_yface[IX, IY] / h**2       # face towards iy - 1
    an = a_yface[IX, IY + 1] / h**2    # face towards iy + 1

    rows.append(center)
    cols.append(center)
    data.append(aw + ae + as_ + an + b_vals)

    # neighbor couplings; ghost neighbors reflect to the interior twin and
    # contribute the boundary flux to the right-hand side
    def tab_flux(points, orientation, outward_sign):
        return flux.coordinate_values(points, orientation, outward_sign)

    for dix, diy, coef in ((-1, 0, aw), (1, 0, ae), (0, -1, as_), (0, 1, an)):
        jx = IX + dix
        jy = IY + diy
        inside = (jx >= 0) & (jx <= m) & (jy >= 0) & (jy <= m)
        rows.append(center[inside])
        cols.append(idx(jx[inside], jy[inside]))
        data.append(-coef[inside])
        out = ~inside
        if not np.any(out):
            continue
        # ghost at distance h beyond the wall: phi_ghost = phi_twin -+ 2h v
        twin_x = IX[out] - dix
        twin_y = IY[out] - diy
        rows.append(center[out])
        cols.append(idx(twin_x, twin_y))
        data.append(-coef[out])
        ppts = np.stack([xs[IX[out]], ys[IY[out]]], axis=1)
        if dix != 0:
            v = tab_flux(ppts, "v", float(dix))
            rhs[center[out]] += coef[out] * (2.0 * h * dix) * v
        else:
            v = tab_flux(ppts, "h", float(diy))
            rhs[center[out]] += coef[out] * (2.0 * h * diy) * v

    A = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_pts, n_pts),
    )
    try:
        lu = spla.splu(A.tocsc())
    except RuntimeError as exc:  # pragma: no cover - singular only if b <= 0
        raise DegenerateProblemError(f"FD system factorization failed: {exc}") from exc
    vals = lu.solve(rhs)
    return FDSolution(domain, m, vals.reshape(m + 1, m + 1))


def richardson_pair(spec, domain: Square, grids, pts, flux=None):
    """FD solves on two grids sampled at pts, extrapolated pointwise.

    Returns (extrapolated values, error band). The band is |coarse - fine|/3,
    the standard estimate of the fine-grid error for a second-order scheme.
    """
    g1, g2 = grids
    if not (g2 == 2 * g1):
        raise InvalidArgumentError("richardson_pair expects grids (n, 2n)")
    f1 = fd_solve(spec, domain, g1, flux=flux).sample(pts)
    f2 = fd_solve(spec, domain, g2, flux=flux).sample(pts)
    extrap = (4.0 * f2 - f1) / 3.0
    band = float(np.max(np.abs(f2 - f1)) / 3.0)
    return extrap, band
