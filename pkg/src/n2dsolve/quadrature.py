"""Gauss-Legendre quadrature and barycentric Lagrange interpolation.

All boundary functions in this package are represented by their values at
Gauss-Legendre nodes on each edge; this module supplies the rule, the affine
map of nodes onto a segment, and the interpolation matrix from the nodes to
arbitrary targets in [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True, eq=False)
class GaussRule:
    """A Gauss-Legendre rule on [-1, 1].

    nodes are strictly increasing and symmetric about 0; weights are positive
    and sum to 2. A rule with `order` nodes integrates polynomials of degree
    up to 2*order - 1 exactly.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray


def _legendre_and_derivative(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate P_n and P_n' at x by the three-term recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    if n == 1:
        dp = np.ones_like(x)
        return p, dp
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_legendre(order: int) -> GaussRule:
    """Build the `order`-point Gauss-Legendre rule on [-1, 1].

    Nodes are found by Newton iteration on the Legendre polynomial, starting
    from Chebyshev-angle guesses; the iteration is deterministic and converges
    to ~1e-15 in a handful of steps.
    """
    if order < 1:
        raise InvalidArgumentError(f"rule order must be >= 1, got {order}")
    if order == 1:
        return GaussRule(1, np.array([0.0]), np.array([2.0]))

    k = np.arange(1, order + 1)
    x = np.cos(np.pi * (4 * k - 1) / (4 * order + 2))
    for _ in range(100):
        p, dp = _legendre_and_derivative(order, x)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    x = np.sort(x)
    # enforce exact symmetry; Newton leaves it at rounding level
    x = 0.5 * (x - x[::-1])
    _, dp = _legendre_and_derivative(order, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    w = 0.5 * (w + w[::-1])
    return GaussRule(order, x, w)


def map_to_segment(rule: GaussRule, p0, p1) -> np.ndarray:
    """Map the rule's nodes affinely onto the segment from p0 to p1.

    Returns an (order, 2) array ordered from p0 towards p1.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if np.allclose(p0, p1):
        raise InvalidArgumentError(f"segment endpoints coincide: {p0}")
    t = 0.5 * (rule.nodes + 1.0)
    return p0[None, :] + t[:, None] * (p1 - p0)[None, :]


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Barycentric weights w_j = 1 / prod_{k != j} (x_j - x_k).

    Differences are pre-scaled by 4 / span to avoid under/overflow at high
    order; the common factor cancels in the second-form interpolation formula.
    """
    x = np.asarray(nodes, dtype=float)
    scale = 4.0 / (x[-1] - x[0])
    diff = scale * (x[:, None] - x[None, :])
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def interp_matrix(rule: GaussRule, targets) -> np.ndarray:
    """Interpolation matrix from the rule's nodes to `targets` in [-1, 1].

    Uses the second (true) barycentric form, which is numerically stable for
    high orders. Rows at targets that hit a node exactly reduce to unit rows,
    so interpolating at the nodes themselves gives the identity.
    """
    t = np.atleast_1d(np.asarray(targets, dtype=float))
    if np.any(t < -1.0 - 1e-14) or np.any(t > 1.0 + 1e-14):
        raise InvalidArgumentError("interpolation targets must lie in [-1, 1]")
    x = rule.nodes
    w = barycentric_weights(x)

    d = t[:, None] - x[None, :]
    hit = d == 0.0
    d[hit] = 1.0
    m = w[None, :] / d
    m /= m.sum(axis=1)[:, None]
    rows = hit.any(axis=1)
    m[rows] = 0.0
    m[hit] = 1.0
    return m
