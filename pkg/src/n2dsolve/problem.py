"""Coefficient fields, Neumann-data presets, and the problem description.

The PDE being solved is

    -div(a(x) grad(phi)) + b(x) phi = 0      in the domain,
    coordinate-direction flux given           on the boundary,

with smooth scalar a >= a_min > 0 and b >= b_min > 0. All preset fields are
defined on the whole plane so that sample patches may overhang the domain.

Flux data is stored in the coordinate-direction convention used throughout:
on a horizontal edge the flux is d(phi)/dy, on a vertical edge d(phi)/dx.
Presets specified as outward-normal data are converted here (negate on the
south and west sides of the domain boundary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateProblemError, InvalidArgumentError
from .geometry import Square


# -- scalar coefficient fields ------------------------------------------------


class ConstantField:
    """a(x) = c everywhere."""

    def __init__(self, value: float, name: str = "const"):
        self.value_const = float(value)
        self.name = name

    def value(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.full(pts.shape[0], self.value_const)

    def grad(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.zeros((pts.shape[0], 2))


class GaussianBumpField:
    """a(x) = base + amp * exp(-|x - c|^2 / width^2); smooth on the plane."""

    def __init__(self, base: float, amp: float, width: float, center, name: str = "bump"):
        self.base = float(base)
        self.amp = float(amp)
        self.width = float(width)
        self.center = np.asarray(center, dtype=float)
        self.name = name

    def value(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        d = pts - self.center[None, :]
        return self.base + self.amp * np.exp(-np.sum(d * d, axis=1) / self.width**2)

    def grad(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        d = pts - self.center[None, :]
        e = self.amp * np.exp(-np.sum(d * d, axis=1) / self.width**2)
        return (-2.0 / self.width**2) * e[:, None] * d


class SineProductField:
    """b(x) = kappa^2 (1 + beta sin(pi x1) sin(pi x2)); needs |beta| < 1."""

    def __init__(self, kappa: float, beta: float, name: str = "osc"):
        self.kappa = float(kappa)
        self.beta = float(beta)
        self.name = name

    def value(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        s = np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])
        return self.kappa**2 * (1.0 + self.beta * s)

    def grad(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        k2b = self.kappa**2 * self.beta * np.pi
        gx = k2b * np.cos(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])
        gy = k2b * np.sin(np.pi * pts[:, 0]) * np.cos(np.pi * pts[:, 1])
        return np.stack([gx, gy], axis=1)


# -- boundary flux data --------------------------------------------------------


class CoordinateFlux:
    """Flux data given directly in the coordinate-direction convention.

    `fn(pts, orientation)` returns d(phi)/dy values on horizontal edges and
    d(phi)/dx values on vertical edges.
    """

    def __init__(self, fn, name: str):
        self._fn = fn
        self.name = name

    def coordinate_values(self, pts, orientation: str, outward_sign: float) -> np.ndarray:
        return np.asarray(self._fn(np.atleast_2d(pts), orientation), dtype=float)


class NormalFlux:
    """Flux data given as outward-normal derivative values."""

    def __init__(self, fn, name: str):
        self._fn = fn
        self.name = name

    def coordinate_values(self, pts, orientation: str, outward_sign: float) -> np.ndarray:
        return outward_sign * np.asarray(self._fn(np.atleast_2d(pts)), dtype=float)


class ZeroFlux:
    name = "zero"

    def coordinate_values(self, pts, orientation: str, outward_sign: float) -> np.ndarray:
        return np.zeros(np.atleast_2d(pts).shape[0])


# -- problem description -------------------------------------------------------


# calibrated per-n_gauss defaults: (patch enlargement, highest sampling mode).
# The pair controls how strongly high perimeter modes attenuate before they
# reach the box and how many of them the fit ingests; together they place
# the sampling floor of each n_gauss so that refining by two nodes per edge
# gains at least two orders of accuracy until the epsilon floor.
SAMPLING_LADDER = {
    3: (1.5, 3),
    4: (1.5, 4),
    5: (1.55, 6),
    6: (1.6, 9),
    7: (1.6, 12),
    8: (1.6, 15),
    9: (2.0, 17),
}


def sampling_defaults(n_gauss: int) -> tuple[float, int]:
    """Default (enlargement, highest mode) for a given nodes-per-edge count."""
    return SAMPLING_LADDER.get(n_gauss, (2.5, 2 * n_gauss))


@dataclass
class ProblemSpec:
    """Everything the solver needs besides the tree.

    n_samp = 0 and enlargement = 0 mean "use the calibrated defaults for
    this n_gauss". epsilon is the relative singular-value cutoff used both
    when fitting operators and as the accuracy target they are held to.
    """

    coeff_a: object
    coeff_b: object
    neumann_data: object
    epsilon: float = 1e-10
    n_gauss: int = 10
    n_samp: int = 0
    enlargement: float = 0.0

    def effective_enlargement(self) -> float:
        if self.enlargement > 0.0:
            return self.enlargement
        return sampling_defaults(self.n_gauss)[0]

    def effective_n_samp(self, n_boundary_nodes: int | None = None) -> int:
        nb = n_boundary_nodes if n_boundary_nodes is not None else 4 * self.n_gauss
        if nb > 4 * self.n_gauss:
            # larger-than-leaf boxes (used by direct cross-checks) need a
            # budget proportional to their boundary size
            return int(math.ceil(1.5 * nb))
        if self.n_samp > 0:
            return self.n_samp
        return 2 * sampling_defaults(self.n_gauss)[1] + 1

    def validate(self, domain: Square, margin: float | None = None) -> None:
        """Check positivity of a and b on an enlargement of the domain.

        The enlargement covers every sample patch: a leaf patch overhangs the
        domain by (enlargement - 1) / 2 times the leaf side, which is at most
        half the root side for any level >= 1.
        """
        if self.epsilon <= 0 or self.epsilon >= 1e-2:
            raise InvalidArgumentError(f"epsilon out of range: {self.epsilon}")
        if self.n_gauss < 1:
            raise InvalidArgumentError(f"n_gauss must be positive, got {self.n_gauss}")
        if self.enlargement != 0.0 and self.enlargement <= 1.0:
            raise InvalidArgumentError(f"patch enlargement must exceed 1, got {self.enlargement}")
        if margin is None:
            margin = 0.5 * (max(self.effective_enlargement(), 2.0) - 1.0) * domain.side
        m = 60
        xs = np.linspace(domain.x - margin, domain.x + domain.side + margin, m)
        ys = np.linspace(domain.y - margin, domain.y + domain.side + margin, m)
        gx, gy = np.meshgrid(xs, ys)
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        a_min = float(np.min(self.coeff_a.value(pts)))
        b_min = float(np.min(self.coeff_b.value(pts)))
        if a_min <= 0.0:
            raise DegenerateProblemError(
                f"coefficient a is not strictly positive (min ~ {a_min:.3e} near the domain)"
            )
        if b_min <= 0.0:
            raise DegenerateProblemError(
                f"coefficient b is not strictly positive (min ~ {b_min:.3e} near the domain); "
                "the pure-Neumann problem with b = 0 is singular and is rejected"
            )


# -- preset registry -------------------------------------------------------------


def _registry_a(name: str, kappa: float, params: dict, domain: Square):
    if name == "const":
        return ConstantField(params.get("a_value", 1.0), name="const")
    if name == "bump":
        return GaussianBumpField(
            base=1.0,
            amp=params.get("bump_amp", 0.5),
            width=params.get("bump_width", 0.3) * domain.side,
            center=domain.center,
            name="bump",
        )
    raise InvalidArgumentError(f"unknown coefficient preset for a: {name!r}")


def _registry_b(name: str, kappa: float, params: dict, domain: Square):
    if name == "const":
        return ConstantField(kappa**2, name="const")
    if name == "osc":
        return SineProductField(kappa, params.get("osc_amp", 0.3), name="osc")
    if name == "zero":
        return ConstantField(0.0, name="zero")
    raise InvalidArgumentError(f"unknown coefficient preset for b: {name!r}")


def _registry_v(name: str, kappa: float, params: dict, domain: Square):
    # imported here to avoid a cycle: oracle uses geometry only
    from . import oracle

    if name == "zero":
        return ZeroFlux()
    if name == "uniform_normal":
        return NormalFlux(lambda pts: np.ones(pts.shape[0]), name="uniform_normal")
    named = {s.name: s for s in oracle.analytic_suite(domain, kappas=(kappa,))}
    key = f"{name}_k{kappa:g}"
    if key in named:
        return named[key].as_flux()
    raise InvalidArgumentError(f"unknown Neumann data preset: {name!r}")


A_PRESETS = ("const", "bump")
B_PRESETS = ("const", "osc", "zero")
V_PRESETS = ("zero", "uniform_normal", "cosh_x", "exp_y", "cosh_rot", "radial")


def make_spec(
    domain: Square,
    a: str = "const",
    b: str = "const",
    v: str = "cosh_x",
    kappa: float = 1.0,
    epsilon: float = 1e-10,
    n_gauss: int = 10,
    n_samp: int = 0,
    enlargement: float = 0.0,
    **params,
) -> ProblemSpec:
    """Build a ProblemSpec from preset names; unknown names raise."""
    return ProblemSpec(
        coeff_a=_registry_a(a, kappa, params, domain),
        coeff_b=_registry_b(b, kappa, params, domain),
        neumann_data=_registry_v(v, kappa, params, domain),
        epsilon=epsilon,
        n_gauss=n_gauss,
        n_samp=n_samp,
        enlargement=enlargement,
    )
