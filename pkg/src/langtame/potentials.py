"""Target potentials with analytic gradients and drift-condition constants.

A potential u defines the target density pi ~ exp(-u) through its gradient
h = grad u.  The taming schemes additionally consume a set of constants:

  dissipativity   <h(x), x> >= A|x|^a - b          (A, a, b)
  growth          |h(x)| <= L(1 + |x|^{2l})        (L, l)
  local Lipschitz |h(x)-h(y)| <= L'(1+|x|+|y|)^{l'} |x-y|   (L', l')

Constants are supplied per potential, not inferred; the validators below
probe them numerically on user-supplied point clouds and report margins.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "PotentialSpec",
    "double_well_radial",
    "double_well_1d",
    "cubic_demo",
    "gaussian",
    "BUILTIN_CATALOG",
    "make_potential",
    "finite_difference_gradient",
    "validate_dissipativity",
    "validate_growth",
    "MarginReport",
]


@dataclass(frozen=True)
class PotentialSpec:
    """A target potential plus the constants the drift transformers need."""

    name: str
    dim: int
    value: Callable[[np.ndarray], float]        # u(x)
    gradient: Callable[[np.ndarray], np.ndarray]  # h(x) = grad u(x)
    diss_A: float
    diss_a: float          # >= 1
    diss_b: float          # >= 0 (0 only when the bound is tight, e.g. gaussian)
    growth_L: float
    growth_l: float        # real-valued; the double well needs 2l = 3
    lip_Lp: float
    lip_lp: float
    hessian_lb: Optional[float] = None  # lower bound -K on the Hessian, if asserted
    radial_factor: Optional[Callable[[float], float]] = field(default=None, repr=False)
    # radial_factor g: h(x) = g(|x|^2) * x for radial potentials; None otherwise

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.diss_a < 1.0:
            raise ValueError(f"diss_a must be >= 1, got {self.diss_a}")
        if self.diss_A <= 0 or self.growth_L <= 0 or self.lip_Lp <= 0:
            raise ValueError("diss_A, growth_L and lip_Lp must be strictly positive")
        if self.diss_b < 0 or self.growth_l <= 0 or self.lip_lp <= 0:
            raise ValueError("diss_b must be >= 0; growth_l and lip_lp must be > 0")


def double_well_radial(d: int) -> PotentialSpec:
    """u(x) = |x|^4/4 - |x|^2/2, h(x) = x(|x|^2 - 1).

    The gradient vanishes on the unit sphere; dissipativity holds with
    (A, a, b) = (1, 2, 1) since <h(x), x> = |x|^4 - |x|^2 >= |x|^2 - 1.
    """

    def value(x: np.ndarray) -> float:
        t = float(np.dot(x, x))
        return t * t / 4.0 - t / 2.0

    def gradient(x: np.ndarray) -> np.ndarray:
        t = np.dot(x, x)
        return x * (t - 1.0)

    return PotentialSpec(
        name=f"double_well_radial({d})",
        dim=d,
        value=value,
        gradient=gradient,
        diss_A=1.0,
        diss_a=2.0,
        diss_b=1.0,
        growth_L=1.0,
        growth_l=1.5,
        lip_Lp=3.0,
        lip_lp=2.0,
        radial_factor=lambda t: t - 1.0,
    )


def double_well_1d() -> PotentialSpec:
    """The d = 1 case of the radial double well."""
    return dataclasses.replace(double_well_radial(1), name="double_well_1d")


def gaussian(d: int) -> PotentialSpec:
    """u(x) = |x|^2/2, h(x) = x exactly; the dissipativity bound is tight (b = 0)."""

    return PotentialSpec(
        name=f"gaussian({d})",
        dim=d,
        value=lambda x: 0.5 * float(np.dot(x, x)),
        gradient=lambda x: np.asarray(x, dtype=float).copy(),
        diss_A=1.0,
        diss_a=2.0,
        diss_b=0.0,
        growth_L=1.0,
        growth_l=0.5,
        lip_Lp=1.0,
        lip_lp=1.0,
        hessian_lb=1.0,
        radial_factor=lambda t: 1.0,
    )


def cubic_demo() -> PotentialSpec:
    """u(x) = x^3/3, h(x) = x^2 (d = 1).

    Fails dissipativity for x < 0 by design; admitted only by the plain ULA
    baseline, where it drives the moment-divergence demonstration.  The
    constants below are nominal so validators have something to report
    against.
    """

    return PotentialSpec(
        name="cubic_demo",
        dim=1,
        value=lambda x: float(x[0]) ** 3 / 3.0,
        gradient=lambda x: np.array([float(x[0]) ** 2]),
        diss_A=1.0,
        diss_a=2.0,
        diss_b=1.0,
        growth_L=1.0,
        growth_l=1.0,
        lip_Lp=2.0,
        lip_lp=1.0,
    )


BUILTIN_CATALOG: dict[str, Callable[..., PotentialSpec]] = {
    "double_well_radial": double_well_radial,
    "double_well_1d": double_well_1d,
    "cubic_demo": cubic_demo,
    "gaussian": gaussian,
}


def make_potential(name: str, dim: Optional[int] = None) -> PotentialSpec:
    """Resolve a catalog entry by name, passing dim where the entry takes one."""
    if name not in BUILTIN_CATALOG:
        known = ", ".join(sorted(BUILTIN_CATALOG))
        raise KeyError(f"unknown potential {name!r}; known: {known}")
    factory = BUILTIN_CATALOG[name]
    if name in ("double_well_radial", "gaussian"):
        if dim is None:
            raise ValueError(f"potential {name!r} requires dim")
        return factory(dim)
    spec = factory()
    if dim is not None and dim != spec.dim:
        raise ValueError(f"potential {name!r} is fixed at dim={spec.dim}, got dim={dim}")
    return spec


def finite_difference_gradient(
    spec: PotentialSpec, x: np.ndarray, step: float
) -> np.ndarray:
    """Central finite differences of u at x, component-wise.

    (u(x + step e_i) - u(x - step e_i)) / (2 step)
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        hi = spec.value(x + e)
        lo = spec.value(x - e)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise FloatingPointError(
                f"non-finite potential value while differencing component {i}"
            )
        out[i] = (hi - lo) / (2.0 * step)
    return out


@dataclass(frozen=True)
class MarginReport:
    """Worst-case margin of an inequality over a probe cloud.

    margin >= 0 means the inequality held at every probe point; argmin is
    the point achieving the minimum.  Report-only: validators never raise
    on a negative margin.
    """

    check: str
    margin: float
    argmin: np.ndarray
    n_points: int

    @property
    def passed(self) -> bool:
        return bool(self.margin >= 0.0)


def validate_dissipativity(spec: PotentialSpec, points: np.ndarray) -> MarginReport:
    """min over points of <h(x), x> - (A|x|^a - b); nonnegative means verified."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("points must be non-empty")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    worst = np.inf
    arg = pts[0]
    for x in pts:
        h = spec.gradient(x)
        norm = float(np.linalg.norm(x))
        margin = float(np.dot(h, x)) - (spec.diss_A * norm**spec.diss_a - spec.diss_b)
        if margin < worst:
            worst, arg = margin, x
    return MarginReport("dissipativity", worst, np.array(arg), len(pts))


def validate_growth(spec: PotentialSpec, points: np.ndarray) -> MarginReport:
    """min over points of L(1 + |x|^{2l}) - |h(x)|.

    Only the gradient-norm half of the growth condition is probed; Jacobian
    norms would need a Hessian oracle the catalog does not carry.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("points must be non-empty")
    worst = np.inf
    arg = pts[0]
    for x in pts:
        h = spec.gradient(x)
        norm = float(np.linalg.norm(x))
        margin = spec.growth_L * (1.0 + norm ** (2.0 * spec.growth_l)) - float(
            np.linalg.norm(h)
        )
        if margin < worst:
            worst, arg = margin, x
    return MarginReport("growth", worst, np.array(arg), len(pts))
