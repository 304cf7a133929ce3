"""Drift transformers: identity (ULA), classic taming, and the two split-taming schemes.

All transformers map the raw gradient drift h into a step-size-dependent
drift with linearly bounded growth, converging pointwise to h as the step
size vanishes:

  ula           x -> h(x)
  tula_classic  x -> h(x) / (1 + lam |h(x)|)
  wd_tula       x -> A R(x) + (h(x) - A R(x)) / (1 + sqrt(lam) |x|^{2l})
  reg_tula      x -> A R(x) + (g_r(x) - A R(x)) / (1 + sqrt(lam) |x|^{2r+1})

with R(x) = x / (1 + |x|^2)^{1 - a/2} (the linear-growth split of the drift)
and g_r(x) = h(x) + lam (2r+2) |x|^{2r} x the gradient of the regularized
potential u(x) + lam |x|^{2r+2}.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .potentials import PotentialSpec

__all__ = [
    "SCHEME_KINDS",
    "DriftScheme",
    "StepSizeBound",
    "radial_split",
    "wd_tamed_drift",
    "regularized_gradient",
    "reg_tamed_drift",
    "tula_classic_drift",
    "drift_function",
    "compute_step_size_bound",
    "select_reg_exponent",
]

SCHEME_KINDS = ("ula", "tula_classic", "wd_tula", "reg_tula")


@dataclass(frozen=True)
class DriftScheme:
    """Which drift transformer to apply and its parameters.

    lam may be left None to inherit the step size of the run configuration;
    reg_r is required for reg_tula and must exceed growth_l/2.
    """

    kind: str
    lam: Optional[float] = None
    reg_r: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"kind must be one of {SCHEME_KINDS}, got {self.kind!r}")
        if self.lam is not None and self.lam <= 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.kind == "reg_tula" and self.reg_r is not None and self.reg_r <= 0:
            raise ValueError(f"reg_r must be positive, got {self.reg_r}")

    def resolve_r(self, spec: PotentialSpec) -> float:
        """The regularization exponent, defaulting to the selector's choice."""
        if self.reg_r is not None:
            if self.reg_r <= spec.growth_l / 2.0:
                raise ValueError(
                    f"reg_r={self.reg_r} violates the constraint r > l/2 "
                    f"(l={spec.growth_l})"
                )
            return self.reg_r
        r, _ = select_reg_exponent(spec.growth_l, spec.lip_lp)
        return r


def radial_split(x: np.ndarray, A: float, a: float) -> np.ndarray:
    """A R(x) with R(x) = x / (1 + |x|^2)^{1 - a/2}; exactly A x when a = 2."""
    if a < 1.0:
        raise ValueError(f"a must be >= 1, got {a}")
    x = np.asarray(x, dtype=float)
    t = float(np.dot(x, x))
    return A * x / (1.0 + t) ** (1.0 - a / 2.0)


def wd_tamed_drift(spec: PotentialSpec, lam: float, x: np.ndarray) -> np.ndarray:
    """A R(x) + (h(x) - A R(x)) / (1 + sqrt(lam) |x|^{2l}).

    The linear-growth part A R(x) passes through untamed; only the
    superlinear remainder is rescaled.  Finite whenever h(x) is finite.
    """
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    x = np.asarray(x, dtype=float)
    h = np.asarray(spec.gradient(x), dtype=float)
    if not np.all(np.isfinite(h)):
        raise FloatingPointError(f"non-finite gradient at x with |x|={np.linalg.norm(x)}")
    ar = radial_split(x, spec.diss_A, spec.diss_a)
    norm = float(np.linalg.norm(x))
    return ar + (h - ar) / (1.0 + np.sqrt(lam) * norm ** (2.0 * spec.growth_l))


def regularized_gradient(
    spec: PotentialSpec, r: float, lam: float, x: np.ndarray
) -> np.ndarray:
    """Gradient of u(x) + lam |x|^{2r+2}: h(x) + lam (2r+2) |x|^{2r} x."""
    if r <= 0 or lam <= 0:
        raise ValueError(f"r and lam must be positive, got r={r}, lam={lam}")
    x = np.asarray(x, dtype=float)
    h = np.asarray(spec.gradient(x), dtype=float)
    norm = float(np.linalg.norm(x))
    return h + lam * (2.0 * r + 2.0) * norm ** (2.0 * r) * x


def reg_tamed_drift(
    spec: PotentialSpec, r: float, lam: float, x: np.ndarray
) -> np.ndarray:
    """A R(x) + (grad u_{r,lam}(x) - A R(x)) / (1 + sqrt(lam) |x|^{2r+1})."""
    if r <= spec.growth_l / 2.0:
        raise ValueError(
            f"regularization exponent must satisfy r > l/2; got r={r}, l={spec.growth_l}"
        )
    x = np.asarray(x, dtype=float)
    g = regularized_gradient(spec, r, lam, x)
    ar = radial_split(x, spec.diss_A, spec.diss_a)
    norm = float(np.linalg.norm(x))
    return ar + (g - ar) / (1.0 + np.sqrt(lam) * norm ** (2.0 * r + 1.0))


def tula_classic_drift(spec: PotentialSpec, lam: float, x: np.ndarray) -> np.ndarray:
    """h(x) / (1 + lam |h(x)|); the norm never exceeds 1/lam."""
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    h = np.asarray(spec.gradient(np.asarray(x, dtype=float)), dtype=float)
    return h / (1.0 + lam * float(np.linalg.norm(h)))


def drift_function(
    spec: PotentialSpec, scheme: DriftScheme, lam: float
) -> Callable[[np.ndarray], np.ndarray]:
    """Bind a scheme to a potential and step size, returning x -> drift(x)."""
    if scheme.lam is not None and scheme.lam != lam:
        raise ValueError(
            f"scheme.lam={scheme.lam} disagrees with the run step size {lam}"
        )
    if scheme.kind == "ula":
        return lambda x: np.asarray(spec.gradient(np.asarray(x, dtype=float)), dtype=float)
    if scheme.kind == "tula_classic":
        return lambda x: tula_classic_drift(spec, lam, x)
    if scheme.kind == "wd_tula":
        return lambda x: wd_tamed_drift(spec, lam, x)
    r = scheme.resolve_r(spec)
    return lambda x: reg_tamed_drift(spec, r, lam, x)


@dataclass(frozen=True)
class StepSizeBound:
    """Computable part of the admissible step-size ceiling.

    computable_bound = min{1/(4(2 A C* + 2L + 1)^2), 2/mu^2, 1, A/4}.
    The terms requiring analysis-only constants are listed verbatim in
    omitted_terms: the full ceiling is the min of computable_bound and
    those terms, which cannot be evaluated from the potential alone.
    """

    computable_bound: float
    M: float
    mu: float
    C_star: float
    omitted_terms: tuple[str, ...]

    def __post_init__(self) -> None:
        vals = (self.computable_bound, self.M, self.mu, self.C_star)
        if not all(np.isfinite(v) and v > 0 for v in vals):
            raise ValueError(f"all bound fields must be finite and positive: {vals}")


def _radial_jacobian_sup(A: float, a: float) -> float:
    """sup over x of the operator norm of the Jacobian of A R(x).

    R is radial, so the Jacobian's eigenvalues split into one along x,
      d/ds [A s (1+s^2)^{a/2-1}] = A(1+s^2)^{a/2-2} (1 + (a-1) s^2),
    and (d-1) copies perpendicular to x, A(1+s^2)^{a/2-1}.  A log-spaced
    radial scan of both suffices; exactly A at a = 2.
    """
    if a == 2.0:
        return A
    s = np.logspace(-6, 6, 10_000)
    s2 = s * s
    along = np.abs(A * (1.0 + s2) ** (a / 2.0 - 2.0) * (1.0 + (a - 1.0) * s2))
    perp = np.abs(A * (1.0 + s2) ** (a / 2.0 - 1.0))
    return float(max(along.max(), perp.max(), A))  # include the s=0 value A


def compute_step_size_bound(spec: PotentialSpec) -> StepSizeBound:
    """Moment-contraction constants M, mu and the computable step ceiling.

    M = (2(2d + 4A^2 + 2L^2 + A))^{1/a}
    mu = A a M^a / (16 (1 + M^2)^{1 - a/2})
    """
    A, a, L, d = spec.diss_A, spec.diss_a, spec.growth_L, spec.dim
    M = (2.0 * (2.0 * d + 4.0 * A * A + 2.0 * L * L + A)) ** (1.0 / a)
    mu = A * a * M**a / (16.0 * (1.0 + M * M) ** (1.0 - a / 2.0))
    c_star = _radial_jacobian_sup(A, a)
    bound = min(
        1.0 / (4.0 * (2.0 * A * c_star + 2.0 * L + 1.0) ** 2),
        2.0 / (mu * mu),
        1.0,
        A / 4.0,
    )
    return StepSizeBound(
        computable_bound=bound,
        M=M,
        mu=mu,
        C_star=c_star,
        omitted_terms=(
            "1/(c0_dot * H_pi(rho_0))",
            "ln2 / R_2^{2r+2}",
        ),
    )


def select_reg_exponent(l: float, lp: float, cap: float = 50.0) -> tuple[float, float]:
    """Smallest half-integer r with r > l/2 and r(2+lp)/((r+1)(2r-lp)) < 1.

    Returns (r, c) where c = r(2+l)/((r+1)(2r-l)) is the achieved rate
    constant.  The feasibility constraint uses the Lipschitz exponent lp,
    the reported constant uses the growth exponent l; candidates come from
    the grid {0.5, 1.0, 1.5, ...} up to cap.
    """
    if l <= 0 or lp <= 0:
        raise ValueError(f"l and lp must be positive, got l={l}, lp={lp}")
    r = 0.5
    while r <= cap:
        if r > l / 2.0 and 2.0 * r > lp:
            ratio = r * (2.0 + lp) / ((r + 1.0) * (2.0 * r - lp))
            if ratio < 1.0:
                # r > l/2 already holds, so the c denominator is positive
                c = r * (2.0 + l) / ((r + 1.0) * (2.0 * r - l))
                return r, c
        r += 0.5
    raise ValueError(f"no admissible regularization exponent below cap={cap}")
