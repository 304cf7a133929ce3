"""Blocked Euler-Maruyama update kernels: numba-jitted hot path, numpy fallback.

The chain update is theta <- theta - lam * drift(theta) + sqrt(2 lam) * xi.
For every catalog potential the drift is a scalar radial coefficient times
the position (the cubic demo is one-dimensional, so its drift x^2 = x0 * x
fits the same form), which lets a single kernel serve all schemes:

  pot codes     0 double well g(t) = t - 1, 1 gaussian g(t) = 1, 2 cubic g = x0
  scheme codes  0 ula, 1 tula_classic, 2 wd_tula, 3 reg_tula     (t = |x|^2)

A chain whose proposed step leaves |x|^2 <= threshold^2 territory (or turns
non-finite) reverts to its pre-step position, records the offending step
index and stays frozen; frozen positions therefore remain finite.

Backend selection: environment variable LANGTAME_BACKEND in {auto, numba,
numpy}; auto prefers numba when importable.  Both backends consume the
same pregenerated per-chain noise and are individually bit-deterministic;
they may differ from each other in the last ulp (summation order), so
determinism guarantees are per backend.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # degraded but functional: numpy fallback only
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


__all__ = [
    "HAS_NUMBA",
    "POT_CODES",
    "SCHEME_CODES",
    "KernelParams",
    "active_backend",
    "kernel_params",
    "advance_block",
]

POT_CODES = {"double_well": 0, "gaussian": 1, "cubic": 2}
SCHEME_CODES = {"ula": 0, "tula_classic": 1, "wd_tula": 2, "reg_tula": 3}

_BACKENDS = ("auto", "numba", "numpy")


def active_backend() -> str:
    """Resolve LANGTAME_BACKEND to the backend that will actually run."""
    choice = os.environ.get("LANGTAME_BACKEND", "auto").strip().lower()
    if choice not in _BACKENDS:
        raise ValueError(
            f"LANGTAME_BACKEND must be one of {_BACKENDS}, got {choice!r}"
        )
    if choice == "numba" and not HAS_NUMBA:
        raise RuntimeError("LANGTAME_BACKEND=numba but numba is not importable")
    if choice == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    return choice


@dataclass(frozen=True)
class KernelParams:
    """Scalar constants consumed by the update kernels."""

    pot: int
    scheme: int
    lam: float
    A: float
    rho_exp: float   # 1 - a/2; the radial split coefficient is A/(1+t)^rho_exp
    l: float         # growth exponent; wd taming denominator is 1 + sqrt(lam) t^l
    r: float         # regularization exponent (reg_tula only)
    reg_coef: float  # lam (2r+2)
    rp_half: float   # r + 1/2; reg taming denominator is 1 + sqrt(lam) t^rp_half
    sql: float       # sqrt(lam)
    sqln: float      # sqrt(2 lam), the noise scale
    thr2: float      # squared explosion threshold


def kernel_params(spec, scheme_kind: str, lam: float, reg_r: float,
                  explosion_threshold: float) -> KernelParams | None:
    """Map a catalog potential + scheme onto kernel codes; None if not kernelizable."""
    name = spec.name
    if name.startswith("double_well"):
        pot = POT_CODES["double_well"]
    elif name.startswith("gaussian"):
        pot = POT_CODES["gaussian"]
    elif name.startswith("cubic_demo"):
        pot = POT_CODES["cubic"]
    else:
        return None
    return KernelParams(
        pot=pot,
        scheme=SCHEME_CODES[scheme_kind],
        lam=lam,
        A=spec.diss_A,
        rho_exp=1.0 - spec.diss_a / 2.0,
        l=spec.growth_l,
        r=reg_r,
        reg_coef=lam * (2.0 * reg_r + 2.0),
        rp_half=reg_r + 0.5,
        sql=math.sqrt(lam),
        sqln=math.sqrt(2.0 * lam),
        thr2=explosion_threshold * explosion_threshold,
    )


@njit(cache=True)
def _coef_nb(t, x0, pot, scheme, lam, A, rho_exp, l, r, reg_coef, rp_half, sql):
    if pot == 0:
        g = t - 1.0
    elif pot == 1:
        g = 1.0
    else:
        g = x0
    if scheme == 0:
        return g
    if scheme == 1:
        return g / (1.0 + lam * abs(g) * math.sqrt(t))
    ar = A / (1.0 + t) ** rho_exp
    if scheme == 2:
        return ar + (g - ar) / (1.0 + sql * t**l)
    greg = g + reg_coef * t**r
    return ar + (greg - ar) / (1.0 + sql * t**rp_half)


@njit(cache=True)
def _advance_nb(pos, frozen, expl_step, noise, n_steps, step0,
                pot, scheme, lam, A, rho_exp, l, r, reg_coef, rp_half,
                sql, sqln, thr2):
    n_chains, d = pos.shape
    tmp = np.empty(d)
    for c in range(n_chains):
        if frozen[c]:
            continue
        for k in range(n_steps):
            t = 0.0
            for i in range(d):
                t += pos[c, i] * pos[c, i]
            coef = _coef_nb(t, pos[c, 0], pot, scheme, lam, A, rho_exp,
                            l, r, reg_coef, rp_half, sql)
            fac = 1.0 - lam * coef
            tn = 0.0
            for i in range(d):
                v = pos[c, i] * fac + sqln * noise[c, k, i]
                tmp[i] = v
                tn += v * v
            if not (tn <= thr2):  # catches > threshold, inf and nan
                frozen[c] = True
                expl_step[c] = step0 + k + 1
                break
            for i in range(d):
                pos[c, i] = tmp[i]


def _coef_np(t: np.ndarray, x0: np.ndarray, p: KernelParams) -> np.ndarray:
    if p.pot == 0:
        g = t - 1.0
    elif p.pot == 1:
        g = np.ones_like(t)
    else:
        g = x0
    if p.scheme == 0:
        return g
    if p.scheme == 1:
        return g / (1.0 + p.lam * np.abs(g) * np.sqrt(t))
    ar = p.A / (1.0 + t) ** p.rho_exp
    if p.scheme == 2:
        return ar + (g - ar) / (1.0 + p.sql * t**p.l)
    greg = g + p.reg_coef * t**p.r
    return ar + (greg - ar) / (1.0 + p.sql * t**p.rp_half)


def _advance_np(pos, frozen, expl_step, noise, n_steps, step0, p: KernelParams):
    # frozen chains ride along with garbage proposals that are never applied
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            t = np.einsum("ij,ij->i", pos, pos)
            coef = _coef_np(t, pos[:, 0], p)
            xn = pos * (1.0 - p.lam * coef)[:, None] + p.sqln * noise[:, k, :]
            tn = np.einsum("ij,ij->i", xn, xn)
            ok = tn <= p.thr2
            advance = ok & ~frozen
            boom = ~ok & ~frozen
            pos[advance] = xn[advance]
            if boom.any():
                frozen[boom] = True
                expl_step[boom] = step0 + k + 1


def advance_block(pos, frozen, expl_step, noise, n_steps: int, params: KernelParams,
                  step0: int, backend: str | None = None) -> None:
    """Advance all live chains n_steps in place, consuming noise[:, :n_steps, :]."""
    if backend is None:
        backend = active_backend()
    if backend == "numba":
        _advance_nb(pos, frozen, expl_step, noise, n_steps, step0,
                    params.pot, params.scheme, params.lam, params.A,
                    params.rho_exp, params.l, params.r, params.reg_coef,
                    params.rp_half, params.sql, params.sqln, params.thr2)
    else:
        _advance_np(pos, frozen, expl_step, noise, n_steps, step0, params)
