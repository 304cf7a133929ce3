"""Chain batches, the Euler-Maruyama step, and run orchestration.

Update rule: theta_{n+1} = theta_n - lam * drift(theta_n) + sqrt(2 lam) * xi,
xi a standard Gaussian d-vector drawn from the chain's own PCG64 stream
(spawned from a single SeedSequence, so runs are reproducible and chains
independent).  A proposed step whose norm exceeds the explosion threshold,
or turns non-finite, is rejected: the chain keeps its last finite position,
is flagged exploded and stops moving.

run() drives the jitted block kernel for catalog potentials and falls back
to per-chain em_step calls for user-supplied ones; both consume per-chain
noise in the same order, so the paths agree up to floating-point rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .kernels import active_backend, advance_block, kernel_params
from .potentials import PotentialSpec
from .taming import DriftScheme, drift_function

__all__ = [
    "InitSpec",
    "RunConfig",
    "ChainBatch",
    "AllChainsExploded",
    "RunResult",
    "DivergenceReport",
    "em_step",
    "run",
    "ula_divergence_demo",
]

# target ~64 MB of buffered noise per block
_NOISE_BUDGET = 8_000_000


@dataclass(frozen=True)
class InitSpec:
    """Initial distribution: a constant vector or an isotropic Gaussian."""

    kind: str
    value: Optional[np.ndarray] = None     # constant
    mean: Optional[np.ndarray] = None      # gaussian
    variance: Optional[float] = None       # gaussian

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "gaussian"):
            raise ValueError(f"init kind must be constant or gaussian, got {self.kind!r}")
        if self.kind == "constant":
            if self.value is None:
                raise ValueError("constant init requires value")
            if not np.all(np.isfinite(self.value)):
                raise ValueError("constant init value must be finite")
        else:
            if self.mean is None or self.variance is None:
                raise ValueError("gaussian init requires mean and variance")
            if not (self.variance > 0):
                raise ValueError(f"variance must be positive, got {self.variance}")
            if not np.all(np.isfinite(self.mean)):
                raise ValueError("gaussian init mean must be finite")

    @classmethod
    def constant(cls, value) -> "InitSpec":
        return cls(kind="constant", value=np.atleast_1d(np.asarray(value, dtype=float)))

    @classmethod
    def gaussian(cls, mean, variance: float) -> "InitSpec":
        return cls(
            kind="gaussian",
            mean=np.atleast_1d(np.asarray(mean, dtype=float)),
            variance=float(variance),
        )

    def _vector(self, arr: np.ndarray, dim: int, what: str) -> np.ndarray:
        if arr.size == 1:
            return np.full(dim, float(arr.reshape(-1)[0]))
        if arr.size != dim:
            raise ValueError(f"init {what} has size {arr.size}, expected {dim}")
        return np.asarray(arr, dtype=float).reshape(dim)

    def materialize(self, dim: int, streams: list) -> np.ndarray:
        """Draw (n_chains, dim) initial positions, one row per chain stream."""
        if self.kind == "constant":
            v = self._vector(self.value, dim, "value")
            return np.tile(v, (len(streams), 1))
        mu = self._vector(self.mean, dim, "mean")
        sd = math.sqrt(self.variance)
        pos = np.empty((len(streams), dim))
        for c, g in enumerate(streams):
            pos[c] = mu + sd * g.standard_normal(dim)
        return pos


@dataclass
class RunConfig:
    """Budget, step size, initialization and bookkeeping for one run."""

    n_chains: int
    n_iters: int
    lam: float
    init: InitSpec
    seed: int
    burn_in: Optional[int] = None          # defaults to n_iters // 2
    thinning: int = 1
    explosion_threshold: float = 1e100

    def __post_init__(self) -> None:
        if self.burn_in is None:
            self.burn_in = self.n_iters // 2
        if self.n_chains < 1 or self.n_iters < 1:
            raise ValueError("n_chains and n_iters must be >= 1")
        if not (0 <= self.burn_in < self.n_iters):
            raise ValueError(
                f"burn_in must satisfy 0 <= burn_in < n_iters, got {self.burn_in}"
            )
        if self.thinning < 1:
            raise ValueError(f"thinning must be >= 1, got {self.thinning}")
        if not (self.lam > 0) or not math.isfinite(self.lam):
            raise ValueError(f"lam must be a positive finite scalar, got {self.lam}")
        if not (self.explosion_threshold > 0):
            raise ValueError("explosion_threshold must be positive")


@dataclass
class ChainBatch:
    """Mutable state of n_chains parallel chains."""

    positions: np.ndarray                  # (n_chains, d), finite rows
    exploded: np.ndarray                   # (n_chains,) bool
    explosion_step: np.ndarray             # (n_chains,) int64, -1 while alive
    rng_streams: list
    explosion_threshold: float
    step_count: int = 0

    @classmethod
    def from_config(cls, spec: PotentialSpec, config: RunConfig) -> "ChainBatch":
        streams = [
            np.random.Generator(np.random.PCG64(ss))
            for ss in np.random.SeedSequence(config.seed).spawn(config.n_chains)
        ]
        positions = config.init.materialize(spec.dim, streams)
        n = config.n_chains
        return cls(
            positions=positions,
            exploded=np.zeros(n, dtype=bool),
            explosion_step=np.full(n, -1, dtype=np.int64),
            rng_streams=streams,
            explosion_threshold=config.explosion_threshold,
        )

    @property
    def n_chains(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


def em_step(
    batch: ChainBatch,
    drift: Callable[[np.ndarray], np.ndarray],
    lam: float,
    noise: Optional[np.ndarray] = None,
) -> ChainBatch:
    """Advance every live chain one step; reference implementation.

    noise, when given, must be (n_chains, d) and replaces the per-chain
    stream draws (pin it to zero to test the drift part in isolation).
    """
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    sqln = math.sqrt(2.0 * lam)
    thr2 = batch.explosion_threshold**2
    with np.errstate(over="ignore", invalid="ignore"):
        for c in range(batch.n_chains):
            if batch.exploded[c]:
                continue
            xi = noise[c] if noise is not None else batch.rng_streams[c].standard_normal(batch.dim)
            x = batch.positions[c]
            xn = x - lam * np.asarray(drift(x), dtype=float) + sqln * xi
            tn = float(np.dot(xn, xn))
            if not (tn <= thr2):  # catches > threshold, inf and nan
                batch.exploded[c] = True
                batch.explosion_step[c] = batch.step_count + 1
            else:
                batch.positions[c] = xn
    batch.step_count += 1
    return batch


class AllChainsExploded(RuntimeError):
    """Every chain exploded before the end of burn-in."""

    def __init__(self, message: str, explosion_step: np.ndarray, n_iters_done: int):
        super().__init__(message)
        self.explosion_step = explosion_step
        self.n_iters_done = n_iters_done


@dataclass
class RunResult:
    """Archived samples plus the running diagnostics of one run."""

    spec_name: str
    scheme: DriftScheme
    config: RunConfig
    backend: str
    archive: np.ndarray            # (n_slots, n_chains, d): post-burn-in thinned states
    archive_steps: np.ndarray      # (n_slots,) step index of each slot
    traj_steps: np.ndarray         # every thinning-th step from 0
    traj_mean_sq: np.ndarray       # running mean |theta_n|^2 over live chains (nan if none)
    traj_n_exploded: np.ndarray    # exploded-chain count at each trajectory step
    exploded: np.ndarray
    explosion_step: np.ndarray
    final_positions: np.ndarray


def _next_boundary(n: int, thinning: int, burn_in: int, n_iters: int) -> int:
    next_traj = (n // thinning + 1) * thinning
    if n < burn_in:
        next_arch = burn_in
    else:
        next_arch = burn_in + ((n - burn_in) // thinning + 1) * thinning
    return min(next_traj, next_arch, n_iters)


def run(spec: PotentialSpec, scheme: DriftScheme, config: RunConfig) -> RunResult:
    """Execute the full sampling run; deterministic given config.seed."""
    if spec.name.startswith("cubic_demo") and scheme.kind != "ula":
        raise ValueError(
            "cubic_demo fails the dissipativity envelope the tamed schemes "
            "rely on; only the plain ula baseline admits it"
        )
    if scheme.lam is not None and scheme.lam != config.lam:
        raise ValueError(
            f"scheme.lam={scheme.lam} disagrees with config.lam={config.lam}"
        )
    r = scheme.resolve_r(spec) if scheme.kind == "reg_tula" else 1.0
    params = kernel_params(
        spec, scheme.kind, config.lam, r, config.explosion_threshold
    )
    backend = active_backend() if params is not None else "python"

    batch = ChainBatch.from_config(spec, config)
    C, d = config.n_chains, spec.dim
    burn_in, thin, n_iters = config.burn_in, config.thinning, config.n_iters

    n_slots = (n_iters - burn_in) // thin + 1
    archive = np.empty((n_slots, C, d))
    archive_steps = np.empty(n_slots, dtype=np.int64)
    traj_steps: list[int] = []
    traj_mean_sq: list[float] = []
    traj_n_exploded: list[int] = []
    slot = 0

    def record(n: int) -> None:
        nonlocal slot
        if n % thin == 0:
            live = ~batch.exploded
            if live.any():
                x = batch.positions[live]
                msq = float(np.einsum("ij,ij->i", x, x).mean())
            else:
                msq = math.nan
            traj_steps.append(n)
            traj_mean_sq.append(msq)
            traj_n_exploded.append(int(batch.exploded.sum()))
        if n >= burn_in and (n - burn_in) % thin == 0:
            archive[slot] = batch.positions
            archive_steps[slot] = n
            slot += 1

    def abort_check() -> None:
        if batch.exploded.all() and batch.explosion_step.max() <= burn_in:
            raise AllChainsExploded(
                f"all {C} chains exploded by step {int(batch.explosion_step.max())}, "
                f"before burn-in ended at step {burn_in}",
                explosion_step=batch.explosion_step.copy(),
                n_iters_done=batch.step_count,
            )

    record(0)
    if params is None:
        dfn = drift_function(spec, scheme, config.lam)
        for n in range(1, n_iters + 1):
            em_step(batch, dfn, config.lam)
            record(n)
            abort_check()
    else:
        max_block = max(1, _NOISE_BUDGET // (C * d))
        noise = np.empty((C, max_block, d))
        n = 0
        while n < n_iters:
            B = min(max_block, _next_boundary(n, thin, burn_in, n_iters) - n)
            if not batch.exploded.all():
                for c in range(C):
                    if not batch.exploded[c]:
                        batch.rng_streams[c].standard_normal(out=noise[c, :B])
                advance_block(
                    batch.positions, batch.exploded, batch.explosion_step,
                    noise, B, params, step0=n, backend=backend,
                )
            n += B
            batch.step_count = n
            record(n)
            abort_check()

    return RunResult(
        spec_name=spec.name,
        scheme=scheme,
        config=config,
        backend=backend,
        archive=archive,
        archive_steps=archive_steps,
        traj_steps=np.asarray(traj_steps, dtype=np.int64),
        traj_mean_sq=np.asarray(traj_mean_sq),
        traj_n_exploded=np.asarray(traj_n_exploded, dtype=np.int64),
        exploded=batch.exploded.copy(),
        explosion_step=batch.explosion_step.copy(),
        final_positions=batch.positions.copy(),
    )


@dataclass
class DivergenceReport:
    """Per-step second-moment trajectory of plain ula on the cubic potential."""

    lam: float
    n_chains: int
    steps: np.ndarray
    mean_sq: np.ndarray              # all chains, exploded ones held at last finite value
    mean_sq_survivors: np.ndarray    # chains still live at each step (nan once none)
    exploded_fraction: np.ndarray


def ula_divergence_demo(
    lam: float, n_chains: int, n_steps: int, seed: int
) -> DivergenceReport:
    """Second-moment blow-up of ula on u(x) = x^3/3 from X_0 ~ N(0, 4/lam).

    The all-chain estimate freezes exploded chains at their last finite
    position, so the trajectory keeps the accumulated growth instead of
    being biased down by survivorship; the survivors-only curve is reported
    alongside for comparison.
    """
    from .potentials import cubic_demo

    config = RunConfig(
        n_chains=n_chains,
        n_iters=n_steps,
        lam=lam,
        init=InitSpec.gaussian(0.0, 4.0 / lam),
        seed=seed,
        burn_in=0,
        thinning=1,
    )
    res = run(cubic_demo(), DriftScheme("ula"), config)
    x2 = res.archive[:, :, 0] ** 2                       # (n_steps+1, n_chains)
    steps = res.archive_steps
    expl = res.explosion_step
    alive = (expl[None, :] < 0) | (expl[None, :] > steps[:, None])
    n_alive = alive.sum(axis=1)
    with np.errstate(invalid="ignore"):
        surv = np.where(n_alive > 0, (x2 * alive).sum(axis=1) / n_alive, np.nan)
    return DivergenceReport(
        lam=lam,
        n_chains=n_chains,
        steps=steps,
        mean_sq=x2.mean(axis=1),
        mean_sq_survivors=surv,
        exploded_fraction=1.0 - n_alive / n_chains,
    )
