"""Experiment configs, presets, orchestration and deterministic emission.

Configs are flat key-value files (TOML syntax) merged under CLI flag
overrides; every emitted artifact embeds the resolved config + seed, and
the JSON sidecar of a finished run is itself accepted as a config, so a
run can be reproduced byte-for-byte from its own header.  Timing goes to
stderr only, never into artifacts.
"""
from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

try:
    import tomllib  # python >= 3.11
except ModuleNotFoundError:
    import tomli as tomllib

from .diagnostics import (
    boxplot_stats,
    estimate_moments,
    lemma_probe_suite,
    moment_1d,
    probe_points,
    radial_second_moment,
)
from .potentials import (
    make_potential,
    finite_difference_gradient,
    validate_dissipativity,
    validate_growth,
)
from .sampler import (
    AllChainsExploded,
    InitSpec,
    RunConfig,
    RunResult,
    run,
    ula_divergence_demo,
)
from .taming import DriftScheme, SCHEME_KINDS, compute_step_size_bound

__all__ = [
    "UsageError",
    "ConfigError",
    "ExperimentConfig",
    "PRESETS",
    "load_config",
    "build_experiment",
    "cli_sample",
    "cli_benchmark",
    "cli_validate",
    "cli_oracle",
    "cli_demo_divergence",
]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_EXPLODED = 4


class UsageError(Exception):
    """Bad invocation: missing/unreadable/empty config, unknown preset."""


class ConfigError(Exception):
    """Well-formed input that violates a precondition."""


# config value "tula" selects the classic baseline
_SCHEME_ALIASES = {"tula": "tula_classic"}

_KNOWN_KEYS = {
    "potential", "dim", "scheme", "lambda", "reg_r",
    "n_chains", "n_iters", "burn_in", "thinning", "seed",
    "explosion_threshold", "init", "init_value", "init_mean",
    "init_variance", "n_runs", "schemes", "lambdas", "emit",
}

PRESETS: Dict[str, dict] = {
    # the d=100 double-well comparison at desk scale
    "double-well-benchmark": {
        "potential": "double_well_radial", "dim": 100,
        "scheme": "wd_tula", "lambda": 0.001,
        "n_chains": 1000, "n_iters": 100_000, "burn_in": 50_000,
        "thinning": 500, "init": "constant", "init_value": [200.0],
        "seed": 20240817, "n_runs": 20,
        "schemes": ["wd_tula", "tula"], "lambdas": [0.1, 0.01, 0.001],
        "emit": "csv,json,svg",
    },
    # plain ula on the same target: every chain blows up
    "ula-explodes": {
        "potential": "double_well_radial", "dim": 100,
        "scheme": "ula", "lambda": 0.1,
        "n_chains": 1000, "n_iters": 10_000, "burn_in": 5_000,
        "thinning": 100, "init": "constant", "init_value": [200.0],
        "seed": 20240817, "n_runs": 1, "emit": "csv,json",
    },
    # 1d target with a cheap quadrature ground truth
    "double-well-1d": {
        "potential": "double_well_1d", "dim": 1,
        "scheme": "wd_tula", "lambda": 0.001,
        "n_chains": 10_000, "n_iters": 10_000, "burn_in": 5_000,
        "thinning": 10, "init": "gaussian", "init_mean": 0.0,
        "init_variance": 1.0, "seed": 20240817, "n_runs": 1,
        "emit": "csv,json",
    },
    # second-moment blow-up of ula on the cubic potential
    "divergence-demo": {
        "potential": "cubic_demo", "dim": 1,
        "scheme": "ula", "lambda": 0.01,
        "n_chains": 100_000, "n_iters": 100, "burn_in": 0,
        "thinning": 1, "init": "gaussian", "init_mean": 0.0,
        "init_variance": 400.0, "seed": 20240817, "n_runs": 1,
        "emit": "csv,json,svg",
    },
}


def load_config(path) -> dict:
    """Read a flat TOML config, or the `config` block of an emitted JSON sidecar."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as e:
        raise UsageError(f"unreadable config {p}: {e}") from e
    if not raw.strip():
        raise UsageError(f"empty config file {p}")
    try:
        if p.suffix == ".json":
            obj = json.loads(raw.decode("utf-8"))
            data = obj.get("config", obj) if isinstance(obj, dict) else None
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as e:
        raise UsageError(f"unreadable config {p}: {e}") from e
    if not isinstance(data, dict) or not data:
        raise UsageError(f"config {p} holds no key-value table")
    return dict(data)


@dataclass
class ExperimentConfig:
    """Resolved experiment: potential + scheme + run budget + emission plan."""

    potential: str
    lam: float
    n_chains: int
    n_iters: int
    seed: int
    dim: Optional[int] = None
    scheme: str = "wd_tula"
    reg_r: Optional[float] = None
    burn_in: Optional[int] = None
    thinning: int = 1
    explosion_threshold: float = 1e100
    init: str = "gaussian"
    init_value: Optional[list] = None
    init_mean: float = 0.0
    init_variance: float = 1.0
    n_runs: int = 1
    schemes: Tuple[str, ...] = ("wd_tula", "tula_classic")
    lambdas: Tuple[float, ...] = (0.1, 0.01, 0.001)
    emit: Tuple[str, ...] = ("csv", "json")

    def make_spec(self):
        try:
            return make_potential(self.potential, self.dim)
        except (KeyError, ValueError) as e:
            raise ConfigError(str(e)) from e

    def make_scheme(self, kind: Optional[str] = None, lam: Optional[float] = None) -> DriftScheme:
        try:
            return DriftScheme(
                kind=kind or self.scheme, lam=lam if lam is not None else self.lam,
                reg_r=self.reg_r,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def make_run_config(self, spec, seed: Optional[int] = None,
                        lam: Optional[float] = None) -> RunConfig:
        try:
            if self.init == "constant":
                v = np.asarray(self.init_value, dtype=float).ravel()
                if v.size > spec.dim:
                    raise ValueError(
                        f"init_value has {v.size} entries for dim {spec.dim}"
                    )
                # init_value lists the leading coordinates; the rest are zero,
                # so [200.0] on a 100-dim target starts at 200 along axis one
                vec = np.zeros(spec.dim)
                vec[: v.size] = v
                init = InitSpec.constant(vec)
            else:
                init = InitSpec.gaussian(self.init_mean, self.init_variance)
            return RunConfig(
                n_chains=self.n_chains,
                n_iters=self.n_iters,
                lam=lam if lam is not None else self.lam,
                init=init,
                seed=seed if seed is not None else self.seed,
                burn_in=self.burn_in,
                thinning=self.thinning,
                explosion_threshold=self.explosion_threshold,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def echo(self) -> dict:
        """The reproducibility header embedded in every artifact."""
        return {
            "potential": self.potential,
            "dim": self.dim,
            "scheme": self.scheme,
            "lambda": self.lam,
            "reg_r": self.reg_r,
            "n_chains": self.n_chains,
            "n_iters": self.n_iters,
            "burn_in": self.burn_in,
            "thinning": self.thinning,
            "seed": self.seed,
            "explosion_threshold": self.explosion_threshold,
            "init": self.init,
            "init_value": self.init_value,
            "init_mean": self.init_mean,
            "init_variance": self.init_variance,
            "n_runs": self.n_runs,
            "schemes": list(self.schemes),
            "lambdas": list(self.lambdas),
            "emit": ",".join(self.emit),
        }


def _coerce_emit(value) -> Tuple[str, ...]:
    if isinstance(value, str):
        parts = tuple(s.strip() for s in value.split(",") if s.strip())
    else:
        parts = tuple(str(s) for s in value)
    bad = [p for p in parts if p not in ("csv", "json", "svg")]
    if bad:
        raise ConfigError(f"unknown emit formats {bad}; choose from csv,json,svg")
    return parts


def _scheme_name(value: str) -> str:
    name = _SCHEME_ALIASES.get(value, value)
    if name not in SCHEME_KINDS:
        raise ConfigError(
            f"unknown scheme {value!r}; choose from {('ula', 'tula', 'wd_tula', 'reg_tula')}"
        )
    return name


def build_experiment(
    preset: Optional[str] = None,
    config_path=None,
    overrides: Optional[dict] = None,
) -> ExperimentConfig:
    """Merge preset < config file < CLI overrides into one resolved config."""
    merged: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise UsageError(
                f"unknown preset {preset!r}; available: {sorted(PRESETS)}"
            )
        merged.update(PRESETS[preset])
    if config_path is not None:
        merged.update(load_config(config_path))
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    if not merged:
        raise UsageError("no configuration given; pass --preset and/or --config")

    unknown = set(merged) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    missing = [k for k in ("potential", "lambda", "n_chains", "n_iters", "seed")
               if k not in merged]
    if missing:
        raise ConfigError(f"missing required config keys {missing}")

    try:
        cfg = ExperimentConfig(
            potential=str(merged["potential"]),
            dim=int(merged["dim"]) if merged.get("dim") is not None else None,
            scheme=_scheme_name(str(merged.get("scheme", "wd_tula"))),
            lam=float(merged["lambda"]),
            reg_r=float(merged["reg_r"]) if merged.get("reg_r") is not None else None,
            n_chains=int(merged["n_chains"]),
            n_iters=int(merged["n_iters"]),
            burn_in=int(merged["burn_in"]) if merged.get("burn_in") is not None else None,
            thinning=int(merged.get("thinning", 1)),
            seed=int(merged["seed"]),
            explosion_threshold=float(merged.get("explosion_threshold", 1e100)),
            init=str(merged.get("init", "gaussian")),
            init_value=list(np.atleast_1d(merged["init_value"]).astype(float))
            if merged.get("init_value") is not None else None,
            init_mean=float(merged.get("init_mean", 0.0)),
            init_variance=float(merged.get("init_variance", 1.0)),
            n_runs=int(merged.get("n_runs", 1)),
            schemes=tuple(_scheme_name(str(s)) for s in merged.get(
                "schemes", ["wd_tula", "tula"])),
            lambdas=tuple(float(v) for v in merged.get("lambdas", [0.1, 0.01, 0.001])),
            emit=_coerce_emit(merged.get("emit", "csv,json")),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad config value: {e}") from e
    if cfg.init not in ("constant", "gaussian"):
        raise ConfigError(f"init must be constant or gaussian, got {cfg.init!r}")
    if cfg.init == "constant" and cfg.init_value is None:
        raise ConfigError("init = constant requires init_value")
    if cfg.n_runs < 1:
        raise ConfigError(f"n_runs must be >= 1, got {cfg.n_runs}")
    return cfg


# ---------------------------------------------------------------- emission

def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)


def _flt(v) -> float:
    v = float(v)
    return v


def _quantile_summary(steps: np.ndarray) -> dict:
    if steps.size == 0:
        return {"count": 0}
    qs = np.percentile(steps, [0, 25, 50, 75, 100])
    return {
        "count": int(steps.size),
        "min": int(qs[0]), "q1": _flt(qs[1]), "median": _flt(qs[2]),
        "q3": _flt(qs[3]), "max": int(qs[4]),
    }


def write_archive_csv(path: Path, res: RunResult) -> None:
    """chain_id, step, x_0..x_{d-1}; chain-major, step-ascending."""
    S, C, d = res.archive.shape
    rows = np.empty((C * S, d + 2))
    rows[:, 0] = np.repeat(np.arange(C), S)
    rows[:, 1] = np.tile(res.archive_steps, C)
    rows[:, 2:] = res.archive.transpose(1, 0, 2).reshape(C * S, d)
    header = "chain_id,step," + ",".join(f"x_{i}" for i in range(d))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(header + "\n")
        np.savetxt(f, rows, fmt=["%d", "%d"] + ["%.17g"] * d, delimiter=",")


def sidecar_dict(cfg: ExperimentConfig, res: RunResult) -> dict:
    return {
        "artifact": "run-sidecar",
        "config": cfg.echo(),
        "backend": res.backend,
        "results": {
            "n_exploded": int(res.exploded.sum()),
            "explosion_steps": _quantile_summary(
                res.explosion_step[res.explosion_step >= 0]
            ),
            "archive_shape": list(res.archive.shape),
            "archive_steps": [int(s) for s in res.archive_steps],
            "trajectory": {
                "steps": [int(s) for s in res.traj_steps],
                "mean_sq": [_flt(v) for v in res.traj_mean_sq],
                "n_exploded": [int(v) for v in res.traj_n_exploded],
            },
        },
    }


def moment_dict(report) -> dict:
    return {
        "per_coordinate_m2": [_flt(v) for v in report.per_coordinate_m2],
        "per_coordinate_se": [_flt(v) for v in report.per_coordinate_se],
        "aggregate_m2": _flt(report.aggregate_m2),
        "aggregate_se": _flt(report.aggregate_se),
        "higher": {str(p): _flt(v) for p, v in report.higher.items()},
        "higher_se": {str(p): _flt(v) for p, v in report.higher_se.items()},
        "exp_moment": _flt(report.exp_moment),
        "exp_moment_se": _flt(report.exp_moment_se),
        "mu": _flt(report.mu),
        "exponent": _flt(report.exponent),
        "n_chains_live": report.n_chains_live,
        "n_chains_exploded": report.n_chains_exploded,
        "n_samples": report.n_samples,
        "spread": report.spread,
    }


def _oracle_m2(spec) -> Optional[float]:
    if spec.radial_factor is None:
        return None
    e1 = np.zeros(spec.dim)

    def exponent(r: float) -> float:
        e1[0] = r
        return -float(spec.value(e1))

    return radial_second_moment(spec.dim, exponent)


def _mpl():
    import matplotlib

    matplotlib.use("Agg", force=True)
    matplotlib.rcParams["svg.hashsalt"] = "langtame"
    import matplotlib.pyplot as plt

    return plt


def _savefig(fig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})


# ---------------------------------------------------------------- commands

def cli_sample(cfg: ExperimentConfig, out_dir) -> int:
    """One run; emits archive.csv, run.json, moments.json (per emit flags)."""
    out = Path(out_dir)
    spec = cfg.make_spec()
    scheme = cfg.make_scheme()
    rc = cfg.make_run_config(spec)
    try:
        res = run(spec, scheme, rc)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    except AllChainsExploded as e:
        if "json" in cfg.emit:
            _write(out / "explosion.json", _json_bytes({
                "artifact": "explosion-report",
                "config": cfg.echo(),
                "error": str(e),
                "explosion_steps": _quantile_summary(e.explosion_step),
                "n_iters_done": e.n_iters_done,
            }))
        print(f"all chains exploded: {e}", file=sys.stderr)
        return EXIT_EXPLODED

    report = estimate_moments(res.archive, ps=(2,), exploded=res.exploded)
    if "csv" in cfg.emit:
        write_archive_csv(out / "archive.csv", res)
    if "json" in cfg.emit:
        _write(out / "run.json", _json_bytes(sidecar_dict(cfg, res)))
        oracle = _oracle_m2(spec)
        mj = {
            "artifact": "moment-report",
            "config": cfg.echo(),
            "report": moment_dict(report),
        }
        if oracle is not None:
            mj["oracle"] = {
                "per_coordinate_m2": _flt(oracle),
                "abs_error_first_coordinate": _flt(
                    abs(report.per_coordinate_m2[0] - oracle)
                ),
            }
        _write(out / "moments.json", _json_bytes(mj))
    if "svg" in cfg.emit:
        plt = _mpl()
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(res.traj_steps, res.traj_mean_sq)
        ax.set_xlabel("step")
        ax.set_ylabel("mean |x|^2 over live chains")
        ax.set_yscale("log")
        _savefig(fig, out / "trajectory.svg")
        plt.close(fig)
    print(
        f"{cfg.potential} {cfg.scheme} lambda={cfg.lam}: "
        f"aggregate_m2={report.aggregate_m2:.6g}, "
        f"exploded={report.n_chains_exploded}/{cfg.n_chains}"
    )
    return EXIT_OK


def _cell_seed(root_seed: int, cell_index: int, run_index: int) -> int:
    ss = np.random.SeedSequence(entropy=root_seed, spawn_key=(cell_index, run_index))
    return int(ss.generate_state(1, np.uint64)[0])


def cli_benchmark(cfg: ExperimentConfig, out_dir) -> int:
    """n_runs seeded runs per (scheme, lambda) cell; boxplot stats + SVG."""
    out = Path(out_dir)
    spec = cfg.make_spec()
    cells = [(s, lam) for s in cfg.schemes for lam in cfg.lambdas]
    estimates: Dict[Tuple[str, float], list] = {c: [] for c in cells}
    for ci, (skind, lam) in enumerate(cells):
        scheme = cfg.make_scheme(kind=skind, lam=lam)
        for rj in range(cfg.n_runs):
            seed = _cell_seed(cfg.seed, ci, rj)
            rc = cfg.make_run_config(spec, seed=seed, lam=lam)
            try:
                res = run(spec, scheme, rc)
                est = float(estimate_moments(
                    res.archive, ps=(), exploded=res.exploded
                ).per_coordinate_m2[0])
            except ValueError as e:
                raise ConfigError(str(e)) from e
            except AllChainsExploded:
                est = math.nan   # recorded, not fatal: a cell may legitimately blow up
            estimates[(skind, lam)].append(est)
            print(
                f"cell {skind} lambda={lam} run {rj}: E[x1^2] ~ {est:.6g}",
                file=sys.stderr,
            )

    oracle = _oracle_m2(spec)
    lines_bp = ["run_id,q1,median,q3,lo_whisker,hi_whisker"]
    lines_est = ["scheme,lambda,run_index,seed,estimate"]
    stats_by_cell = {}
    for ci, (skind, lam) in enumerate(cells):
        vals = np.asarray(estimates[(skind, lam)])
        for rj, v in enumerate(vals):
            lines_est.append(
                f"{skind},{lam!r},{rj},{_cell_seed(cfg.seed, ci, rj)},{float(v)!r}"
            )
        if np.isfinite(vals).any():
            st = boxplot_stats(vals)
        else:  # every run of this cell exploded
            st = {k: math.nan for k in
                  ("q1", "median", "q3", "lo_whisker", "hi_whisker")}
        stats_by_cell[(skind, lam)] = st
        lines_bp.append(
            f"{skind}:{lam!r},{st['q1']!r},{st['median']!r},"
            f"{st['q3']!r},{st['lo_whisker']!r},{st['hi_whisker']!r}"
        )
    if "csv" in cfg.emit:
        _write(out / "boxplot.csv", ("\n".join(lines_bp) + "\n").encode())
        _write(out / "estimates.csv", ("\n".join(lines_est) + "\n").encode())
    if "json" in cfg.emit:
        _write(out / "benchmark.json", _json_bytes({
            "artifact": "benchmark-report",
            "config": cfg.echo(),
            "oracle_per_coordinate_m2": _flt(oracle) if oracle is not None else None,
            "cells": {
                f"{s}:{lam:.17g}": {
                    "estimates": [_flt(v) for v in estimates[(s, lam)]],
                    "spread": stats_by_cell[(s, lam)],
                }
                for (s, lam) in cells
            },
        }))
    if "svg" in cfg.emit:
        plt = _mpl()
        fig, ax = plt.subplots(figsize=(8, 4.5))
        bxp = []
        for (s, lam) in cells:
            st = stats_by_cell[(s, lam)]
            bxp.append({
                "label": f"{s}\n{lam:g}",
                "med": st["median"], "q1": st["q1"], "q3": st["q3"],
                "whislo": st["lo_whisker"], "whishi": st["hi_whisker"],
            })
        ax.bxp(bxp, showfliers=False)
        if oracle is not None:
            ax.axhline(oracle, linestyle="--", linewidth=1.0)
        ax.set_ylabel("estimated E[x_1^2]")
        _savefig(fig, out / "boxplot.svg")
        plt.close(fig)
    return EXIT_OK


def cli_validate(cfg: ExperimentConfig, out_dir=None,
                 n_points: int = 2000) -> int:
    """Assumption margins, inequality slacks and the step-size ceiling."""
    spec = cfg.make_spec()
    scheme = cfg.make_scheme()
    pts = probe_points(spec.dim, n_points, seed=cfg.seed, half_width=10.0)
    checks = []

    fd_err = 0.0
    small = probe_points(spec.dim, 100, seed=cfg.seed + 1, half_width=10.0)
    for x in small:
        g = spec.gradient(x)
        fd = finite_difference_gradient(spec, x, 1e-6)
        denom = max(float(np.linalg.norm(g)), 1.0)
        fd_err = max(fd_err, float(np.linalg.norm(fd - g)) / denom)
    checks.append(("gradient_consistency", fd_err <= 1e-6, f"max rel err {fd_err:.3g}"))

    diss = validate_dissipativity(spec, pts)
    checks.append((
        "dissipativity", diss.passed,
        f"margin {diss.margin:.6g} at |x|={np.linalg.norm(diss.argmin):.3g}",
    ))
    grow = validate_growth(spec, pts)
    checks.append((
        "gradient_growth", grow.passed,
        f"margin {grow.margin:.6g} at |x|={np.linalg.norm(grow.argmin):.3g}",
    ))

    probe = lemma_probe_suite(spec, scheme, pts)
    for e in probe.entries:
        checks.append((
            f"probe.{e.name}", e.passed,
            f"worst slack {e.worst_slack:.6g}, {e.n_violations} violations",
        ))

    bound = compute_step_size_bound(spec)
    lam_ok = cfg.lam <= bound.computable_bound
    report = {
        "artifact": "validation-report",
        "config": cfg.echo(),
        "checks": {
            name: {"passed": bool(ok), "detail": detail}
            for name, ok, detail in checks
        },
        "step_size_bound": {
            "computable_bound": _flt(bound.computable_bound),
            "M": _flt(bound.M),
            "mu": _flt(bound.mu),
            "C_star": _flt(bound.C_star),
            "omitted_terms": list(bound.omitted_terms),
            "lambda": _flt(cfg.lam),
            "lambda_within_bound": bool(lam_ok),
        },
    }
    for name, ok, detail in checks:
        print(f"[{'pass' if ok else 'FAIL'}] {name}: {detail}")
    print(
        f"computable step-size ceiling {bound.computable_bound:.6g} "
        f"(M={bound.M:.6g}, mu={bound.mu:.6g}, C*={bound.C_star:.6g})"
    )
    for term in bound.omitted_terms:
        print(f"warning: ceiling omits analysis-constant term {term}")
    if not lam_ok:
        print(
            f"warning: lambda={cfg.lam} exceeds the computable ceiling "
            f"{bound.computable_bound:.6g} (sufficient, not necessary)"
        )
    if out_dir is not None and "json" in cfg.emit:
        _write(Path(out_dir) / "validate.json", _json_bytes(report))
    return EXIT_OK


def cli_oracle(cfg: ExperimentConfig, out_dir=None) -> int:
    """Quadrature ground truth for the configured potential."""
    spec = cfg.make_spec()
    if spec.radial_factor is not None:
        m2 = _oracle_m2(spec)
    elif spec.dim == 1:
        try:
            m2 = moment_1d(spec.value, 2)
        except ValueError as e:
            raise ConfigError(f"{spec.name}: {e}") from e
    else:
        raise ConfigError(
            f"{spec.name} is neither radial nor one-dimensional; no oracle available"
        )
    payload = {
        "artifact": "oracle-report",
        "potential": spec.name,
        "dim": spec.dim,
        "per_coordinate_m2": _flt(m2),
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    if out_dir is not None and "json" in cfg.emit:
        _write(Path(out_dir) / "oracle.json", _json_bytes(payload))
    return EXIT_OK


def cli_demo_divergence(cfg: ExperimentConfig, out_dir) -> int:
    """Run the second-moment blow-up demo and emit its trajectory."""
    out = Path(out_dir)
    rep = ula_divergence_demo(
        lam=cfg.lam, n_chains=cfg.n_chains, n_steps=cfg.n_iters, seed=cfg.seed
    )
    if "csv" in cfg.emit:
        lines = ["step,mean_sq,mean_sq_survivors,exploded_fraction"]
        for i, s in enumerate(rep.steps):
            lines.append(
                f"{int(s)},{float(rep.mean_sq[i])!r},"
                f"{float(rep.mean_sq_survivors[i])!r},"
                f"{float(rep.exploded_fraction[i])!r}"
            )
        _write(out / "divergence.csv", ("\n".join(lines) + "\n").encode())
    if "json" in cfg.emit:
        _write(out / "divergence.json", _json_bytes({
            "artifact": "divergence-report",
            "config": cfg.echo(),
            "initial_mean_sq": _flt(rep.mean_sq[0]),
            "final_mean_sq": _flt(rep.mean_sq[-1]),
            "final_exploded_fraction": _flt(rep.exploded_fraction[-1]),
        }))
    if "svg" in cfg.emit:
        plt = _mpl()
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.semilogy(rep.steps, rep.mean_sq, label="all chains (frozen held)")
        ax.semilogy(rep.steps, rep.mean_sq_survivors, label="survivors only")
        ax.set_xlabel("step")
        ax.set_ylabel("mean x^2")
        ax.legend()
        _savefig(fig, out / "divergence.svg")
        plt.close(fig)
    print(
        f"ula on the cubic target, lambda={cfg.lam}: mean x^2 grew "
        f"{rep.mean_sq[0]:.6g} -> {rep.mean_sq[-1]:.6g}; "
        f"{100.0 * rep.exploded_fraction[-1]:.1f}% of chains exploded"
    )
    return EXIT_OK
