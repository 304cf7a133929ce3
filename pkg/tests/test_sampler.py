"""Chain batches, em_step semantics, run orchestration and the divergence demo."""

import dataclasses
import math

import numpy as np
import pytest

from langtame.diagnostics import estimate_moments
from langtame.potentials import cubic_demo, double_well_radial, gaussian
from langtame.sampler import (
    AllChainsExploded,
    ChainBatch,
    InitSpec,
    RunConfig,
    em_step,
    run,
    ula_divergence_demo,
)
from langtame.taming import DriftScheme


def _manual_batch(positions, threshold=1e100, seed=0) -> ChainBatch:
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    n = pos.shape[0]
    streams = [
        np.random.Generator(np.random.PCG64(ss))
        for ss in np.random.SeedSequence(seed).spawn(n)
    ]
    return ChainBatch(
        positions=pos.copy(),
        exploded=np.zeros(n, dtype=bool),
        explosion_step=np.full(n, -1, dtype=np.int64),
        rng_streams=streams,
        explosion_threshold=threshold,
    )


class TestEmStep:
    def test_drift_only_update(self):
        # x - lam * x = 2.0 - 0.1 * 2.0 with the noise pinned to zero
        batch = _manual_batch([[2.0]])
        em_step(batch, lambda x: x, 0.1, noise=np.zeros((1, 1)))
        assert batch.positions[0, 0] == pytest.approx(1.8, abs=1e-15)
        assert batch.step_count == 1

    def test_noise_only_update(self):
        batch = _manual_batch([[1.0]])
        em_step(batch, lambda x: np.zeros(1), 0.5, noise=np.array([[2.0]]))
        assert batch.positions[0, 0] == pytest.approx(1.0 + math.sqrt(1.0) * 2.0)

    def test_zero_drift_zero_noise_is_identity(self):
        batch = _manual_batch([[0.3, -0.7]])
        em_step(batch, lambda x: np.zeros(2), 0.01, noise=np.zeros((1, 2)))
        np.testing.assert_array_equal(batch.positions, [[0.3, -0.7]])

    def test_explosion_freezes_at_last_finite_position(self):
        batch = _manual_batch([[1.0], [5.0]], threshold=20.0)
        em_step(batch, lambda x: -x * 100.0, 0.1, noise=np.zeros((2, 1)))
        # chain 1 proposes 11 * 5 = 55 > 20 and must revert; chain 0 stays at 11
        assert not batch.exploded[0] and batch.exploded[1]
        assert batch.positions[1, 0] == 5.0
        assert batch.explosion_step[1] == 1
        # frozen chains do not move afterwards
        em_step(batch, lambda x: -x * 100.0, 0.1, noise=np.zeros((2, 1)))
        assert batch.positions[1, 0] == 5.0
        assert batch.explosion_step[1] == 1

    def test_rejects_nonpositive_lam(self):
        with pytest.raises(ValueError):
            em_step(_manual_batch([[0.0]]), lambda x: x, 0.0)


class TestInitSpec:
    def test_constant_scalar_broadcasts(self):
        batch_pos = InitSpec.constant(2.5).materialize(3, _manual_batch([[0.0]]).rng_streams)
        np.testing.assert_array_equal(batch_pos, [[2.5, 2.5, 2.5]])

    def test_constant_vector_used_exactly(self):
        init = InitSpec.constant([1.0, 2.0])
        pos = init.materialize(2, _manual_batch([[0.0]]).rng_streams)
        np.testing.assert_array_equal(pos, [[1.0, 2.0]])

    def test_constant_wrong_size_rejected(self):
        init = InitSpec.constant([1.0, 2.0, 3.0])
        with pytest.raises(ValueError, match="size 3"):
            init.materialize(2, _manual_batch([[0.0]]).rng_streams)

    def test_gaussian_moments(self):
        streams = _manual_batch(np.zeros((4000, 1)), seed=3).rng_streams
        pos = InitSpec.gaussian(1.0, 4.0).materialize(1, streams)
        assert pos.mean() == pytest.approx(1.0, abs=0.15)
        assert pos.var() == pytest.approx(4.0, rel=0.1)

    def test_validation(self):
        with pytest.raises(ValueError):
            InitSpec.gaussian(0.0, -1.0)
        with pytest.raises(ValueError):
            InitSpec.constant([np.inf])
        with pytest.raises(ValueError):
            InitSpec(kind="uniform")


class TestRunConfigValidation:
    def test_burn_in_defaults_to_half(self):
        cfg = RunConfig(n_chains=1, n_iters=100, lam=0.1, init=InitSpec.constant(0.0), seed=0)
        assert cfg.burn_in == 50

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"burn_in": 100},
            {"thinning": 0},
            {"lam": -0.1},
            {"lam": float("inf")},
            {"explosion_threshold": 0.0},
            {"n_chains": 0},
        ],
    )
    def test_rejects_bad_fields(self, kwargs):
        base = dict(n_chains=1, n_iters=100, lam=0.1, init=InitSpec.constant(0.0), seed=0)
        with pytest.raises(ValueError):
            RunConfig(**{**base, **kwargs})


def _small_config(**over) -> RunConfig:
    base = dict(
        n_chains=4,
        n_iters=200,
        lam=0.01,
        init=InitSpec.constant([1.0, -1.0]),
        seed=99,
        burn_in=100,
        thinning=10,
    )
    return RunConfig(**{**base, **over})


class TestRunOrchestration:
    def test_repeated_runs_bit_identical(self):
        spec = double_well_radial(2)
        a = run(spec, DriftScheme("wd_tula"), _small_config())
        b = run(spec, DriftScheme("wd_tula"), _small_config())
        assert a.archive.tobytes() == b.archive.tobytes()
        assert a.traj_mean_sq.tobytes() == b.traj_mean_sq.tobytes()

    def test_numpy_backend_also_deterministic(self, monkeypatch):
        monkeypatch.setenv("LANGTAME_BACKEND", "numpy")
        spec = double_well_radial(2)
        a = run(spec, DriftScheme("wd_tula"), _small_config())
        b = run(spec, DriftScheme("wd_tula"), _small_config())
        assert a.backend == "numpy"
        assert a.archive.tobytes() == b.archive.tobytes()

    def test_chain_prefix_independent_of_batch_size(self):
        """Adding chains must not perturb existing ones: one stream per chain."""
        spec = double_well_radial(2)
        small = run(spec, DriftScheme("wd_tula"), _small_config(n_chains=3))
        big = run(spec, DriftScheme("wd_tula"), _small_config(n_chains=6))
        np.testing.assert_array_equal(big.archive[:, :3, :], small.archive)

    def test_kernel_and_generic_paths_agree(self):
        """A renamed catalog potential falls back to em_step; same noise, same law."""
        spec = double_well_radial(2)
        bespoke = dataclasses.replace(spec, name="bespoke_double_well")
        cfg = _small_config(n_chains=3, n_iters=60, burn_in=20, thinning=5)
        fast = run(spec, DriftScheme("wd_tula"), cfg)
        slow = run(bespoke, DriftScheme("wd_tula"), cfg)
        assert fast.backend in ("numba", "numpy")
        assert slow.backend == "python"
        np.testing.assert_allclose(slow.archive, fast.archive, rtol=1e-12, atol=1e-12)

    def test_recording_schedules(self):
        cfg = _small_config(n_chains=2, n_iters=10, burn_in=4, thinning=3)
        res = run(double_well_radial(2), DriftScheme("wd_tula"), cfg)
        np.testing.assert_array_equal(res.archive_steps, [4, 7, 10])
        np.testing.assert_array_equal(res.traj_steps, [0, 3, 6, 9])
        assert res.archive.shape == (3, 2, 2)

    def test_dense_schedule_includes_every_step(self):
        cfg = _small_config(n_chains=2, n_iters=10, burn_in=0, thinning=1)
        res = run(double_well_radial(2), DriftScheme("wd_tula"), cfg)
        np.testing.assert_array_equal(res.archive_steps, np.arange(11))
        np.testing.assert_array_equal(res.traj_steps, np.arange(11))

    def test_cubic_only_admits_ula(self):
        cfg = _small_config(init=InitSpec.constant(0.0))
        with pytest.raises(ValueError, match="cubic_demo"):
            run(cubic_demo(), DriftScheme("wd_tula"), cfg)

    def test_scheme_lam_must_match_config(self):
        cfg = _small_config()
        with pytest.raises(ValueError, match="disagrees"):
            run(double_well_radial(2), DriftScheme("wd_tula", lam=0.5), cfg)

    def test_ula_gaussian_matches_exact_discrete_moment(self):
        """The gaussian chain is AR(1); its stationary second moment is 2/(2 - lam)."""
        lam = 0.1
        cfg = RunConfig(
            n_chains=1000,
            n_iters=10_000,
            lam=lam,
            init=InitSpec.gaussian(0.0, 1.0),
            seed=2025,
        )
        res = run(gaussian(1), DriftScheme("ula"), cfg)
        rep = estimate_moments(res.archive, exploded=res.exploded)
        target = 2.0 / (2.0 - lam)
        assert abs(rep.aggregate_m2 - target) <= 3.0 * rep.aggregate_se
        assert res.exploded.sum() == 0

    def test_tamed_schemes_stable_from_far_tail(self):
        # start far outside the well at the largest step size anyone uses
        spec = double_well_radial(100)
        start = np.zeros(100)
        start[0] = 200.0
        for kind in ("wd_tula", "tula_classic"):
            cfg = RunConfig(
                n_chains=100,
                n_iters=10_000,
                lam=0.1,
                init=InitSpec.constant(start),
                seed=7,
                burn_in=5_000,
                thinning=100,
            )
            res = run(spec, DriftScheme(kind), cfg)
            assert res.exploded.sum() == 0, kind
            assert np.isfinite(res.archive).all()


class TestExplosionAbort:
    def test_ula_on_high_dim_double_well_aborts(self):
        spec = double_well_radial(100)
        start = np.zeros(100)
        start[0] = 200.0
        cfg = RunConfig(
            n_chains=50,
            n_iters=10_000,
            lam=0.1,
            init=InitSpec.constant(start),
            seed=5,
            burn_in=5_000,
            thinning=100,
        )
        with pytest.raises(AllChainsExploded) as exc:
            run(spec, DriftScheme("ula"), cfg)
        steps = exc.value.explosion_step
        assert (steps >= 1).all()
        assert steps.max() <= cfg.burn_in
        assert exc.value.n_iters_done <= cfg.n_iters

    def test_zero_burn_in_never_aborts(self):
        # every chain explodes, but with burn_in = 0 the run must complete
        cfg = RunConfig(
            n_chains=8,
            n_iters=50,
            lam=0.01,
            init=InitSpec.constant(-50.0),
            seed=3,
            burn_in=0,
            thinning=1,
        )
        res = run(cubic_demo(), DriftScheme("ula"), cfg)
        assert res.exploded.all()
        assert np.isfinite(res.archive).all()
        assert np.isnan(res.traj_mean_sq[-1])  # no live chains left to average
        assert (np.diff(res.traj_n_exploded) >= 0).all()

    def test_exploded_rows_frozen_in_archive(self):
        cfg = RunConfig(
            n_chains=4,
            n_iters=40,
            lam=0.01,
            init=InitSpec.constant(-50.0),
            seed=3,
            burn_in=0,
            thinning=1,
        )
        res = run(cubic_demo(), DriftScheme("ula"), cfg)
        for c in range(4):
            s = res.explosion_step[c]
            if s < 0:
                continue
            frozen_value = res.archive[s - 1, c, 0]
            np.testing.assert_array_equal(
                res.archive[s - 1 :, c, 0], np.full(41 - (s - 1), frozen_value)
            )


class TestDivergenceDemo:
    def test_initial_moment_and_growth(self):
        lam = 0.01
        rep = ula_divergence_demo(lam=lam, n_chains=400, n_steps=60, seed=11)
        # X_0 ~ N(0, 4/lam): E[X_0^2] = 400, SE = sqrt(2/n) * 400
        se0 = math.sqrt(2.0 / 400) * 400.0
        assert abs(rep.mean_sq[0] - 400.0) <= 3.0 * se0
        increments = np.diff(rep.mean_sq)
        tol = 1e-9 * np.abs(rep.mean_sq[:-1])
        assert (increments < -tol).mean() <= 0.05
        assert rep.mean_sq[-1] > rep.mean_sq[0]

    def test_survivor_curve_and_explosion_accounting(self):
        rep = ula_divergence_demo(lam=0.01, n_chains=300, n_steps=80, seed=21)
        assert rep.exploded_fraction[0] == 0.0
        assert (np.diff(rep.exploded_fraction) >= 0).all()
        assert rep.exploded_fraction[-1] > 0.1  # the blow-up actually happens
        # survivors-only averaging understates the divergence
        last = np.isfinite(rep.mean_sq_survivors).nonzero()[0][-1]
        assert rep.mean_sq_survivors[last] <= rep.mean_sq[last]
        assert rep.steps.shape == rep.mean_sq.shape
