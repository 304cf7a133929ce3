"""Update kernels: golden trajectory, blocking, explosion handling, backends."""

import numpy as np
import pytest

import langtame.kernels as kernels
from langtame.kernels import (
    HAS_NUMBA,
    KernelParams,
    POT_CODES,
    SCHEME_CODES,
    active_backend,
    advance_block,
    kernel_params,
)
from langtame.potentials import cubic_demo, double_well_radial, gaussian
from langtame.sampler import RunConfig
from langtame.taming import DriftScheme, drift_function

BACKENDS = ["numpy"] + (["numba"] if HAS_NUMBA else [])

# 5 wd_tula steps on the 2d double well, lam = 0.01, noise from
# default_rng(2024); captured once and frozen as a regression fixture.
# hex floats so the fixture is exact.
GOLDEN_START = np.array([[1.5, 0.0], [0.0, -2.0], [3.0, 1.0]])
GOLDEN_AFTER_5 = {
    "numba": np.array([
        [float.fromhex("0x1.df342b2e72bc2p+0"), float.fromhex("0x1.1801687a76a05p-2")],
        [float.fromhex("-0x1.ba9d3dccac634p-2"), float.fromhex("-0x1.c703823a8e586p+0")],
        [float.fromhex("0x1.3a96e7a2f838ep+1"), float.fromhex("0x1.8601047683151p-1")],
    ]),
    "numpy": np.array([
        [float.fromhex("0x1.df342b2e72bc2p+0"), float.fromhex("0x1.1801687a76a05p-2")],
        [float.fromhex("-0x1.ba9d3dccac634p-2"), float.fromhex("-0x1.c703823a8e586p+0")],
        [float.fromhex("0x1.3a96e7a2f838ep+1"), float.fromhex("0x1.8601047683151p-1")],
    ]),
}


def _wd_params(threshold: float = 1e100) -> KernelParams:
    return kernel_params(double_well_radial(2), "wd_tula", 0.01, 2.5, threshold)


def _golden_noise() -> np.ndarray:
    return np.random.default_rng(2024).standard_normal((3, 5, 2))


@pytest.mark.parametrize("backend", BACKENDS)
class TestGoldenTrajectory:
    def test_five_steps_match_frozen_fixture(self, backend):
        pos = GOLDEN_START.copy()
        frozen = np.zeros(3, dtype=np.bool_)
        expl = np.full(3, -1, dtype=np.int64)
        advance_block(pos, frozen, expl, _golden_noise(), 5, _wd_params(), 0, backend=backend)
        np.testing.assert_array_equal(pos, GOLDEN_AFTER_5[backend])
        assert not frozen.any()
        assert (expl == -1).all()

    def test_repeated_runs_are_bit_identical(self, backend):
        results = []
        for _ in range(2):
            pos = GOLDEN_START.copy()
            frozen = np.zeros(3, dtype=np.bool_)
            expl = np.full(3, -1, dtype=np.int64)
            advance_block(pos, frozen, expl, _golden_noise(), 5, _wd_params(), 0, backend=backend)
            results.append(pos)
        assert results[0].tobytes() == results[1].tobytes()

    def test_chunked_advance_equals_single_block(self, backend):
        """Splitting a block must not change the trajectory: same noise, same path."""
        noise = _golden_noise()
        whole = GOLDEN_START.copy()
        frozen = np.zeros(3, dtype=np.bool_)
        expl = np.full(3, -1, dtype=np.int64)
        advance_block(whole, frozen, expl, noise, 5, _wd_params(), 0, backend=backend)

        split = GOLDEN_START.copy()
        frozen2 = np.zeros(3, dtype=np.bool_)
        expl2 = np.full(3, -1, dtype=np.int64)
        advance_block(split, frozen2, expl2, noise[:, :2], 2, _wd_params(), 0, backend=backend)
        advance_block(split, frozen2, expl2, noise[:, 2:], 3, _wd_params(), 2, backend=backend)
        np.testing.assert_array_equal(whole, split)


@pytest.mark.parametrize("backend", BACKENDS)
class TestExplosionHandling:
    def test_exploding_chain_reverts_freezes_and_records(self, backend):
        # raw gradient step from |x| = 1e60 under ULA overflows immediately
        p = kernel_params(double_well_radial(2), "ula", 0.01, 1.0, 1e100)
        pos = np.array([[1.0, 0.0], [1e60, 0.0]])
        before = pos.copy()
        frozen = np.zeros(2, dtype=np.bool_)
        expl = np.full(2, -1, dtype=np.int64)
        noise = np.zeros((2, 3, 2))
        advance_block(pos, frozen, expl, noise, 3, p, 7, backend=backend)
        assert not frozen[0] and frozen[1]
        assert expl[1] == 8  # step0 + 1: the very first proposed step
        np.testing.assert_array_equal(pos[1], before[1])  # reverted, still finite
        assert np.all(np.isfinite(pos))

    def test_threshold_crossing_without_overflow(self, backend):
        # gaussian ULA stays finite; an artificially small threshold trips it
        p = kernel_params(gaussian(1), "ula", 0.01, 1.0, 0.5)
        pos = np.array([[0.49]])
        frozen = np.zeros(1, dtype=np.bool_)
        expl = np.full(1, -1, dtype=np.int64)
        noise = np.full((1, 4, 1), 1.0)  # deterministic kick past 0.5 (sqrt(0.02) each)
        advance_block(pos, frozen, expl, noise, 4, p, 0, backend=backend)
        assert frozen[0]
        assert 1 <= expl[0] <= 4
        assert abs(pos[0, 0]) <= 0.5

    def test_frozen_chains_ignore_their_noise(self, backend):
        p = _wd_params()
        pos = np.array([[1.0, 1.0], [2.0, 2.0]])
        frozen = np.array([True, False])
        expl = np.array([3, -1], dtype=np.int64)
        noise = np.random.default_rng(0).standard_normal((2, 6, 2))
        snapshot = pos[0].copy()
        advance_block(pos, frozen, expl, noise, 6, p, 10, backend=backend)
        np.testing.assert_array_equal(pos[0], snapshot)
        assert expl[0] == 3  # recorded step untouched
        assert not np.array_equal(pos[1], np.array([2.0, 2.0]))


DRIFT_CASES = [
    (double_well_radial(3), "ula"),
    (double_well_radial(3), "tula_classic"),
    (double_well_radial(3), "wd_tula"),
    (double_well_radial(3), "reg_tula"),
    (gaussian(4), "wd_tula"),
    (gaussian(4), "reg_tula"),
    (cubic_demo(), "ula"),
]


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("spec,kind", DRIFT_CASES, ids=lambda v: getattr(v, "name", v))
def test_kernel_coefficient_matches_reference_drift(spec, kind, backend):
    """One zero-noise kernel step equals the explicit drift update."""
    lam = 0.01
    scheme = DriftScheme(kind, reg_r=2.5) if kind == "reg_tula" else DriftScheme(kind)
    drift = drift_function(spec, scheme, lam)
    p = kernel_params(spec, kind, lam, 2.5, 1e100)
    rng = np.random.default_rng(31337)
    pos = rng.uniform(-3.0, 3.0, size=(8, spec.dim))
    expected = np.stack([x - lam * drift(x) for x in pos])
    frozen = np.zeros(8, dtype=np.bool_)
    expl = np.full(8, -1, dtype=np.int64)
    advance_block(pos, frozen, expl, np.zeros((8, 1, spec.dim)), 1, p, 0, backend=backend)
    np.testing.assert_allclose(pos, expected, rtol=1e-12, atol=1e-13)


def test_cross_backend_agreement_high_dimension():
    if not HAS_NUMBA:
        pytest.skip("only one backend available")
    p = kernel_params(double_well_radial(100), "wd_tula", 0.001, 2.5, 1e100)
    rng = np.random.default_rng(7)
    noise = rng.standard_normal((16, 200, 100))
    results = {}
    for backend in ("numba", "numpy"):
        pos = np.full((16, 100), 2.0)
        frozen = np.zeros(16, dtype=np.bool_)
        expl = np.full(16, -1, dtype=np.int64)
        advance_block(pos, frozen, expl, noise, 200, p, 0, backend=backend)
        results[backend] = pos
    # summation order differs, so agreement is to rounding, not bitwise
    diff = np.max(np.abs(results["numba"] - results["numpy"]))
    assert diff < 1e-12


class TestBackendSelection:
    def test_bad_value_rejected(self, monkeypatch):
        monkeypatch.setenv("LANGTAME_BACKEND", "cuda")
        with pytest.raises(ValueError, match="LANGTAME_BACKEND"):
            active_backend()

    def test_explicit_numpy(self, monkeypatch):
        monkeypatch.setenv("LANGTAME_BACKEND", "numpy")
        assert active_backend() == "numpy"

    def test_auto_prefers_numba_when_present(self, monkeypatch):
        monkeypatch.delenv("LANGTAME_BACKEND", raising=False)
        assert active_backend() == ("numba" if HAS_NUMBA else "numpy")

    def test_forcing_numba_without_numba_fails(self, monkeypatch):
        monkeypatch.setenv("LANGTAME_BACKEND", "numba")
        monkeypatch.setattr(kernels, "HAS_NUMBA", False)
        with pytest.raises(RuntimeError, match="numba"):
            active_backend()


class TestKernelParams:
    def test_catalog_names_map_to_codes(self):
        assert kernel_params(double_well_radial(5), "ula", 0.1, 1.0, 1e100).pot == POT_CODES["double_well"]
        assert kernel_params(gaussian(2), "wd_tula", 0.1, 1.0, 1e100).pot == POT_CODES["gaussian"]
        assert kernel_params(cubic_demo(), "ula", 0.1, 1.0, 1e100).pot == POT_CODES["cubic"]
        assert kernel_params(gaussian(2), "reg_tula", 0.1, 1.5, 1e100).scheme == SCHEME_CODES["reg_tula"]

    def test_non_catalog_potential_is_not_kernelizable(self):
        import dataclasses

        odd = dataclasses.replace(double_well_radial(2), name="bespoke")
        assert kernel_params(odd, "ula", 0.1, 1.0, 1e100) is None

    def test_derived_scalars(self):
        p = kernel_params(double_well_radial(2), "reg_tula", 0.04, 2.0, 1e50)
        assert p.sql == pytest.approx(0.2)
        assert p.sqln == pytest.approx(np.sqrt(0.08))
        assert p.reg_coef == pytest.approx(0.04 * 6.0)
        assert p.rp_half == 2.5
        assert p.thr2 == 1e50 * 1e50


def test_run_config_import_does_not_shadow_kernels():
    # regression guard: RunConfig lives in sampler, not kernels
    assert RunConfig.__module__ == "langtame.sampler"
