import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fasdoa.covariance import (CovarianceError, LagVector, StackMode, analytic_lags, build_Rr,
                               dump_matrix, load_matrix, model_stack, rearrange_to_lags,
                               sample_covariance)
from fasdoa.geometry import design_aligned, design_misaligned, raw_design
from fasdoa.signal import Alignment, Scenario, Target, synthesize
from oracles import brute_lag_counts, exact_r


def test_single_unit_snapshot():
    e1 = np.zeros((3, 1), dtype=complex)
    e1[0, 0] = 1.0
    R = sample_covariance([e1]).matrices[0]
    expected = np.zeros((3, 3))
    expected[0, 0] = 1.0
    np.testing.assert_array_equal(R, expected)


def test_noise_only_large_T():
    rng = np.random.default_rng(0)
    T = 100_000
    Y = (rng.standard_normal((4, T)) + 1j * rng.standard_normal((4, T))) * np.sqrt(0.5 * 2.0)
    R = sample_covariance([Y]).matrices[0]
    assert np.linalg.norm(R - 2.0 * np.eye(4)) / np.linalg.norm(2.0 * np.eye(4)) < 0.02


def test_stacked_dimension():
    design = design_aligned(3, 1)
    blocks = synthesize(Scenario((Target(0.0),), snapshots=20), design)
    cov = sample_covariance(blocks, "stacked")
    assert cov.matrices[0].shape == (6, 6)
    per = sample_covariance(blocks, "per_movement")
    assert [m.shape for m in per.matrices] == [(3, 3), (3, 3)]


def test_sample_covariance_hermitian():
    rng = np.random.default_rng(1)
    Y = rng.standard_normal((5, 7)) + 1j * rng.standard_normal((5, 7))
    R = sample_covariance([Y]).matrices[0]
    np.testing.assert_array_equal(R, R.conj().T)


def test_sample_covariance_errors():
    with pytest.raises(CovarianceError):
        sample_covariance([])
    with pytest.raises(CovarianceError):
        sample_covariance([np.ones((3, 4)), np.ones((3, 5))], "stacked")


def test_identity_covariance_gives_lag_spike():
    design = design_aligned(3, 1)
    cov = model_stack(design, [], [], 0.7)
    r = rearrange_to_lags(cov, design)
    assert r.at(0) == pytest.approx(0.7)
    assert np.all(np.delete(r.values, r.delta) == 0)


@pytest.mark.parametrize("design", [design_aligned(3, 1), design_misaligned(4, 1)],
                         ids=["aligned", "misaligned"])
def test_single_source_exact_lags(design):
    theta, p = 23.0, 1.7
    r = rearrange_to_lags(model_stack(design, [theta], [p], 0.0), design)
    w = 2 * np.pi * np.sin(np.deg2rad(theta))
    for lag in range(-r.delta, r.delta + 1):
        assert abs(r.at(lag) - p * np.exp(1j * lag * 0.5 * w)) < 1e-12


@pytest.mark.parametrize("design", [design_aligned(3, 1), design_misaligned(4, 1),
                                    design_aligned(5, 2), design_misaligned(5, 2)],
                         ids=["a31", "m41", "a52", "m52"])
def test_lag_counts_match_enumeration(design):
    cov = model_stack(design, [10.0], [1.0], 1.0)
    r = rearrange_to_lags(cov, design)
    blocks = ([np.concatenate(design.positions)] if cov.mode is StackMode.STACKED
              else design.positions)
    brute = brute_lag_counts(blocks, design.max_lag)
    assert [brute[lag] for lag in r.lags] == r.counts.tolist()


def test_missing_lag_raises():
    design = raw_design([0, 1, 4])
    cov = model_stack(design, [0.0], [1.0], 1.0)
    with pytest.raises(CovarianceError, match="2"):
        rearrange_to_lags(cov, design, delta=4)


def test_dimension_mismatch_raises():
    design = design_aligned(3, 1)
    with pytest.raises(CovarianceError):
        rearrange_to_lags(model_stack(design_aligned(4, 1), [0.0], [1.0], 1.0), design)


def test_lag_vector_conjugate_symmetric():
    design = design_aligned(3, 1)
    sc = Scenario((Target(-12.0, (-20.0,)), Target(31.0)), snapshots=80, seed=4)
    r = rearrange_to_lags(sample_covariance(synthesize(sc, design)), design)
    np.testing.assert_allclose(r.values, r.values[::-1].conj(), atol=0)
    assert r.at(0).imag == 0


def test_spike_gives_identity_Rr():
    values = np.zeros(7, dtype=complex)
    values[3] = 1.0
    np.testing.assert_array_equal(build_Rr(LagVector(3, values)), np.eye(4))


def test_single_source_Rr_rank_one():
    r = LagVector(9, exact_r([17.0], [2.0], 0.0, 9))
    w = np.linalg.eigvalsh(build_Rr(r))[::-1]
    assert w[0] == pytest.approx(20.0)
    assert abs(w[1]) < 1e-10
    # Dominant eigenvector is the R_r steering vector exp(-j m d w), first entry 1.
    c = np.exp(-1j * np.arange(10) * np.pi * np.sin(np.deg2rad(17.0)))
    np.testing.assert_allclose(build_Rr(r) @ c, 20.0 * c, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(delta=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_Rr_structure(delta, seed):
    rng = np.random.default_rng(seed)
    half = rng.standard_normal(delta + 1) + 1j * rng.standard_normal(delta + 1)
    half[0] = half[0].real
    values = np.concatenate([half[:0:-1].conj(), half])
    R = build_Rr(LagVector(delta, values))
    np.testing.assert_array_equal(R, R.conj().T)
    for m in range(delta + 1):
        for n in range(delta + 1):
            assert R[m, n] == values[delta + n - m]
    # Column i is the reversed window values[i : i + delta + 1].
    for i in range(delta + 1):
        np.testing.assert_array_equal(R[:, i], values[i:i + delta + 1][::-1])


@settings(max_examples=25, deadline=None)
@given(kind=st.sampled_from(["aligned", "misaligned"]),
       angles=st.lists(st.floats(-85, 85), min_size=1, max_size=9),
       seed=st.integers(0, 1000))
def test_oracle_equivalence(kind, angles, seed):
    design = design_aligned(3, 1) if kind == "aligned" else design_misaligned(4, 1)
    angles = angles[: design.max_lag]
    powers = np.random.default_rng(seed).uniform(0.2, 3.0, len(angles))
    r = rearrange_to_lags(model_stack(design, angles, powers, 0.4), design)
    np.testing.assert_allclose(r.values, exact_r(angles, powers, 0.4, design.max_lag),
                               atol=1e-10, rtol=0)
    np.testing.assert_allclose(
        r.values, analytic_lags(angles, powers, 0.4, design.max_lag).values, atol=1e-10, rtol=0)


@pytest.mark.parametrize("K", [1, 3, 6, 11])
def test_rank_property(K):
    design = design_aligned(3, 1)
    angles = np.linspace(-60, 60, K) if K > 1 else [15.0]
    noise = 0.3
    r = rearrange_to_lags(model_stack(design, angles, np.ones(K), noise), design)
    w = np.linalg.eigvalsh(build_Rr(r))[::-1]
    assert np.all(w[:K] > noise + 1e-6)
    np.testing.assert_allclose(w[K:], noise, atol=1e-9)


def test_averaging_reduces_variance():
    """Lags backed by more covariance entries have lower estimator variance."""
    design = design_aligned(3, 1)
    counts = None
    samples = []
    for trial in range(300):
        sc = Scenario((), snr_db=0.0, snapshots=100, seed=9)
        r = rearrange_to_lags(sample_covariance(synthesize(sc, design, trial)), design)
        counts = r.counts
        samples.append(r.values)
    var = np.var(np.array(samples), axis=0)
    lags = np.arange(-design.max_lag, design.max_lag + 1)
    by_count = {}
    for c, v, lag in zip(counts, var, lags):
        if lag != 0:
            by_count.setdefault(int(c), []).append(v)
    levels = sorted(by_count)
    means = [np.mean(by_count[c]) for c in levels]
    assert len(levels) >= 2
    assert all(a > b for a, b in zip(means, means[1:]))


def test_dump_load_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    M = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    dump_matrix(tmp_path / "m.txt", M)
    np.testing.assert_array_equal(load_matrix(tmp_path / "m.txt"), M)
