import csv

import numpy as np
import pytest

from uqprop.dynamics import SdeModel, integrate, ou_model, ou_moments
from uqprop.mc import (
    GaussianIC,
    McConfig,
    philox4x32,
    philox_normals,
    sample_moments,
    sample_raw_moment,
    simulate_paths,
    write_samples,
)

# Random123 known-answer vectors for Philox4x32-10
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    (
        (0xFFFFFFFF,) * 4,
        (0xFFFFFFFF,) * 2,
        (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD),
    ),
    (
        (0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
        (0xA4093822, 0x299F31D0),
        (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1),
    ),
]


@pytest.mark.parametrize("ctr, key, expected", KAT)
def test_philox_known_answers(ctr, key, expected):
    out = philox4x32(ctr, key)
    assert tuple(int(v) for v in out) == expected


def test_philox_vectorises_over_counters():
    paths = np.arange(5, dtype=np.uint64)
    vec = philox4x32((0, paths, 0, 0), (1, 2))
    for i in range(5):
        one = philox4x32((0, i, 0, 0), (1, 2))
        assert tuple(int(v[i]) for v in vec) == tuple(int(v) for v in one)


def test_normals_are_standard():
    z = philox_normals(123, 7, np.arange(200_000), 3)
    assert z.shape == (200_000, 3)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=0.01)
    np.testing.assert_allclose(z.var(axis=0), 1.0, atol=0.01)
    assert abs(np.corrcoef(z.T)[0, 1]) < 0.01


def test_normals_depend_only_on_their_counter():
    a = philox_normals(5, 3, np.array([10, 11, 12]), 2)
    b = philox_normals(5, 3, np.array([12]), 2)
    np.testing.assert_array_equal(a[2], b[0])
    assert not np.array_equal(philox_normals(6, 3, np.array([12]), 2), b)


# -- simulation ------------------------------------------------------------------


def _brownian(sigma):
    return SdeModel(lambda s, t: [0.0 * s[0]], n=1, m=1, diffusion=lambda s, t: [[sigma]])


def test_pure_diffusion_variance():
    res = simulate_paths(_brownian(0.3), [0.0], 0.0, 2.0, McConfig(20_000, 0.1, seed=1))
    mean, cov = res.moments()
    n = 20_000
    var = 0.09 * 2.0
    assert abs(mean[0]) < 4 * np.sqrt(var / n)
    assert abs(cov[0, 0] - var) < 4 * var * np.sqrt(2.0 / n)


@pytest.mark.parametrize("scheme", ["euler_maruyama", "rk4_additive_noise"])
def test_ou_statistics_within_sampling_band(scheme):
    n = 20_000
    res = simulate_paths(ou_model(1.0, 0.5), [1.0], 0.0, 1.0, McConfig(n, 0.01, scheme, seed=9))
    mean, cov = res.moments()
    m_ref, v_ref = ou_moments(1.0, 1.0, 0.5, 1.0)
    assert abs(mean[0] - m_ref) < 4 * np.sqrt(v_ref / n) + 0.01 * m_ref  # sampling plus O(h) bias
    assert abs(cov[0, 0] - v_ref) < 4 * v_ref * np.sqrt(2.0 / n) + 0.01 * v_ref


def test_noise_free_paths_follow_the_flow():
    model = SdeModel(lambda s, t: [s[1], -s[0]], n=2)
    res = simulate_paths(model, [1.0, 0.0], 0.0, 1.0, McConfig(10, 0.01, "rk4_additive_noise"))
    flow = integrate(model.drift, [1.0, 0.0], 0.0, 1.0, 0.01)
    np.testing.assert_allclose(res.terminal, np.tile(flow, (10, 1)), rtol=1e-14)


def test_gaussian_initial_condition_sampling():
    cov = np.array([[1.0, 0.4], [0.4, 0.5]])
    ic = GaussianIC([1.0, 2.0], cov)
    model = SdeModel(lambda s, t: [0.0 * s[0], 0.0 * s[1]], n=2)
    res = simulate_paths(model, ic, 0.0, 0.0, McConfig(50_000, 1.0, seed=3))
    mean, c = res.moments()
    np.testing.assert_allclose(mean, [1.0, 2.0], atol=0.02)
    np.testing.assert_allclose(c, cov, atol=0.02)
    with pytest.raises(ValueError):
        GaussianIC([0.0, 0.0], np.diag([1.0, -1.0]))


@pytest.mark.parametrize("threads, block", [(8, 1024), (4, 100), (1, 250)])
def test_bit_identical_across_threads_and_blocks(threads, block):
    model = ou_model(1.0, 0.5)
    base = simulate_paths(model, [1.0], 0.0, 0.5, McConfig(3000, 0.01, seed=42))
    other = simulate_paths(model, [1.0], 0.0, 0.5, McConfig(3000, 0.01, seed=42, threads=threads, block_size=block))
    assert np.array_equal(base.samples, other.samples)


def test_seed_changes_paths():
    model = ou_model(1.0, 0.5)
    a = simulate_paths(model, [1.0], 0.0, 0.1, McConfig(10, 0.01, seed=1))
    b = simulate_paths(model, [1.0], 0.0, 0.1, McConfig(10, 0.01, seed=2))
    assert not np.array_equal(a.samples, b.samples)


def test_diverging_paths_are_excluded(caplog):
    model = SdeModel(lambda s, t: [s[0] ** 3], n=1, m=1, diffusion=lambda s, t: [[1.0]])
    res = simulate_paths(model, [0.0], 0.0, 3.0, McConfig(500, 0.1, seed=4))
    assert 0 < res.valid.sum() < 500
    assert np.all(np.isnan(res.samples[-1][~res.valid]))
    assert np.all(np.isfinite(res.terminal))
    assert "non-finite" in caplog.text


def test_output_times_and_export(tmp_path):
    res = simulate_paths(ou_model(1.0, 0.5), [1.0], 0.0, 1.0, McConfig(4, 0.25, seed=0, output_times=[0.0, 0.5, 1.0]))
    np.testing.assert_allclose(res.times, [0.0, 0.5, 1.0])
    assert res.samples.shape == (3, 4, 1)
    path = write_samples(tmp_path / "s.csv", res, ["x_km"])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["time_s", "path", "valid", "x_km"]
    assert len(rows) == 1 + 3 * 4
    assert float(rows[-1][3]) == res.samples[-1, 3, 0]


# -- statistics ------------------------------------------------------------------


def test_two_point_samples():
    x = np.array([[-1.0], [1.0]] * 500)
    mean, cov = sample_moments(x)
    assert mean[0] == 0.0
    assert cov[0, 0] == pytest.approx(1000 / 999)
    assert sample_raw_moment(x, (2,)) == 1.0
    with pytest.raises(ValueError):
        sample_moments(x[:1])


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(0, 0.1)
    with pytest.raises(ValueError):
        McConfig(10, -0.1)
    with pytest.raises(ValueError):
        McConfig(10, 0.1, scheme="milstein")
    with pytest.raises(ValueError):
        McConfig(10, 0.1, seed=-1)
