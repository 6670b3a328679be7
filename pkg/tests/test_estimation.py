import math

import numpy as np
import pytest

from akmeasure import ak_model as ak
from akmeasure import estimation as est
from akmeasure import wavefield as wf

from oracles import bivariate_normal


def gaussian_factory(m, hbar=1.0):
    return lambda axis: wf.SystemWavefunction.gaussian(axis, m.q0, m.p0, m.var_q, m.cov_qp, hbar)


def gaussian_P(mean, cov, half=6.0, n=256):
    ax1 = wf.Axis.centered(mean[0], half, n)
    ax2 = wf.Axis.centered(mean[1], half, n)
    vals = bivariate_normal(mean, cov, ax1.points, ax2.points)
    return wf.JointDistribution((ax1, ax2), vals)


# generator ------------------------------------------------------------------

def test_rng_test_vectors():
    # PCG64 via SeedSequence(seed, spawn_key=(stream,)): frozen outputs
    assert est.make_rng(42, 0).bit_generator.random_raw(3).tolist() == [
        16910944855483863638, 16804737912411866312, 16170277589469884630,
    ]
    assert est.make_rng(42, 1).bit_generator.random_raw(3).tolist() == [
        8623682774590505111, 856830905295172750, 10985220740352260511,
    ]
    assert est.make_rng(42, 0).random(4).tolist() == [
        0.9167441575549085, 0.9109866676343232, 0.8765925046098457, 0.3093184096141446,
    ]
    assert est.make_rng(0, 0).random(2).tolist() == [0.9429375528828794, 0.3163371523854981]


def test_sampler_test_vector():
    ax = wf.Axis(-1, 1, 8)
    X, Y = ax.points[:, None], ax.points[None, :]
    P = wf.JointDistribution((ax, ax), np.exp(-(X**2 + 2 * Y**2)))
    b = est.sample(P, 3, 42, norm_tol=1.0)
    np.testing.assert_array_equal(
        b.pairs,
        [
            [0.6578724759652451, 0.5840742386496346],
            [0.5724398229231967, -0.25979536377551443],
            [0.7567450643397993, -0.47087160518471805],
        ],
    )


# sampler ---------------------------------------------------------------------

def test_concentrated_distribution():
    ax = wf.Axis(-1, 1, 16)
    vals = np.zeros((16, 16))
    vals[5, 9] = 1 / ax.spacing**2
    b = est.sample(wf.JointDistribution((ax, ax), vals), 500, 3)
    h = ax.spacing / 2
    assert np.all(np.abs(b.pairs[:, 0] - ax.points[5]) <= h)
    assert np.all(np.abs(b.pairs[:, 1] - ax.points[9]) <= h)


def test_gaussian_sample_means():
    P = gaussian_P((0.4, -0.3), [[0.8, 0.3], [0.3, 0.5]])
    mom = P.moments()
    b = est.sample(P, 100_000, 42)
    x = b.pairs
    se1 = math.sqrt(mom["varQ1"] / len(x))
    se2 = math.sqrt(mom["varQ2"] / len(x))
    assert abs(x[:, 0].mean() - mom["meanQ1"]) < 5 * se1
    assert abs(x[:, 1].mean() - mom["meanQ2"]) < 5 * se2
    # within-cell jitter adds h^2/12 to each variance; the grid is fine enough to hide it
    assert np.var(x[:, 0], ddof=1) == pytest.approx(mom["varQ1"], rel=0.02)
    assert np.cov(x.T)[0, 1] == pytest.approx(mom["covQ1Q2"], abs=0.02)


def test_reproducible_and_streams():
    P = gaussian_P((0, 0), [[1, 0], [0, 1]], n=64)
    a = est.sample(P, 1000, 9)
    b = est.sample(P, 1000, 9)
    c = est.sample(P, 1000, 9, stream=1)
    np.testing.assert_array_equal(a.pairs, b.pairs)
    assert not np.array_equal(a.pairs, c.pairs)
    assert a == b
    # merged statistics do not depend on order
    ab = np.concatenate([a.pairs, c.pairs])
    ba = np.concatenate([c.pairs, a.pairs])
    assert ab.mean(axis=0) == pytest.approx(ba.mean(axis=0), rel=1e-14)
    assert np.var(ab, axis=0, ddof=1) == pytest.approx(np.var(ba, axis=0, ddof=1), rel=1e-14)


def test_sample_rejects_bad_input():
    P = gaussian_P((0, 0), [[1, 0], [0, 1]], n=64)
    with pytest.raises(ValueError):
        est.sample(P, 0, 1)
    with pytest.raises(ValueError, match="normalized"):
        est.sample(wf.JointDistribution(P.axes, 2 * P.values), 10, 1)
    neg = P.values.copy()
    neg[0, 0] = -0.1
    with pytest.raises(ValueError, match="negative"):
        est.sample(wf.JointDistribution(P.axes, neg), 10, 1, norm_tol=1.0)


def test_batch_csv(tmp_path):
    P = gaussian_P((0, 0), [[1, 0], [0, 1]], n=64)
    b = est.sample(P, 5, 1)
    b.to_csv(tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "index,Q1,Q2"
    assert lines[1].startswith("0,")
    assert len(lines) == 6
    assert len(b) == 5


# estimation ------------------------------------------------------------------

def test_forward_round_trip_recovers_q0():
    p = ak.AKParams(K1=0.9, K2=1.1, b1=0.8, b2=1.2)
    m = ak.SystemMoments(q0=0.5, p0=-0.7, var_q=0.4, var_p=0.625)
    report, batch = est.run_regime(gaussian_factory(m), m, p, "joint", 100_000, 42)
    assert abs(report.q0_hat - m.q0) < 5 * report.q.mean_se
    assert abs(report.p0_hat - m.p0) < 5 * report.p.mean_se
    assert abs(report.var_q_hat - m.var_q) < 5 * report.q.var_se
    assert abs(report.var_p_hat - m.var_p) < 5 * report.p.var_se
    assert report.q.status == report.p.status == "ok"
    n1, n2 = ak.pointer_noise(p)
    assert report.q.noise == pytest.approx(n1)
    assert report.p.noise == pytest.approx(n2)


def test_standard_errors_match_definition():
    P = gaussian_P((0.0, 0.0), [[1.0, 0.0], [0.0, 1.0]], n=128)
    b = est.sample(P, 20_000, 5)
    p = ak.AKParams(K1=2.0, K2=0.5)
    r = est.estimate(b, p)
    x = b.pairs[:, 0]
    N = len(x)
    s2 = np.var(x, ddof=1)
    m4 = np.mean((x - x.mean()) ** 4)
    assert r.q.mean_se == pytest.approx(math.sqrt(s2 / N) / 2.0)
    assert r.q.var_se == pytest.approx(math.sqrt((m4 - s2**2 * (N - 3) / (N - 1)) / N) / 4.0)
    assert r.q.pointer_var == pytest.approx(s2)


def test_switched_off_channel_report():
    m = ak.SystemMoments(p0=0.4)
    p = ak.AKParams(K1=0.0)
    r, _ = est.run_regime(gaussian_factory(m), m, p, "p-only", 5000, 1)
    assert r.q is None
    d = r.to_dict()
    assert "p0_hat" in d and "q0_hat" not in d and "var_q_hat" not in d
    with pytest.raises(ak.EstimationError):
        est.estimate(est.SampleBatch(np.zeros((3, 2)), 0), p, "joint")
    with pytest.raises(ak.EstimationError):
        est.estimate(est.SampleBatch(np.zeros((3, 2)), 0), ak.AKParams(), "bogus")


def test_single_sample_is_undefined():
    r = est.estimate(est.SampleBatch(np.array([[0.3, -0.2]]), 0), ak.AKParams())
    assert r.q.status == "undefined" and r.p.status == "undefined"
    assert math.isnan(r.var_q_hat)
    assert math.isinf(r.q.mean_se) and math.isinf(r.q.var_se)


def test_failure_status():
    # tiny pointer spread below the noise floor: negative variance kept raw
    x = np.random.default_rng(0).normal(0, 0.1, size=(1000, 2))
    r = est.estimate(est.SampleBatch(x, 0), ak.AKParams())
    assert r.q.status == "failed" and r.q.var < 0


def test_consistency_slope():
    m = ak.SystemMoments(q0=0.2)
    p = ak.AKParams()
    P, _ = est.simulate_distribution(gaussian_factory(m), m, p, [(1.0, 1.0, 1.0)])
    rms = []
    Ns = [1000, 10_000, 100_000]
    for N in Ns:
        errs = [est.estimate(est.sample(P, N, 42, stream=s), p).q0_hat - m.q0 for s in range(24)]
        rms.append(math.sqrt(np.mean(np.square(errs))))
    slope = np.polyfit(np.log(Ns), np.log(rms), 1)[0]
    assert -0.65 <= slope <= -0.35


def test_report_serialization_stable():
    P = gaussian_P((0.0, 0.0), [[1.0, 0.0], [0.0, 1.0]], n=64)
    b = est.sample(P, 100, 5)
    d1 = est.estimate(b, ak.AKParams()).to_dict()
    d2 = est.estimate(est.sample(P, 100, 5), ak.AKParams()).to_dict()
    assert d1 == d2
    assert d1["regime"] == "joint" and d1["seed"] == 5 and d1["sample_count"] == 100


# sequential -------------------------------------------------------------------

def test_sequential_weak_limit_matches_p_only():
    m = ak.SystemMoments(var_q=2.0, var_p=0.125)
    p = ak.AKParams()
    f = gaussian_factory(m)
    seq, _ = est.run_sequential(f, m, p, (0.0, 1.0), (1.0, 1.0), 50_000, 42)
    only, _ = est.run_regime(f, m, p.replace(K1=0.0), "p-only", 50_000, 42)
    assert seq.q is None
    assert seq.extras["back_action_noise"] == pytest.approx(0.0, abs=1e-15)
    assert seq.extras["naive_var_p_hat"] == pytest.approx(seq.var_p_hat, abs=1e-12)
    assert abs(seq.var_p_hat - only.var_p_hat) < 3 * only.p.var_se
    assert abs(seq.var_p_hat - m.var_p) < 5 * seq.p.var_se


def test_sequential_trivial_stage2_is_q_only():
    m = ak.SystemMoments(q0=0.3)
    p = ak.AKParams()
    seq, _ = est.run_sequential(gaussian_factory(m), m, p, (1.0, 1.0), (1.0, 0.0), 20_000, 7)
    assert seq.p is None and seq.q is not None
    assert abs(seq.q0_hat - m.q0) < 5 * seq.q.mean_se


def test_sequential_back_action_visible():
    m = ak.SystemMoments(var_q=2.0, var_p=0.125)
    p = ak.AKParams()
    seq, _ = est.run_sequential(gaussian_factory(m), m, p, (1.0, 1.0), (1.0, 1.0), 50_000, 42)
    # the composite model removes the stage-1 kick, the naive one does not
    assert abs(seq.var_p_hat - m.var_p) < 5 * seq.p.var_se
    assert seq.extras["naive_var_p_hat"] - m.var_p > 10 * seq.p.var_se
    # Q2 picks up -K1 K2 t1 t2 P1, whose variance is hbar^2 / b1
    assert seq.extras["back_action_noise"] == pytest.approx(1.0, rel=1e-12)
