"""Manifold charts, the damped Lyapunov operator, and the limiting drift."""

import numpy as np
import pytest

from driftlab.drift import (
    ManifoldChart,
    alpha_exponent,
    equilibration_rate,
    integrate_drift,
    label_noise_drift,
    limiting_drift,
    ltilde_apply,
    ltilde_inverse,
    matrix_sensing_scaling_constant,
    optimal_scaling_constant,
    tangent_projectors,
    uv_drift_rate,
)
from driftlab.errors import ContractError, DomainError, ModelMismatch
from driftlab.models import MatrixSensingModel, VectorUVModel, sensing_dataset, uv_dataset
from driftlab.numerics import RandomStream

ETA = 0.05
GAMMA = 2.0 / 3.0
C = 0.2
EPS = 0.5


def _uv_setup(seed=3, n=8, P=24):
    stream = RandomStream(seed, 0)
    model = VectorUVModel(n=n, dataset=uv_dataset(P, stream))
    w = model.manifold_point(RandomStream(seed, 1))
    return model, w


def _sensing_setup(seed=5, d=6, r=2, P=40):
    stream = RandomStream(seed, 0)
    model = MatrixSensingModel(sensing_dataset(d, r, P, stream))
    w = model.manifold_point(RandomStream(seed, 1))
    return model, w


def _random_psd(seed, dim, rank):
    gen = RandomStream(seed, 0).generator()
    q, _ = np.linalg.qr(gen.standard_normal((dim, dim)))
    lam = np.zeros(dim)
    lam[:rank] = np.sort(gen.uniform(0.4, 3.0, size=rank))[::-1]
    h = (q * lam) @ q.T
    return 0.5 * (h + h.T)


def _supported(chart, seed):
    gen = RandomStream(seed, 0).generator()
    r = gen.standard_normal(2 * (chart.hessian.shape[0],))
    r = 0.5 * (r + r.T)
    return chart.p_transverse @ r @ chart.p_transverse


# -- charts and projectors ---------------------------------------------------


def test_uv_chart_projectors():
    model, w = _uv_setup()
    chart = ManifoldChart.from_model(model, w)
    d = model.dim
    assert chart.rank == 1
    p_t, p_l = chart.p_transverse, chart.p_tangent
    assert np.allclose(p_t + p_l, np.eye(d), atol=1e-12)
    assert np.allclose(p_t @ p_t, p_t, atol=1e-12)
    assert np.allclose(p_t, p_t.T, atol=1e-14)
    # the curved direction is the swapped vector p = (v, u)
    p = np.concatenate([w[model.n:], w[:model.n]])
    assert np.allclose(p_t, np.outer(p, p) / (p @ p), atol=1e-10)
    # the point itself is flat: u.v = 0 makes w orthogonal to p
    assert np.allclose(p_l @ w, w, atol=1e-12)


def test_sensing_chart_rank_counts_gauge_directions():
    model, w = _sensing_setup()
    chart = ManifoldChart.from_model(model, w)
    # square factors: U -> U M, V -> V M^-T fixes the product, so the
    # flat space has dimension d^2 and the curved space the rest
    d = model.dataset.d
    assert chart.rank == model.dim - d * d
    assert np.allclose(chart.p_tangent @ chart.p_transverse, 0.0, atol=1e-12)


def test_tangent_projectors_warn_near_threshold():
    h = np.diag([1.0, 5e-9, 0.0])
    with pytest.warns(RuntimeWarning, match="ambiguous"):
        tangent_projectors(h, rank_tol=1e-8)


def test_chart_rejects_saddles():
    model, w = _uv_setup()
    u = w[:model.n]
    saddle = np.concatenate([u, u])  # u.v > 0 turns on the indefinite part
    with pytest.raises(DomainError, match="negative"):
        ManifoldChart.from_model(model, saddle)


def test_chart_rejects_zero_hessian():
    with pytest.raises(DomainError, match="vanishes"):
        ManifoldChart.from_hessian(np.zeros((4, 4)))


# -- damped Lyapunov operator ------------------------------------------------


def test_ltilde_rejects_unsupported_argument():
    model, w = _uv_setup()
    chart = ManifoldChart.from_model(model, w)
    outside = np.eye(model.dim)  # rank-1 curved space cannot carry the identity
    with pytest.raises(DomainError, match="curved"):
        ltilde_apply(chart, outside, ETA, C, GAMMA)
    with pytest.raises(DomainError, match="curved"):
        ltilde_inverse(chart, outside, ETA, C, GAMMA)


def test_ltilde_roundtrip_on_model_charts():
    for setup in (_uv_setup, _sensing_setup):
        model, w = setup()
        chart = ManifoldChart.from_model(model, w)
        s = _supported(chart, seed=17)
        m = ltilde_apply(chart, s, ETA, C, GAMMA)
        back = ltilde_inverse(chart, m, ETA, C, GAMMA)
        assert np.linalg.norm(back - s) <= 1e-10 * np.linalg.norm(s)


@pytest.mark.parametrize("gamma", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("eta", [1e-3, 1e-1])
def test_ltilde_roundtrip_random_hessians(gamma, eta):
    for dim, rank, seed in [(8, 5, 21), (6, 6, 22), (10, 3, 23)]:
        chart = ManifoldChart.from_hessian(_random_psd(seed, dim, rank))
        assert chart.rank == rank
        s = _supported(chart, seed=seed + 100)
        m = ltilde_apply(chart, s, eta, C, gamma)
        back = ltilde_inverse(chart, m, eta, C, gamma)
        assert np.linalg.norm(back - s) <= 1e-10 * np.linalg.norm(s)
        # and in the other order
        again = ltilde_apply(chart, ltilde_inverse(chart, m, eta, C, gamma), eta, C, gamma)
        assert np.linalg.norm(again - m) <= 1e-10 * np.linalg.norm(m)


def test_ltilde_inverse_of_hessian_is_half_projector():
    for setup in (_uv_setup, _sensing_setup):
        model, w = setup()
        chart = ManifoldChart.from_model(model, w)
        s = ltilde_inverse(chart, chart.hessian, ETA, C, GAMMA)
        assert np.abs(s - 0.5 * chart.p_transverse).max() <= 1e-12


def test_ltilde_single_mode_is_plain_anticommutator():
    model, w = _uv_setup()
    chart = ManifoldChart.from_model(model, w)
    lam = chart.eigenvalues[0]
    s = 0.7 * chart.p_transverse
    out = ltilde_apply(chart, s, ETA, C, GAMMA)
    # rank one: the commutator vanishes and {H, S} = 2 lambda S
    assert np.allclose(out, 2.0 * lam * s, atol=1e-14 * lam)


# -- drift fields ------------------------------------------------------------


def test_uv_label_noise_drift_is_norm_decay():
    model, w = _uv_setup()
    drift = label_noise_drift(model, w, ETA, C, GAMMA, EPS)
    rate = uv_drift_rate(ETA, GAMMA, C, EPS, model.mu2, model.n, model.n_samples)
    assert np.allclose(drift, -rate * w, rtol=1e-10, atol=1e-14 * rate * np.linalg.norm(w))


def test_corollary_matches_general_drift():
    for setup in (_uv_setup, _sensing_setup):
        model, w = setup()
        chart = ManifoldChart.from_model(model, w)
        sigma = model.label_sigma(w)
        cov = sigma @ sigma.T
        full = limiting_drift(model, w, cov, ETA, C, GAMMA, EPS, chart=chart)
        special = label_noise_drift(model, w, ETA, C, GAMMA, EPS, chart=chart)
        scale = np.linalg.norm(special)
        assert scale > 0.0
        assert np.linalg.norm(full.drift - special) <= 1e-8 * scale
        # label noise lives in the curved directions only
        assert np.linalg.norm(full.term_tangent_noise) <= 1e-9 * scale
        assert np.linalg.norm(full.term_cross_noise) <= 1e-9 * scale
        np.testing.assert_array_equal(
            full.drift,
            full.term_tangent_noise + full.term_cross_noise + full.term_transverse_noise,
        )


def test_label_noise_drift_is_tangent():
    for setup in (_uv_setup, _sensing_setup):
        model, w = setup()
        chart = ManifoldChart.from_model(model, w)
        cov = model.label_sigma(w) @ model.label_sigma(w).T
        full = limiting_drift(model, w, cov, ETA, C, GAMMA, EPS, chart=chart)
        assert (
            np.linalg.norm(chart.p_transverse @ full.drift)
            <= 1e-8 * np.linalg.norm(full.drift)
        )


def test_flat_noise_shifts_the_base_point():
    # covariance supported on flat directions feeds only the first term,
    # which is transverse: it relocates the chart instead of sliding it
    model, w = _uv_setup()
    chart = ManifoldChart.from_model(model, w)
    gen = RandomStream(9, 0).generator()
    b = chart.p_tangent @ gen.standard_normal((model.dim, model.dim))
    cov = b @ b.T
    out = limiting_drift(model, w, cov, ETA, C, GAMMA, EPS, chart=chart)
    assert np.linalg.norm(out.term_cross_noise) <= 1e-12
    assert np.linalg.norm(out.term_transverse_noise) <= 1e-12
    t1 = out.term_tangent_noise
    assert np.linalg.norm(t1) > 0.0
    assert np.linalg.norm(chart.p_transverse @ t1) >= 0.99 * np.linalg.norm(t1)


def test_zero_covariance_gives_zero_drift():
    model, w = _uv_setup()
    out = limiting_drift(model, w, np.zeros((model.dim, model.dim)), ETA, C, GAMMA, EPS)
    assert np.all(out.drift == 0.0)


def test_drift_scales_as_eta_to_two_minus_two_gamma():
    model, w = _uv_setup()
    gamma = 0.3
    d1 = np.linalg.norm(label_noise_drift(model, w, 1e-2, C, gamma, EPS))
    d2 = np.linalg.norm(label_noise_drift(model, w, 1e-3, C, gamma, EPS))
    measured = np.log(d1 / d2) / np.log(10.0)
    assert abs(measured - (2.0 - 2.0 * gamma)) < 1e-9


def test_diffusion_scale_formula():
    model, w = _uv_setup()
    cov = model.label_sigma(w) @ model.label_sigma(w).T
    out = limiting_drift(model, w, cov, ETA, C, GAMMA, EPS)
    expected = EPS * (ETA ** (1.0 - GAMMA) / C + ETA)
    assert out.diffusion_scale == pytest.approx(expected, rel=1e-14)


def test_covariance_validation():
    model, w = _uv_setup()
    with pytest.raises(ContractError):
        limiting_drift(model, w, np.eye(3), ETA, C, GAMMA, EPS)
    lop = np.zeros((model.dim, model.dim))
    lop[0, 1] = 1.0  # not symmetric
    with pytest.raises(DomainError):
        limiting_drift(model, w, lop, ETA, C, GAMMA, EPS)
    with pytest.raises(DomainError, match="semidefinite"):
        limiting_drift(model, w, -np.eye(model.dim), ETA, C, GAMMA, EPS)


def test_label_noise_drift_detects_wrong_chart():
    model_a, w = _uv_setup(seed=11)
    model_b, _ = _uv_setup(seed=12)
    chart = ManifoldChart.from_model(model_a, w)
    with pytest.raises(ModelMismatch):
        label_noise_drift(model_b, w, ETA, C, GAMMA, EPS, chart=chart)


# -- closed-form rates -------------------------------------------------------


def test_uv_drift_rate_worked_example():
    # eta^(2-2/3*2) * eps^2 * mu2 / (2 n P C^2) at the documented point
    rate = uv_drift_rate(0.01, 2.0 / 3.0, 0.171, 0.5, 1.0, 10, 5)
    expected = 0.01 ** (2.0 / 3.0) * 0.25 / (2.0 * 10 * 5 * 0.171**2)
    assert rate == pytest.approx(expected, rel=1e-14)
    assert rate == pytest.approx(3.9683909866e-3, rel=1e-9)
    assert uv_drift_rate(0.01, 2.0 / 3.0, 0.171, 0.0, 1.0, 10, 5) == 0.0
    assert uv_drift_rate(0.01, 2.0 / 3.0, 0.171, 0.5, 1.0, 20, 5) == pytest.approx(
        rate / 2.0, rel=1e-14
    )


def test_equilibration_rate_value():
    assert equilibration_rate(0.05, 0.2, 2.0 / 3.0) == pytest.approx(
        0.1 * 0.05 ** (2.0 / 3.0), rel=1e-14
    )


def test_alpha_exponent_table():
    assert alpha_exponent(0.3) == pytest.approx(1.4)
    assert alpha_exponent(0.5) == pytest.approx(1.0)
    assert alpha_exponent(2.0 / 3.0) == pytest.approx(2.0 / 3.0)
    assert alpha_exponent(0.8) == pytest.approx(0.8)


def test_collision_constants():
    assert optimal_scaling_constant(0.5, 1.0, 10, 5) == pytest.approx(
        0.005 ** (1.0 / 3.0), rel=1e-12
    )
    assert matrix_sensing_scaling_constant(np.sqrt(0.1), 1.0, 20, 200) == pytest.approx(
        5e-5 ** (1.0 / 3.0), rel=1e-12
    )


# -- drift integration -------------------------------------------------------


def test_integrate_drift_decays_at_twice_the_rate():
    model, w0 = _uv_setup(seed=7, n=6, P=12)
    rate = uv_drift_rate(ETA, GAMMA, C, EPS, model.mu2, model.n, model.n_samples)
    total = 1.0 / (2.0 * rate)
    path = integrate_drift(model, w0, ETA, C, GAMMA, EPS, total_steps=total, n_nodes=100)
    assert not path.zero_drift
    assert path.t[-1] == pytest.approx(total)
    ratio = path.weight_norm_sq[-1] / path.weight_norm_sq[0]
    assert ratio == pytest.approx(np.exp(-1.0), rel=2e-2)
    assert np.all(np.diff(path.weight_norm_sq) < 0.0)
    assert model.loss(path.final_w) < 1e-16


def test_integrate_drift_flags_zero_drift():
    model, w0 = _uv_setup(seed=7, n=6, P=12)
    path = integrate_drift(model, w0, ETA, C, GAMMA, epsilon=0.0, total_steps=100.0)
    assert path.zero_drift
    assert path.weight_norm_sq[0] == path.weight_norm_sq[-1]
    np.testing.assert_allclose(path.final_w, w0, atol=1e-12)


def test_integrate_drift_with_diffusion():
    model, w0 = _uv_setup(seed=7, n=6, P=12)
    with pytest.raises(ContractError, match="stream"):
        integrate_drift(
            model, w0, ETA, C, GAMMA, EPS, total_steps=50.0, n_nodes=5, with_diffusion=True
        )
    path = integrate_drift(
        model,
        w0,
        ETA,
        C,
        GAMMA,
        EPS,
        total_steps=50.0,
        n_nodes=5,
        with_diffusion=True,
        stream=RandomStream(4, 9),
    )
    assert np.all(np.isfinite(path.weight_norm_sq))
    assert model.loss(path.final_w) < 1e-16
