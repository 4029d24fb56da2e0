"""Exponential, power-law, kink, and shared-prefactor fits."""

import numpy as np
import pytest

from driftlab.analysis import fit_exponential, fit_piecewise, fit_powerlaw, joint_fit_C
from driftlab.errors import FitError
from driftlab.numerics import RandomStream

ETA_GRID = np.geomspace(1e-3, 1e-1, 6)


# -- exponential -------------------------------------------------------------


def test_fit_exponential_exact():
    t = np.arange(201, dtype=float)
    fit = fit_exponential(t, 5.0 * np.exp(-t / 50.0))
    assert fit.t_c == pytest.approx(50.0, rel=1e-12)
    assert fit.amplitude == pytest.approx(5.0, rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.window == (40.0, 200.0)


def test_fit_exponential_with_noise():
    t = np.arange(201, dtype=float)
    gen = RandomStream(12, 0).generator()
    noisy = 5.0 * np.exp(-t / 50.0) * (1.0 + 0.01 * gen.standard_normal(t.size))
    fit = fit_exponential(t, noisy)
    assert abs(fit.t_c - 50.0) < 2.0
    assert fit.r_squared > 0.99


def test_fit_exponential_scale_equivariant():
    t = np.arange(120, dtype=float)
    v = 2.0 * np.exp(-t / 30.0)
    a = fit_exponential(t, v)
    b = fit_exponential(t, 7.3 * v)
    assert b.t_c == pytest.approx(a.t_c, rel=1e-12)
    assert b.amplitude == pytest.approx(7.3 * a.amplitude, rel=1e-10)


def test_fit_exponential_explicit_window():
    t = np.arange(201, dtype=float)
    v = np.where(t < 60, 9.0, 5.0 * np.exp(-t / 50.0))  # corrupt early part
    fit = fit_exponential(t, v, window=(60.0, 200.0))
    assert fit.t_c == pytest.approx(50.0, rel=1e-12)
    assert fit.window == (60.0, 200.0)


def test_fit_exponential_rejects_bad_input():
    t = np.arange(100, dtype=float)
    with pytest.raises(FitError, match="decay"):
        fit_exponential(t, np.full(100, 3.0))
    with pytest.raises(FitError, match="decay"):
        fit_exponential(t, np.exp(t / 80.0))  # growing
    with pytest.raises(FitError, match="positive"):
        fit_exponential(t, np.exp(-t / 20.0) - 0.5)
    with pytest.raises(FitError, match="at least 10"):
        fit_exponential(t[:8], np.exp(-t[:8] / 20.0))
    with pytest.raises(FitError, match="length"):
        fit_exponential(t, np.ones(7))


# -- power law ---------------------------------------------------------------


def test_fit_powerlaw_exact():
    eta = np.array([1e-3, 1e-2, 1e-1])
    fit = fit_powerlaw(eta, 3.0 * eta**-0.5)
    assert fit.t0 == pytest.approx(3.0, rel=1e-12)
    assert fit.alpha == pytest.approx(0.5, rel=1e-12)
    assert fit.residual < 1e-13


def test_fit_powerlaw_planted_exponent():
    gamma = 0.4
    alpha = 2.0 * (1.0 - gamma)
    fit = fit_powerlaw(ETA_GRID, 7.0 * ETA_GRID**-alpha)
    assert fit.alpha == pytest.approx(1.2, rel=1e-12)


def test_fit_powerlaw_rejects_bad_input():
    with pytest.raises(FitError, match="at least 3"):
        fit_powerlaw([1e-2, 1e-1], [10.0, 1.0])
    with pytest.raises(FitError, match="positive"):
        fit_powerlaw([1e-2, 1e-1, 1.0], [10.0, -1.0, 0.1])
    with pytest.raises(FitError, match="length"):
        fit_powerlaw([1e-2, 1e-1, 1.0], [10.0, 1.0])


# -- piecewise kink ----------------------------------------------------------


def _kink_curve(beta, a_max, a1, a2, beta_star):
    b = np.asarray(beta)
    return a_max + np.where(b <= beta_star, a1 * (b - beta_star), a2 * (b - beta_star))


def test_fit_piecewise_planted_kink():
    beta = np.array([0.80, 0.85, 0.90, 0.93, 0.95, 0.97, 0.99])
    gen = RandomStream(7, 0).generator()
    acc = _kink_curve(beta, 0.9, 0.5, -2.0, 0.95) + 1e-3 * gen.standard_normal(beta.size)
    fit = fit_piecewise(beta, acc)
    assert abs(fit.beta_star - 0.95) <= 0.01
    assert fit.a_max == pytest.approx(0.9, abs=0.01)
    assert fit.a1 == pytest.approx(0.5, abs=0.2)
    assert fit.a2 == pytest.approx(-2.0, abs=0.3)
    assert not fit.at_boundary


def test_fit_piecewise_tent_apex():
    beta = np.linspace(0.0, 1.0, 11)
    acc = -np.abs(beta - 0.5)
    fit = fit_piecewise(beta, acc)
    assert fit.beta_star == pytest.approx(0.5, abs=1e-12)
    assert fit.residual < 1e-12
    assert not fit.at_boundary


def test_fit_piecewise_monotone_is_flagged():
    beta = np.linspace(0.1, 0.9, 9)
    fit = fit_piecewise(beta, 2.0 * beta + 0.3)
    assert fit.at_boundary
    assert fit.residual < 1e-12


def test_fit_piecewise_beats_single_line():
    beta = np.linspace(0.5, 1.0, 9)
    acc = _kink_curve(beta, 1.0, 1.5, -3.0, 0.8)
    fit = fit_piecewise(beta, acc)
    design = np.column_stack([np.ones_like(beta), beta])
    coef, _, _, _ = np.linalg.lstsq(design, acc, rcond=None)
    line_rms = np.sqrt(np.mean((design @ coef - acc) ** 2))
    assert fit.residual <= line_rms + 1e-12
    assert fit.residual < 0.5 * line_rms  # genuinely kinked data


def test_fit_piecewise_needs_five_points():
    with pytest.raises(FitError, match="at least 5"):
        fit_piecewise([0.1, 0.2, 0.3, 0.4], [1.0, 2.0, 3.0, 4.0])


# -- joint scaling-constant fit ------------------------------------------------

GAMMAS = [0.3, 0.5, 0.8]


def _planted_sweep(c_true=0.2, noise=0.0, seed=0):
    # prefactors share the value 100 exactly at c_true and fan out with
    # gamma-dependent sensitivity away from it
    sensitivity = {0.3: 2.0, 0.5: 1.0, 0.8: -1.0}

    def sweep(c):
        gen = RandomStream(seed, 0).generator()
        out = {}
        for g in GAMMAS:
            alpha = max(2.0 * (1.0 - g), g)
            t0 = 100.0 * (c / c_true) ** sensitivity[g]
            t_c = t0 * ETA_GRID**-alpha
            if noise:
                t_c = t_c * (1.0 + noise * gen.standard_normal(t_c.size))
            out[g] = (ETA_GRID, t_c)
        return out

    return sweep


def test_joint_fit_recovers_planted_constant():
    fit = joint_fit_C(_planted_sweep(), GAMMAS)
    assert abs(fit.scaling_constant - 0.2) <= 0.01
    assert fit.spread < 0.05
    assert not fit.ambiguous
    assert set(fit.t0_by_gamma) == set(GAMMAS)
    assert len(fit.profile) >= 9


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_joint_fit_with_timescale_noise(seed):
    fit = joint_fit_C(_planted_sweep(noise=0.05, seed=seed), GAMMAS)
    assert abs(fit.scaling_constant - 0.2) <= 0.02


def test_joint_fit_needs_two_gammas():
    with pytest.raises(FitError, match="two distinct gamma"):
        joint_fit_C(_planted_sweep(), [0.5, 0.5])


def test_joint_fit_warns_on_two_wells():
    def sweep(c):
        bump = min(abs(c - 0.1), abs(c - 0.4))
        return {
            0.3: (ETA_GRID, 1.0 * ETA_GRID**-1.0),
            0.8: (ETA_GRID, np.exp(bump) * ETA_GRID**-1.0),
        }

    grid = np.linspace(0.06, 0.5, 12)
    with pytest.warns(RuntimeWarning, match="not unimodal"):
        fit = joint_fit_C(sweep, [0.3, 0.8], c_grid=grid)
    assert fit.ambiguous
    assert min(abs(fit.scaling_constant - 0.1), abs(fit.scaling_constant - 0.4)) < 0.05
