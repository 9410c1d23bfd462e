"""Implicit stepping, trajectory sampling, and the diffusion limit."""

import numpy as np
import pytest

from kfplab import (
    DensityField,
    Field,
    NumericalError,
    ValidationError,
    initial_bump,
    initial_macro_bump,
    initial_macro_gaussian,
    initial_odd_v,
    initial_shifted_gaussian,
    macro_profile,
    norm_mu,
    run_trajectory,
    step_kinetic,
    step_macro,
    total_mass,
    weighted_moment,
)
from kfplab.operators import OperatorSet

_INTERNAL_KEYS = ("_T_hat", "_L_hat", "_sqrt_f", "_w_flat", "_P_hat", "_C",
                  "_mrho", "_N", "_N_sym", "_elliptic_lu", "_Sx_macro",
                  "_Sv", "_mass_v")


# ---------------------------------------------------------------------------
# initial data library
# ---------------------------------------------------------------------------

def test_initial_data_mass_and_positivity(strong_strong):
    _, grid, eq, _ = strong_strong
    mass_star = total_mass(eq.f_star, eq)
    for f0 in (initial_bump(eq, 0.5), initial_odd_v(eq, 0.5)):
        assert np.all(f0.values >= 0.0)
        # the perturbations are odd in v (or x): mass-neutral by symmetry
        assert total_mass(f0, eq) == pytest.approx(mass_star, rel=1e-12)
    f0 = initial_shifted_gaussian(eq, center=(0.5, 0.5), width=1.0,
                                  clip_factor=4.0)
    assert np.all(f0.values >= 0.0)
    assert np.all(f0.values <= 8.0 * eq.f_star.values * (1.0 + 1e-12))
    assert total_mass(f0, eq) == pytest.approx(mass_star, rel=1e-12)
    with pytest.raises(ValidationError):
        initial_bump(eq, 1.5)
    with pytest.raises(ValidationError):
        initial_shifted_gaussian(eq, width=0.0)


def test_initial_macro_data(strong_strong):
    _, grid, eq, _ = strong_strong
    xg = grid.x_grid
    rho0 = initial_macro_gaussian(xg, s0=2.0)
    assert np.sum(xg.weights * rho0.values) == pytest.approx(1.0, rel=1e-6)
    bump = initial_macro_bump(eq, 0.5)
    assert np.sum(xg.weights * bump.values) == pytest.approx(
        np.sum(xg.weights * eq.rho_star.values), rel=1e-12)
    with pytest.raises(ValidationError):
        initial_macro_gaussian(xg, s0=-1.0)


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------

def test_step_kinetic_conserves_mass(strong_strong):
    _, _, eq, ops = strong_strong
    f = initial_bump(eq, 0.5)
    m0 = total_mass(f, eq)
    for scheme in ("implicit_euler", "crank_nicolson"):
        g = step_kinetic(f, 0.05, eq, ops, scheme=scheme)
        assert total_mass(g, eq) == pytest.approx(m0, rel=1e-12)
    with pytest.raises(ValidationError):
        step_kinetic(f, -0.1, eq, ops)
    with pytest.raises(ValidationError):
        step_kinetic(f, 0.05, eq, ops, scheme="explicit_euler")


def test_step_kinetic_decays_distance(strong_strong):
    _, grid, eq, ops = strong_strong
    f = initial_bump(eq, 0.5)
    d0 = norm_mu(Field(f.values - eq.f_star.values, grid), eq)
    g = f
    for _ in range(10):
        g = step_kinetic(g, 0.05, eq, ops)
    d1 = norm_mu(Field(g.values - eq.f_star.values, grid), eq)
    assert d1 < d0


def test_step_macro_mass_and_positivity(strong_strong):
    _, grid, eq, ops = strong_strong
    xg = grid.x_grid
    rho = initial_macro_bump(eq, 0.5)
    m0 = np.sum(xg.weights * rho.values)
    for _ in range(20):
        rho = step_macro(rho, 0.05, eq, ops)
    assert np.sum(xg.weights * rho.values) == pytest.approx(m0, rel=1e-12)
    # the flux discretization is an M-matrix: positivity is preserved
    assert np.min(rho.values) >= -1e-12 * np.max(rho.values)
    with pytest.raises(ValidationError):
        step_macro(rho, 0.05, eq, ops, scheme="crank_nicolson")


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

def test_run_trajectory_kinetic_sampling(strong_strong):
    _, _, eq, ops = strong_strong
    f0 = initial_bump(eq, 0.5)
    rec = run_trajectory(f0, (0.05, 2.0, 4), "kinetic", eq, ops, delta=0.3)
    assert rec.times[0] == 0.0 and rec.times[-1] == pytest.approx(2.0)
    assert rec.times.size == 11          # t = 0, 0.2, ..., 2.0
    assert np.all(np.diff(rec.times) > 0)
    # H is monotone nonincreasing up to a tiny roundoff allowance
    h0 = rec.entropy_H[0]
    assert np.all(np.diff(rec.entropy_H) <= 1e-8 * h0)
    assert np.all(rec.dissipation_D >= -1e-12 * h0)
    assert rec.norm_sq_mu[-1] < rec.norm_sq_mu[0]
    assert np.all(rec.max_principle_ok)
    assert rec.envelope[0] == pytest.approx(rec.norm_sq_mu[0])
    # moments stay below the max-principle bound C^2 J_k(f_star)
    c0 = float(np.max(f0.values / eq.f_star.values))
    for k, series in rec.moments_J.items():
        bound = c0 ** 2 * weighted_moment(eq.f_star, "x", k, eq)
        assert np.max(series) <= bound * (1.0 + 1e-8)


def test_dissipation_matches_entropy_slope(strong_strong):
    # -dH/dt from the sampled series and the assembled D agree up to
    # O(dt) splitting and O(sample^2) differencing errors
    _, _, eq, ops = strong_strong
    f0 = initial_bump(eq, 0.5)
    rec = run_trajectory(f0, (0.01, 1.0, 5), "kinetic", eq, ops, delta=0.3)
    slope = rec.dissipation_from_H
    for i in range(2, rec.times.size - 2):
        assert slope[i] == pytest.approx(rec.dissipation_D[i], rel=0.2)


def test_run_trajectory_macro(strong_strong):
    _, grid, eq, ops = strong_strong
    rho0 = initial_macro_bump(eq, 0.5)
    rec = run_trajectory(rho0, (0.05, 2.0, 4), "macro", eq, ops)
    assert rec.norm_sq_mu[-1] < rec.norm_sq_mu[0]
    assert np.all(rec.max_principle_ok)
    assert np.all(rec.dissipation_D >= -1e-12 * rec.entropy_H[0])


def test_run_trajectory_validation(strong_strong):
    _, _, eq, ops = strong_strong
    f0 = initial_bump(eq, 0.5)
    with pytest.raises(ValidationError):
        run_trajectory(f0, (0.0, 1.0, 1), "kinetic", eq, ops)
    with pytest.raises(ValidationError):
        run_trajectory(f0, (0.05, 1.0, 0), "kinetic", eq, ops)
    with pytest.raises(ValidationError):
        run_trajectory(f0, (0.05, 1.0, 1), "stationary", eq, ops)
    neg = Field(-f0.values, f0.grid)
    with pytest.raises(ValidationError):
        run_trajectory(neg, (0.05, 1.0, 1), "kinetic", eq, ops)


def test_abort_carries_partial_samples(strong_strong, monkeypatch):
    # force a non-finite state after three good steps and check the payload
    import kfplab.evolution as evo

    _, _, eq, ops = strong_strong
    real_solve = evo._solve_with_refinement
    calls = {"n": 0}

    def flaky(lu, system, rhs, what):
        calls["n"] += 1
        sol = real_solve(lu, system, rhs, what)
        if calls["n"] >= 4:
            sol = sol * np.nan
        return sol

    monkeypatch.setattr(evo, "_solve_with_refinement", flaky)
    f0 = initial_bump(eq, 0.5)
    with pytest.raises(NumericalError) as err:
        run_trajectory(f0, (0.05, 2.0, 1), "kinetic", eq, ops, delta=0.3)
    assert err.value.last_good_time == pytest.approx(0.15)
    partial = err.value.partial_samples
    assert len(partial["times"]) == 4    # t = 0, 0.05, 0.10, 0.15
    assert len(partial["norm_sq_mu"]) == 4


# ---------------------------------------------------------------------------
# diffusion limit
# ---------------------------------------------------------------------------

def _scaled_operator_set(eq, ops, eps):
    """Parabolic rescaling: transport at 1/eps, collision at 1/eps^2."""
    internals = {key: getattr(ops, key) for key in _INTERNAL_KEYS}
    internals["_T_hat"] = (ops._T_hat / eps).tocsr()
    internals["_L_hat"] = (ops._L_hat / eps ** 2).tocsr()
    return OperatorSet(eq, ops.collision_L / eps ** 2, ops.transport_T / eps,
                       ops.macro_generator, ops.elliptic_matrix, internals)


def test_kinetic_tracks_macro_in_diffusion_scaling(strong_strong):
    # well-prepared data under parabolic scaling follow the macroscopic
    # Fokker-Planck flow within O(eps) once the initial layer has relaxed
    _, grid, eq, ops = strong_strong
    eps = 0.2
    scaled = _scaled_operator_set(eq, ops, eps)
    xg = grid.x_grid
    u0 = 1.0 + 0.3 * np.cos(np.pi * xg.nodes / (2.0 * xg.half_width))
    f = Field(u0[:, None] * eq.f_star.values, grid)
    f = Field(f.values / total_mass(f, eq), grid)
    rho = DensityField(macro_profile(f, eq).values * eq.rho_star.values,
                       xg)

    dt = 0.005
    errs = []
    wrho = xg.weights * eq.rho_star.values
    for n in range(1, 401):
        f = step_kinetic(f, dt, eq, scaled)
        rho = step_macro(rho, dt, eq, ops)
        if n % 80 == 0:  # t = 0.4, 0.8, ..., 2.0
            u_kin = macro_profile(f, eq).values
            u_mac = rho.values / eq.rho_star.values
            dev_kin = u_kin - np.sum(wrho * u_kin) / np.sum(wrho)
            dev_mac = u_mac - np.sum(wrho * u_mac) / np.sum(wrho)
            num = np.sqrt(np.sum(wrho * (dev_kin - dev_mac) ** 2))
            den = np.sqrt(np.sum(wrho * dev_mac ** 2))
            errs.append(num / den)
    assert max(errs) <= 0.10, errs
