"""Potentials, the Gibbs state, the diffusion coefficient, and moment closed forms.

The energy is E(x,v) = <v>^beta/beta + phi(x) with <z> = sqrt(1+z^2) and phi
one of: power <x>^alpha/alpha, logarithmic gamma*log<x>, or zero. The Gibbs
state f_star = Z^-1 e^{-E} factorizes as rho_star(x) * g_star(v); when e^{-phi}
is not integrable (zero mode, logarithmic with gamma <= d) the raw weights are
kept and `integrable` is False — the measure dmu stays well defined on the box.
"""

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .errors import NumericalError, TruncationError, ValidationError
from .grids import DensityField, Field

_X_MODES = ("power", "logarithmic", "zero")


class PotentialSpec:
    """Confinement regime: x_mode + its parameter, and the velocity exponent beta."""

    def __init__(self, x_mode, beta, alpha=None, gamma=None):
        if x_mode not in _X_MODES:
            raise ValidationError("x_mode must be one of %s" % (_X_MODES,))
        beta = float(beta)
        if beta <= 0:
            raise ValidationError("beta must be positive")
        if x_mode == "power":
            if alpha is None or float(alpha) <= 0:
                raise ValidationError("power mode needs alpha > 0")
            alpha = float(alpha)
        elif alpha is not None:
            raise ValidationError("alpha is only meaningful in power mode")
        if x_mode == "logarithmic":
            if gamma is None or float(gamma) <= 0:
                raise ValidationError("logarithmic mode needs gamma > 0")
            gamma = float(gamma)
        elif gamma is not None:
            raise ValidationError("gamma is only meaningful in logarithmic mode")
        self.x_mode = x_mode
        self.beta = beta
        self.alpha = alpha
        self.gamma = gamma

    def is_integrable(self, d=1):
        # logarithmic confinement only beats the volume growth for gamma > d
        if self.x_mode == "power":
            return True
        if self.x_mode == "logarithmic":
            return self.gamma > d
        return False

    def __repr__(self):
        if self.x_mode == "power":
            return "PotentialSpec(power alpha=%g, beta=%g)" % (self.alpha, self.beta)
        if self.x_mode == "logarithmic":
            return "PotentialSpec(log gamma=%g, beta=%g)" % (self.gamma, self.beta)
        return "PotentialSpec(zero, beta=%g)" % self.beta


def eval_potential(spec, variable, point):
    """phi(point) for variable='x', psi(point) = <point>^beta/beta for variable='v'."""
    z = np.asarray(point, dtype=float)
    bracket = np.sqrt(1.0 + z ** 2)
    if variable == "v":
        out = bracket ** spec.beta / spec.beta
    elif variable == "x":
        if spec.x_mode == "power":
            out = bracket ** spec.alpha / spec.alpha
        elif spec.x_mode == "logarithmic":
            out = spec.gamma * np.log(bracket)
        else:
            out = np.zeros_like(z)
    else:
        raise ValidationError("variable must be 'x' or 'v'")
    if np.isscalar(point):
        return float(out)
    return out


class Equilibrium:
    """Nodal Gibbs state plus everything the weighted measure needs.

    Beyond the contract fields (f_star, rho_star, z_constant, sigma, integrable)
    it caches the normalized v-factor used by the projection Pi and the
    mu-weights w_ij / f_star_ij, and carries sigma in both conventions.
    """

    def __init__(self, spec, grid, f_star, rho_star, g_star_v, z_constant,
                 sigma, sigma_normalized, integrable, g_scale, rho_scale):
        self.spec = spec
        self.grid = grid
        self.f_star = f_star
        self.rho_star = rho_star
        self.g_star_v = g_star_v          # the v-factor as stored in f_star
        self.g_scale = g_scale            # g_star_v = g_scale * e^{-psi}
        self.rho_scale = rho_scale        # rho_star = rho_scale * e^{-phi}
        self.z_constant = z_constant
        self.sigma = sigma                # unnormalized v-measure convention
        self.sigma_normalized = sigma_normalized   # per unit v-mass
        self.integrable = integrable
        self.g_mass = float(np.sum(grid.v_grid.weights * g_star_v))
        self.g_hat = g_star_v / self.g_mass   # discretely normalized v-profile
        self.min_f_star = float(f_star.values.min())
        self.mu_weight = grid.weight_matrix / f_star.values
        self.mu_weight.setflags(write=False)


def build_equilibrium(spec, grid, truncation_tol=1e-8):
    """Assemble the Gibbs state on the box; raises TruncationError if the tails leak.

    The boundary check compares the decaying factors at the box edge against
    their maximum; fat-tailed regimes (beta < 1, alpha < 1, logarithmic) need
    wider boxes and/or an explicitly relaxed tolerance.
    """
    xg, vg = grid.x_grid, grid.v_grid
    psi = eval_potential(spec, "v", vg.nodes)
    phi = eval_potential(spec, "x", xg.nodes)
    gv_raw = np.exp(-psi)
    ex_raw = np.exp(-phi)

    ratio_v = max(gv_raw[0], gv_raw[-1]) / gv_raw.max()
    if ratio_v > truncation_tol:
        raise TruncationError(
            "e^{-psi} boundary/max ratio %.3e exceeds %.1e; widen the v-box"
            % (ratio_v, truncation_tol))
    integrable = spec.is_integrable(d=1)
    if integrable:
        ratio_x = max(ex_raw[0], ex_raw[-1]) / ex_raw.max()
        if ratio_x > truncation_tol:
            raise TruncationError(
                "e^{-phi} boundary/max ratio %.3e exceeds %.1e; widen the x-box"
                % (ratio_x, truncation_tol))

    iv = float(np.sum(vg.weights * gv_raw))
    ix = float(np.sum(xg.weights * ex_raw))
    z_constant = ix * iv
    if integrable:
        g_scale, rho_scale = 1.0 / iv, 1.0 / ix
    else:
        # keep raw weights: no global equilibrium, but dmu is still defined
        g_scale, rho_scale = 1.0, 1.0
    rho = ex_raw * rho_scale
    gv = gv_raw * g_scale
    f_star = Field(np.outer(rho, gv), grid)
    if f_star.values.min() <= 0.0:
        raise NumericalError("f_star underflowed to zero on this box")

    sigma = diffusion_sigma(spec.beta, 1)
    sigma_normalized = sigma / psi_mass(spec.beta, 1)
    return Equilibrium(spec, grid, f_star, DensityField(rho, xg), gv,
                       z_constant, sigma, sigma_normalized, integrable,
                       g_scale, rho_scale)


# ---------------------------------------------------------------------------
# closed-form coefficients (general dimension, adaptive radial quadrature)
# ---------------------------------------------------------------------------

def _surface_factor(d):
    # |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)
    return 2.0 * np.pi ** (0.5 * d) / gamma_fn(0.5 * d)


def _radial_quad(integrand, d):
    val, err = integrate.quad(integrand, 0.0, np.inf, limit=200,
                              epsabs=1e-13, epsrel=1e-12)
    if not np.isfinite(val) or err > 1e-9 * max(abs(val), 1.0):
        raise NumericalError("radial quadrature did not converge (err=%.2e)" % err)
    return _surface_factor(d) * val


def diffusion_sigma(beta, d):
    """sigma = (1/d) * integral over R^d of |v|^2 <v>^{2 beta - 4} e^{-<v>^beta/beta} dv."""
    beta = float(beta)
    d = int(d)
    if beta <= 0 or d < 1:
        raise ValidationError("need beta > 0 and d >= 1")

    def integrand(r):
        br = np.sqrt(1.0 + r * r)
        return r ** (d + 1) * br ** (2.0 * beta - 4.0) * np.exp(-br ** beta / beta)

    return _radial_quad(integrand, d) / d


def psi_mass(beta, d):
    """integral over R^d of e^{-<v>^beta/beta} dv (the local-equilibrium normalization)."""
    beta = float(beta)
    d = int(d)
    if beta <= 0 or d < 1:
        raise ValidationError("need beta > 0 and d >= 1")

    def integrand(r):
        br = np.sqrt(1.0 + r * r)
        return r ** (d - 1) * np.exp(-br ** beta / beta)

    return _radial_quad(integrand, d)


def moment_closed_form(k, eta, d):
    """(exact, upper_bound) for M = integral of <x>^k e^{-<x>^eta/eta} over R^d.

    exact is adaptive quadrature; the bound is the Gamma-function expression
    max{1, 2^{k/2-1}} (2 pi^{d/2}/Gamma(d/2)) eta^{(d-eta)/eta}
        (Gamma(d/eta) + eta^{k/eta} Gamma((d+k)/eta)).
    """
    k = float(k)
    eta = float(eta)
    d = int(d)
    if k < 0 or eta <= 0 or d < 1:
        raise ValidationError("need k >= 0, eta > 0, d >= 1")

    def integrand(r):
        br = np.sqrt(1.0 + r * r)
        return r ** (d - 1) * br ** k * np.exp(-br ** eta / eta)

    exact = _radial_quad(integrand, d)
    with np.errstate(over="raise"):
        try:
            head = max(1.0, 2.0 ** (0.5 * k - 1.0))
            gammas = gamma_fn(d / eta) + eta ** (k / eta) * gamma_fn((d + k) / eta)
            bound = head * _surface_factor(d) * eta ** ((d - eta) / eta) * gammas
        except (FloatingPointError, OverflowError):
            raise ValidationError("Gamma arguments out of range for (k=%g, eta=%g)" % (k, eta))
    if not np.isfinite(bound):
        raise ValidationError("Gamma arguments out of range for (k=%g, eta=%g)" % (k, eta))
    return exact, bound
