"""Constant algebra (delta_star, lambda), the twisted entropy H, and its dissipation.

H[f] = 1/2 ||f||_mu^2 + delta <Af, f>_mu is equivalent to the squared norm for
0 <= delta < 2 and decays at the explicit rate lambda produced here, provided
delta < delta_star. The rate comes from a quadratic feasibility condition:
lambda/2 must keep the form

    (lambda_m - delta - s) X^2 - delta (c_M + s) X Y + (delta K_M - s) Y^2

positive semidefinite, with X = ||(1-Pi)f||_beta and Y = <ATPi f, Pi f>^(1/2)
and K_M = lambda_M / (1 + lambda_M).
"""

import numpy as np

from .errors import InfeasibleError, NumericalError, ValidationError
from .grids import Field, inner_product_mu, norm_beta, norm_mu
from .operators import apply_A, apply_Pi, atpi_quadratic_form
from .spectral import macroscopic_gap, microscopic_coercivity_constant

_WINDOW_SLACK = 1e-9


class HypoConstants:
    """The constant bundle (lambda_m, lambda_M, c_M, delta_star, delta, lambda_rate)."""

    def __init__(self, lambda_m, lambda_M, c_M, delta_star_value, delta,
                 lambda_rate_value):
        vals = [lambda_m, lambda_M, c_M, delta_star_value, delta,
                lambda_rate_value]
        if any(not np.isfinite(v) for v in vals):
            raise ValidationError("constants must be finite")
        if min(lambda_m, lambda_M, c_M, delta_star_value, delta) <= 0:
            raise ValidationError("constants must be positive")
        if lambda_rate_value < 0:
            raise ValidationError("lambda_rate must be nonnegative")
        if delta_star_value >= lambda_m or delta_star_value >= 2.0:
            raise ValidationError("delta_star must be < lambda_m and < 2")
        if not delta < delta_star_value:
            raise ValidationError("delta must lie in (0, delta_star)")
        k_M = lambda_M / (1.0 + lambda_M)
        window = min(2.0 * (lambda_m - delta), 2.0 * delta * k_M)
        if lambda_rate_value > window + _WINDOW_SLACK:
            raise ValidationError("lambda_rate outside its admissible window")
        self.lambda_m = float(lambda_m)
        self.lambda_M = float(lambda_M)
        self.c_M = float(c_M)
        self.delta_star = float(delta_star_value)
        self.delta = float(delta)
        self.lambda_rate = float(lambda_rate_value)

    def to_dict(self):
        return {
            "lambda_m": self.lambda_m,
            "lambda_M": self.lambda_M,
            "c_M": self.c_M,
            "delta_star": self.delta_star,
            "delta": self.delta,
            "lambda_rate": self.lambda_rate,
        }

    def __repr__(self):
        return ("HypoConstants(lambda_m=%.6g, lambda_M=%.6g, c_M=%.6g, "
                "delta_star=%.6g, delta=%.6g, lambda_rate=%.6g)"
                % (self.lambda_m, self.lambda_M, self.c_M, self.delta_star,
                   self.delta, self.lambda_rate))


# ---------------------------------------------------------------------------
# closed-form constant algebra
# ---------------------------------------------------------------------------

def delta_star(lambda_m, lambda_M, c_M):
    """delta_star = 4 K_M lambda_m / (4 K_M + c_M^2), always < lambda_m."""
    if min(lambda_m, lambda_M, c_M) <= 0:
        raise ValidationError("delta_star needs positive inputs")
    k_M = lambda_M / (1.0 + lambda_M)
    return 4.0 * k_M * lambda_m / (4.0 * k_M + c_M ** 2)


def _rate_quadratic_coeffs(lambda_m, lambda_M, c_M, delta):
    # delta^2 (c_M + s)^2 - 4 (lambda_m - delta - s)(delta K_M - s) = 0, s = lambda/2
    k_M = lambda_M / (1.0 + lambda_M)
    a2 = delta ** 2 - 4.0
    a1 = 2.0 * delta ** 2 * c_M + 4.0 * (lambda_m - delta) + 4.0 * delta * k_M
    a0 = delta ** 2 * c_M ** 2 - 4.0 * (lambda_m - delta) * delta * k_M
    return a2, a1, a0, k_M


def lambda_rate(lambda_m, lambda_M, c_M, delta):
    """The decay rate lambda = 2 s with s the admissible root of the quadratic.

    Admissible means s in [0, min(lambda_m - delta, delta K_M)], the window
    where both diagonal coefficients of the (X, Y) form are nonnegative; for
    0 < delta < delta_star exactly one root lands there. The returned value
    is checked against the quadratic (residual < 1e-12) and the form is
    verified positive semidefinite.
    """
    if min(lambda_m, lambda_M, c_M) <= 0:
        raise ValidationError("lambda_rate needs positive constants")
    ds = delta_star(lambda_m, lambda_M, c_M)
    if not 0.0 < delta < ds:
        raise ValidationError("delta must lie in (0, delta_star=%g)" % ds)
    a2, a1, a0, k_M = _rate_quadratic_coeffs(lambda_m, lambda_M, c_M, delta)
    s_max = min(lambda_m - delta, delta * k_M)
    roots = np.roots([a2, a1, a0])
    real = [float(r.real) for r in roots if abs(r.imag) <= 1e-10 * max(1.0, abs(r))]
    admissible = [s for s in real if -_WINDOW_SLACK <= s <= s_max + _WINDOW_SLACK]
    if not admissible:
        raise InfeasibleError(
            "no root of the rate quadratic in [0, %g]; constants inconsistent"
            % s_max)
    s = min(admissible)
    # one Newton polish, then certify
    deriv = 2.0 * a2 * s + a1
    if deriv != 0.0:
        s = s - (a2 * s * s + a1 * s + a0) / deriv
    s = min(max(s, 0.0), s_max)
    scale = max(abs(a2 * s * s), abs(a1 * s), abs(a0), 1e-300)
    residual = abs(a2 * s * s + a1 * s + a0) / scale
    if residual >= 1e-12:
        raise NumericalError("rate quadratic residual %.3e too large" % residual)
    _verify_psd_form(lambda_m, c_M, delta, k_M, s)
    return 2.0 * s


def _verify_psd_form(lambda_m, c_M, delta, k_M, s):
    diag_x = lambda_m - delta - s
    diag_y = delta * k_M - s
    det = 4.0 * diag_x * diag_y - delta ** 2 * (c_M + s) ** 2
    scale = max(abs(diag_x), abs(diag_y), delta * (c_M + s), 1.0)
    if diag_x < -1e-12 * scale or diag_y < -1e-12 * scale \
            or det < -1e-12 * scale ** 2:
        raise InfeasibleError("rate form not positive semidefinite at s=%g" % s)


# ---------------------------------------------------------------------------
# entropy, dissipation, envelopes
# ---------------------------------------------------------------------------

def entropy_H(f, delta, eq, ops):
    """H[f] = 1/2 ||f||_mu^2 + delta <Af, f>_mu (sandwiched by (2 +- delta)/4 ||f||^2)."""
    if not 0.0 <= delta < 2.0:
        raise ValidationError("entropy needs 0 <= delta < 2")
    half_sq = 0.5 * inner_product_mu(f, f, eq)
    if delta == 0.0:
        return half_sq
    af = apply_A(f, eq, ops)
    return half_sq + delta * inner_product_mu(af, f, eq)


def dissipation_components(f, delta, eq, ops):
    """All five inner products of D[f], their delta-combination, and the
    coercivity denominator ||(1-Pi)f||_beta^2 + <ATPi f, Pi f>_mu.

    D[f] = -<Lf,f> + delta <ATPi f, f>
           - delta (<TAf,f> - <AT(1-Pi)f,f> + <ALf,f>).
    """
    pi_f = apply_Pi(f, eq)
    micro = Field(f.values - pi_f.values, f.grid)
    lf = ops.apply_collision(f)

    minus_lff = -inner_product_mu(lf, f, eq)
    atpi_ff = inner_product_mu(apply_A(ops.apply_transport(pi_f), eq, ops), f, eq)
    ta_ff = inner_product_mu(ops.apply_transport(apply_A(f, eq, ops)), f, eq)
    at_micro_ff = inner_product_mu(apply_A(ops.apply_transport(micro), eq, ops),
                                   f, eq)
    al_ff = inner_product_mu(apply_A(lf, eq, ops), f, eq)

    dissipation = (minus_lff + delta * atpi_ff
                   - delta * (ta_ff - at_micro_ff + al_ff))
    kappa_den = (norm_beta(micro, eq.spec.beta, eq) ** 2
                 + atpi_quadratic_form(f, eq, ops))
    return {
        "minus_Lf_f": minus_lff,
        "ATPi_f_f": atpi_ff,
        "TA_f_f": ta_ff,
        "AT_micro_f_f": at_micro_ff,
        "AL_f_f": al_ff,
        "D": dissipation,
        "kappa_denominator": kappa_den,
        "delta": float(delta),
    }


def decay_envelope(kind, h0, rate_or_pair, times):
    """Pointwise decay envelope: h0 e^{-rate t} or h0 (1 + C h0^{1/zeta} t)^{-zeta}."""
    times = np.asarray(times, dtype=float)
    if kind == "exponential":
        rate = float(rate_or_pair)
        return h0 * np.exp(-rate * times)
    if kind == "algebraic":
        c, zeta = (float(rate_or_pair[0]), float(rate_or_pair[1]))
        return h0 * (1.0 + c * h0 ** (1.0 / zeta) * times) ** (-zeta)
    raise ValidationError("envelope kind must be 'exponential' or 'algebraic'")


# ---------------------------------------------------------------------------
# the assembled constant bundle
# ---------------------------------------------------------------------------

def _smooth(values, rounds):
    out = values
    for _ in range(rounds):
        pad = np.pad(out, 1, mode="edge")
        out = 0.25 * (pad[:-2, 1:-1] + pad[2:, 1:-1]
                      + pad[1:-1, :-2] + pad[1:-1, 2:])
    return out


def _random_suite(eq, sample_count, seed):
    """Probe states in L^2(dmu), three flavors per cycle.

    Isotropic noise alone never exercises the smoothing operators (A is
    macro-valued, so rough fields give vanishing ratios); the suite mixes in
    smoothed relative perturbations u f_star and transport-aligned
    macro + psi'(v) modes, which is where the auxiliary-operator suprema
    actually live.
    """
    rng = np.random.default_rng(seed)
    grid = eq.grid
    shape = grid.shape
    x = grid.x_grid.nodes[:, None]
    v = grid.v_grid.nodes[None, :]
    psi_prime = v * np.sqrt(1.0 + v ** 2) ** (eq.spec.beta - 2.0)
    fstar = eq.f_star.values
    sqrt_f = np.sqrt(fstar)
    fields = []
    for i in range(sample_count):
        kind = i % 3
        if kind == 0:        # isotropic in the weighted Hilbert space
            vals = rng.standard_normal(shape) * sqrt_f
        elif kind == 1:      # smooth relative perturbation
            u = _smooth(rng.standard_normal(shape), 4 ** (1 + (i // 3) % 3))
            vals = u * fstar
        else:                # macro profile plus first-velocity-moment mode
            freq = rng.uniform(0.2, 1.5, size=2)
            phase = rng.uniform(0.0, 2.0 * np.pi, size=2)
            u = (np.cos(freq[0] * x + phase[0])
                 + np.cos(freq[1] * x + phase[1]) * psi_prime)
            vals = u * fstar
        fields.append(Field(vals, grid))
    return fields


def bounded_auxiliary_ratio(f, eq, ops):
    """(||AT(1-Pi)f|| + ||ALf||) / ||(1-Pi)f||_beta, the measured H4 ratio."""
    pi_f = apply_Pi(f, eq)
    micro = Field(f.values - pi_f.values, f.grid)
    denom = norm_beta(micro, eq.spec.beta, eq)
    if denom == 0.0:
        raise ValidationError("f must have a microscopic part")
    at_micro = apply_A(ops.apply_transport(micro), eq, ops)
    al = apply_A(ops.apply_collision(f), eq, ops)
    return (norm_mu(at_micro, eq) + norm_mu(al, eq)) / denom


def compute_constants(eq, ops, delta=None, sample_count=64, seed=0):
    """Assemble HypoConstants for an equilibrium and its operators.

    lambda_m and lambda_M are the exact same-grid coercivity constants; c_M
    is 1.5 x the supremum of the measured H4 ratio over a seeded random
    suite (the raw supremum is exposed as .c_M_empirical). delta defaults to
    the midpoint delta_star / 2.
    """
    lam_m = microscopic_coercivity_constant(eq)
    lam_M = macroscopic_gap(ops)
    sup_ratio = max(bounded_auxiliary_ratio(f, eq, ops)
                    for f in _random_suite(eq, sample_count, seed))
    c_M = 1.5 * sup_ratio
    ds = delta_star(lam_m, lam_M, c_M)
    if delta is None:
        delta = 0.5 * ds
    elif not 0.0 < delta < ds:
        raise ValidationError("delta must lie in (0, delta_star=%g)" % ds)
    rate = lambda_rate(lam_m, lam_M, c_M, delta)
    constants = HypoConstants(lam_m, lam_M, c_M, ds, delta, rate)
    constants.c_M_empirical = sup_ratio
    return constants


def empirical_kappa(eq, ops, delta=None, sample_count=100, seed=1):
    """min_f D[f] / (||(1-Pi)f||_beta^2 + <ATPi f, Pi f>) over a random suite.

    A strictly positive value is the numerical content of the dissipation
    coercivity lemma for the chosen delta.
    """
    if delta is None:
        delta = 0.5 * compute_constants(eq, ops).delta_star
    ratios = []
    for f in _random_suite(eq, sample_count, seed):
        rec = dissipation_components(f, delta, eq, ops)
        if rec["kappa_denominator"] > 0.0:
            ratios.append(rec["D"] / rec["kappa_denominator"])
    if not ratios:
        raise NumericalError("no admissible sample in the kappa suite")
    return min(ratios)


def transport_coefficient_integrals(eq):
    """The v-integrals behind the beta < 1 transport bound, on the grid.

    kappa_sq = sum wv psi'(v)^2 <v>^{2-2 beta} g / g_mass  (<= 1 + O(dv^2))
    sigma_hat = sum wv psi'(v)^2 g / g_mass  (the normalized diffusion sigma)
    """
    vg = eq.grid.v_grid
    v = vg.nodes
    bracket = np.sqrt(1.0 + v ** 2)
    psi_prime = v * bracket ** (eq.spec.beta - 2.0)
    ghat = vg.weights * eq.g_star_v / eq.g_mass
    kappa_sq = float(np.sum(ghat * psi_prime ** 2
                            * bracket ** (2.0 - 2.0 * eq.spec.beta)))
    sigma_hat = float(np.sum(ghat * psi_prime ** 2))
    return {"kappa_sq": kappa_sq, "sigma_hat": sigma_hat}
