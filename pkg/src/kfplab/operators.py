"""Discrete L, T, Pi, the auxiliary elliptic solve, and the twist operator A.

Construction notes (the structural identities everything rests on):

* Work in q = f/sqrt(f_star) coordinates, where <f,g>_mu becomes the plain
  weighted product sum(w_ij q_f q_g) with trapezoid weights w_ij = wx_i wv_j.

* Transport: T_hat = psi_t(v) * Dx - phi_t(x) * Dv with Dx = Wx^-1 Kx, where
  Kx is the antisymmetric centered-difference core (zero extension at the
  boundary rows). Because Wx cancels against the quadrature weights, T_hat is
  exactly skew in the weighted product. The coefficients are the DISCRETE
  logarithmic derivatives psi_t = -2 (Dv sqrt(g_star))/sqrt(g_star) (and the
  analogue in x), so T_hat sqrt(f_star) = 0 holds with floating-point-exact
  cancellation: mass is conserved to solver precision, not to O(spacing^2).
  psi_t = psi' + O(spacing^2), so consistency is unaffected.

* Collision: per x-slice, in h = f/f_star coordinates, the flux form
  -Mv^-1 Gv^T E Gv with midpoint weights E ~ e^{-psi(v_{j+1/2})}. Exactly
  symmetric, nonpositive, annihilates constants (so L f_star = 0 exactly),
  conserves mass per slice exactly.

* The macroscopic operator (T Pi)*(T Pi) restricted to local equilibria
  u f_star is assembled as the exact sparse composition N = Mrho^-1 C^T W C
  with C = T_hat P_hat. elliptic_matrix = I + N, so apply_A realizes
  (1 + (TPi)*(TPi))^-1 (TPi)* exactly in the discrete Hilbert space and the
  abstract operator estimates hold to roundoff.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .equilibria import eval_potential
from .errors import InvalidEquilibriumError, NumericalError
from .grids import DensityField, Field


def _antisym_core(n):
    # (K q)_i = (q_{i+1} - q_{i-1}) / 2 with zero extension outside
    off = 0.5 * np.ones(n - 1)
    return sp.diags([off, -off], [1, -1], format="csr")


def _forward_diff(n):
    # faces j+1/2: (G q)_j = q_{j+1} - q_j
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1],
                    shape=(n - 1, n), format="csr")


def collision_v_forms(eq):
    """(stiffness S_v, mass vector wv*g) of the v-direction Dirichlet form.

    S_v is the exact quadratic form behind -<Lf, f>_mu per x-slice:
    -<Lf,f> = sum_i wx_i rho_i * h_i^T S_v h_i with h = f/f_star. Shared with
    the spectral module so the microscopic coercivity constant is an exact
    lower bound for the very same discrete form.
    """
    vg = eq.grid.v_grid
    n = vg.count
    dv = vg.spacing
    mid = 0.5 * (vg.nodes[:-1] + vg.nodes[1:])
    # face weights share the scale of the stored g_star_v factor
    face = eq.g_scale * np.exp(-eval_potential(eq.spec, "v", mid))
    G = _forward_diff(n)
    S = (G.T @ sp.diags(face / dv) @ G).tocsr()
    mass = vg.weights * eq.g_star_v
    return S, mass


class OperatorSet:
    """Immutable bundle of assembled discrete operators for one equilibrium."""

    def __init__(self, eq, collision_L, transport_T, macro_generator,
                 elliptic_matrix, internals):
        self.eq = eq
        self.collision_L = collision_L        # f-space sparse matrix
        self.transport_T = transport_T        # f-space sparse matrix
        self.macro_generator = macro_generator
        self.elliptic_matrix = elliptic_matrix  # I + N on densities
        for key, val in internals.items():
            setattr(self, key, val)
        self._step_cache = {}

    # -- convenience applications on Fields ---------------------------------
    def apply_collision(self, f):
        return Field((self._L_hat @ (f.values.ravel() / self._sqrt_f)
                      * self._sqrt_f).reshape(f.grid.shape), f.grid)

    def apply_transport(self, f):
        return Field((self._T_hat @ (f.values.ravel() / self._sqrt_f)
                      * self._sqrt_f).reshape(f.grid.shape), f.grid)


def assemble(eq, spec, grid):
    """Build the OperatorSet; raises InvalidEquilibriumError on nonpositive weights."""
    xg, vg = grid.x_grid, grid.v_grid
    nx, nv = xg.count, vg.count
    rho = eq.rho_star.values
    gv = eq.g_star_v
    if rho.min() <= 0 or gv.min() <= 0:
        raise InvalidEquilibriumError("equilibrium weights must be positive")

    r = np.sqrt(rho)
    s = np.sqrt(gv)
    sqrt_f = np.outer(r, s).ravel()
    w_flat = grid.weight_matrix.ravel()

    # --- transport in q coordinates ---------------------------------------
    Dx = sp.diags(1.0 / xg.weights) @ _antisym_core(nx)
    Dv = sp.diags(1.0 / vg.weights) @ _antisym_core(nv)
    psi_t = -2.0 * (Dv @ s) / s
    phi_t = -2.0 * (Dx @ r) / r
    T_hat = (sp.diags(np.tile(psi_t, nx)) @ sp.kron(Dx, sp.identity(nv), format="csr")
             - sp.diags(np.repeat(phi_t, nv)) @ sp.kron(sp.identity(nx), Dv, format="csr"))
    T_hat = T_hat.tocsr()

    # --- collision in q coordinates (x-independent slice operator) --------
    Sv, mass_v = collision_v_forms(eq)
    Lv_hat = -sp.diags(1.0 / (vg.weights * s)) @ Sv @ sp.diags(1.0 / s)
    L_hat = sp.kron(sp.identity(nx), Lv_hat, format="csr")

    # f-space versions (same sparsity; entries scaled by sqrt(f_r/f_c))
    Dsf = sp.diags(sqrt_f)
    Dsf_inv = sp.diags(1.0 / sqrt_f)
    collision_L = (Dsf @ L_hat @ Dsf_inv).tocsr()
    transport_T = (Dsf @ T_hat @ Dsf_inv).tocsr()

    # --- macroscopic pieces -------------------------------------------------
    # exact composition N = Mrho^-1 C^T W C, C = T_hat P_hat
    P_hat = sp.kron(sp.diags(r), sp.csr_matrix(s.reshape(nv, 1)), format="csr")
    C = (T_hat @ P_hat).tocsr()
    mrho = eq.g_mass * xg.weights * rho
    N_sym = (C.T @ sp.diags(w_flat) @ C).tocsr()     # = Mrho N, symmetric PSD
    N = (sp.diags(1.0 / mrho) @ N_sym).tocsr()
    elliptic_matrix = (sp.identity(nx, format="csr") + N).tocsr()
    elliptic_sym = (sp.diags(mrho) + N_sym).tocsc()  # SPD; factorize this one

    # sigma-scaled Fokker-Planck generator on densities, flux form
    xmid = 0.5 * (xg.nodes[:-1] + xg.nodes[1:])
    face_x = eq.rho_scale * np.exp(-eval_potential(eq.spec, "x", xmid))
    Gx = _forward_diff(nx)
    Sx = (Gx.T @ sp.diags(face_x / xg.spacing) @ Gx).tocsr()
    macro_generator = (-eq.sigma_normalized
                       * sp.diags(1.0 / xg.weights) @ Sx @ sp.diags(1.0 / rho)).tocsr()

    internals = {
        "_T_hat": T_hat,
        "_L_hat": L_hat,
        "_sqrt_f": sqrt_f,
        "_w_flat": w_flat,
        "_P_hat": P_hat,
        "_C": C,
        "_mrho": mrho,
        "_N": N,
        "_N_sym": N_sym,
        "_elliptic_lu": splu(elliptic_sym),
        "_Sx_macro": Sx,
        "_Sv": Sv,
        "_mass_v": mass_v,
    }
    return OperatorSet(eq, collision_L, transport_T, macro_generator,
                       elliptic_matrix, internals)


# ---------------------------------------------------------------------------
# projection, elliptic solve, twist operator
# ---------------------------------------------------------------------------

def apply_Pi(f, eq):
    """Pi f = rho_f(x) g_star(v)/int(g_star): idempotent, self-adjoint in dmu."""
    rho_f = f.values @ eq.grid.v_grid.weights
    return Field(np.outer(rho_f, eq.g_hat), f.grid)


def macro_profile(f, eq):
    """u with Pi f = u f_star (the local-equilibrium coefficient of f)."""
    rho_f = f.values @ eq.grid.v_grid.weights
    return DensityField(rho_f / (eq.g_mass * eq.rho_star.values), eq.grid.x_grid)


def solve_elliptic(rhs, eq, ops):
    """Solve (I + N) u = rhs on densities to relative residual < 1e-10.

    N is the exact discrete (TPi)*(TPi) on local-equilibrium profiles; the
    system is solved through its symmetrized SPD form with one round of
    iterative refinement before giving up.
    """
    b = rhs.values
    u = ops._elliptic_lu.solve(ops._mrho * b)
    scale = np.linalg.norm(b)
    if scale == 0.0:
        return DensityField(np.zeros_like(b), eq.grid.x_grid)
    for _ in range(2):
        res = b - (u + ops._N @ u)
        if np.linalg.norm(res) < 1e-10 * scale:
            return DensityField(u, eq.grid.x_grid)
        u = u + ops._elliptic_lu.solve(ops._mrho * res)
    res = np.linalg.norm(b - (u + ops._N @ u))
    raise NumericalError("elliptic solve stalled at relative residual %.2e"
                         % (res / scale))


def apply_A(f, eq, ops):
    """A f = (1 + (TPi)*(TPi))^-1 (TPi)* f, returned as the field u f_star."""
    q = f.values.ravel() / ops._sqrt_f
    tq = ops._T_hat @ q
    tf = (tq * ops._sqrt_f).reshape(f.grid.shape)
    rho_tf = tf @ eq.grid.v_grid.weights
    u_g = -rho_tf / (eq.g_mass * eq.rho_star.values)
    u = solve_elliptic(DensityField(u_g, eq.grid.x_grid), eq, ops)
    return Field(u.values[:, np.newaxis] * eq.f_star.values, f.grid)


def atpi_quadratic_form(f, eq, ops):
    """<A T Pi f, Pi f>_mu through its exact two-term expression.

    With u solving (I + N) u = u_f this equals ||T Pi (u f_star)||_mu^2 +
    ||(TPi)*(TPi)(u f_star)||_mu^2 — the discrete counterpart of
    sigma int |grad u|^2 rho_star + sigma^2 int |div(rho_star grad u)|^2 / rho_star.
    """
    u_f = macro_profile(f, eq)
    u = solve_elliptic(u_f, eq, ops)
    cu = ops._C @ u.values
    term1 = float(np.sum(ops._w_flat * cu * cu))
    nu = (ops._C.T @ (ops._w_flat * cu)) / ops._mrho
    term2 = float(np.sum(ops._mrho * nu * nu))
    return term1 + term2
