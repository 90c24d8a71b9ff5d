"""Zero-curvature (AKNS) matrices for the Maxwell-Bloch system.

Provides the generator of the time equation, the generators of the two
half-plane x-equations (which involve the Cauchy transform of the medium
matrix F against the weight n), and finite-difference residual checks of
the evolution equations themselves.
"""

from dataclasses import dataclass

import numpy as np

from .broadening import average_weights, cauchy_pwlin, eta_boundary, eta_eval, pv_cauchy_pwlin
from .errors import GridCoverage, StencilTooCoarse
from .mat2 import SIGMA3

COVERAGE_THRESHOLD = 0.999


@dataclass(frozen=True)
class MediumSlice:
    """Medium state (inversion N, polarization rho) on a detuning grid at fixed t, x."""

    lam_grid: np.ndarray
    N: np.ndarray
    rho: np.ndarray

    def F(self):
        """Hermitian traceless medium matrix [[N, rho], [rho*, -N]] per grid point."""
        out = np.empty(self.lam_grid.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = self.N
        out[..., 0, 1] = self.rho
        out[..., 1, 0] = np.conj(self.rho)
        out[..., 1, 1] = -self.N
        return out


def medium_from_rho(lam_grid, rho):
    """Slice with the inversion fixed by the positive square-root branch."""
    rho = np.asarray(rho, dtype=complex)
    mag2 = np.abs(rho) ** 2
    if np.any(mag2 > 1.0 + 1e-12):
        raise ValueError("|rho| > 1 has no admissible inversion")
    return MediumSlice(lam_grid=np.asarray(lam_grid, float), rho=rho,
                       N=np.sqrt(np.maximum(1.0 - mag2, 0.0)))


def coupling_matrix(E):
    """Off-diagonal field coupling H = [[0, E/2], [-E*/2, 0]] (anti-Hermitian)."""
    E = np.asarray(E, dtype=complex)
    out = np.zeros(E.shape + (2, 2), dtype=complex)
    out[..., 0, 1] = 0.5 * E
    out[..., 1, 0] = -0.5 * np.conj(E)
    return out


def check_coverage(profile, grid, threshold=COVERAGE_THRESHOLD):
    """Require the grid to capture enough of the weight's mass.

    Closed-form shapes carry their tails analytically in every quadrature
    here (the constant part of F is transformed in closed form), so only
    tabulated profiles can genuinely lose mass.
    """
    if profile.closed_form:
        return
    total = abs(profile.mass_between(profile.grid[0], profile.grid[-1]))
    covered = abs(profile.mass_between(grid[0], grid[-1])) / total
    if covered < threshold:
        raise GridCoverage(
            f"grid captures {covered:.4f} of the weight mass < {threshold}")


def cauchy_transform_F(slice_, profile, z=None, boundary=None):
    """(1/4) integral F(s) n(s) / (s - z) ds, off-axis or as a boundary value.

    boundary: None for off-axis z; "+" or "-" for the lambda +- i0 limits,
    which add the local +-(pi i / 4) F(lam) n(lam) term.  The constant part
    of F (sigma_3 at infinity) is transformed exactly through eta, so tail
    truncation only touches the deviation F - sigma_3.
    """
    check_coverage(profile, slice_.lam_grid)
    grid = slice_.lam_grid
    nvals = profile.n(grid)
    dev11 = (slice_.N - 1.0) * nvals
    dev12 = slice_.rho * nvals
    dev21 = np.conj(slice_.rho) * nvals
    chans = np.stack([dev11, dev12, dev21])

    if boundary is None:
        z_in = z
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        c = 0.25 * cauchy_pwlin(grid, chans, z)              # (3, Nz)
        base = (z - eta_eval(profile, z))                    # scalar sigma_3 part
        out = np.empty(z.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = c[0] + base
        out[..., 0, 1] = c[1]
        out[..., 1, 0] = c[2]
        out[..., 1, 1] = -c[0] - base
        return out if np.shape(z_in) else out[0]

    lam_in = z
    lam = np.atleast_1d(np.asarray(z, dtype=float))
    pv = 0.25 * pv_cauchy_pwlin(grid, chans, lam)            # (3, Nlam)
    ev = eta_boundary(profile, lam)
    gbase = ev.g_plus if boundary == "+" else ev.g_minus
    sgn = 1.0 if boundary == "+" else -1.0
    nloc = profile.n(lam)
    loc11 = np.interp(lam, grid, slice_.N) - 1.0
    loc12 = np.interp(lam, grid, slice_.rho.real) + 1j * np.interp(lam, grid, slice_.rho.imag)
    d11 = pv[0] + sgn * 0.25j * np.pi * nloc * loc11 + gbase
    d12 = pv[1] + sgn * 0.25j * np.pi * nloc * loc12
    d21 = pv[2] + sgn * 0.25j * np.pi * nloc * np.conj(loc12)
    out = np.empty(lam.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = d11
    out[..., 0, 1] = d12
    out[..., 1, 0] = d21
    out[..., 1, 1] = -d11
    return out if np.shape(lam_in) else out[0]


def akns_matrices(z, E, G):
    """Generators of the Lax pair: U for the t-equation, V for the x-equation.

    U = -i z sigma_3 - H,  V = i z sigma_3 + H - i G.
    """
    z = np.asarray(z, dtype=complex)
    H = coupling_matrix(E)
    diag = z[..., None, None] * SIGMA3
    U = -1j * diag - H
    V = 1j * diag + H - 1j * np.asarray(G, dtype=complex)
    return U, V


def conservation_check(slice_):
    """Max deviation of the Bloch-sphere constraint N^2 + |rho|^2 = 1."""
    return float(np.max(np.abs(slice_.N ** 2 + np.abs(slice_.rho) ** 2 - 1.0)))


def mb_residual(state, profile):
    """Sup-norms of centered finite-difference residuals of the three equations.

    state needs attributes t_grid, x_grid, lam_grid, E (t, x),
    rho (t, x, lam), N (t, x, lam).  Second-order interior stencils.
    """
    t, x, lam = state.t_grid, state.x_grid, state.lam_grid
    if t.size < 3 or x.size < 3:
        raise StencilTooCoarse("need at least 3 points per direction")
    dt = t[1] - t[0]
    dx = x[1] - x[0]
    E, rho, N = state.E, state.rho, state.N

    w = average_weights(profile, lam)
    avg = rho @ w

    E_t = (E[2:, 1:-1] - E[:-2, 1:-1]) / (2 * dt)
    E_x = (E[1:-1, 2:] - E[1:-1, :-2]) / (2 * dx)
    r1 = E_t + E_x - avg[1:-1, 1:-1]

    rho_t = (rho[2:] - rho[:-2]) / (2 * dt)
    r2 = rho_t + 2j * lam * rho[1:-1] - N[1:-1] * E[1:-1, :, None]

    N_t = (N[2:] - N[:-2]) / (2 * dt)
    r3 = N_t + np.real(np.conj(E[1:-1, :, None]) * rho[1:-1])

    return (float(np.max(np.abs(r1))), float(np.max(np.abs(r2))),
            float(np.max(np.abs(r3))))
