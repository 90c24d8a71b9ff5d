"""Contour discretization and the singular-integral-equation solver.

The conjugation problem M- = M+ J on the contour Sigma is recast through
the plus-side Cauchy operator as Q - C+[Q(I-J)] = C+[I-J]; the solution
parameterizes M(z) = I + (1/2 pi i) int (I+Q)(I-J)/(s-z) ds.  The field
envelope is read off the z^{-1} moment of M, and the medium matrix from
the boundary jump of the x-logarithmic derivative.

Pure-soliton (reflectionless) data bypasses the contour entirely through
the closed-form residue algebra, optionally cross-checked by replacing
each pole with a small clockwise circle carrying a rank-one jump.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import zgecon

from .broadening import eta_boundary, eta_eval
from .errors import (
    EmptyContour,
    IllConditioned,
    PosdefViolated,
    SingularResidueSystem,
    TooCloseToContour,
    WeightVanishes,
)
from .jump import JumpData, posdef_check
from .mat2 import det2, inv2


# ----------------------------------------------------------------------
# contour
# ----------------------------------------------------------------------

@dataclass
class Panel:
    kind: str                   # "segment" | "circle"
    nodes: np.ndarray           # complex
    weights: np.ndarray         # complex, reproduce oriented int dz
    diff: np.ndarray            # nodal differentiation matrix (d/dz)
    endpoints: tuple | None     # (a, b) for segments
    center: complex | None = None
    radius: float | None = None


@dataclass
class ContourSigma:
    panels: list
    _cp: np.ndarray = field(default=None, repr=False)

    @property
    def nodes(self):
        return np.concatenate([p.nodes for p in self.panels])

    @property
    def weights(self):
        return np.concatenate([p.weights for p in self.panels])

    @property
    def n_nodes(self):
        return sum(p.nodes.size for p in self.panels)

    def spacing_floor(self):
        gaps = [np.min(np.abs(np.diff(p.nodes))) for p in self.panels
                if p.nodes.size > 1]
        return min(gaps) if gaps else 0.0

    def cauchy_plus(self):
        if self._cp is None:
            self._cp = _build_cauchy_plus(self)
        return self._cp


def _barycentric_diff(x):
    """Differentiation matrix for arbitrary distinct nodes."""
    x = np.asarray(x)
    n = x.size
    diffs = x[:, None] - x[None, :]
    np.fill_diagonal(diffs, 1.0)
    lam = 1.0 / np.prod(diffs, axis=1)
    D = (lam[None, :] / lam[:, None]) / diffs
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -np.sum(D, axis=1))
    return D


def _trig_diff(m):
    """Spectral differentiation in the angle for m uniform nodes (m even)."""
    k = np.arange(m)
    diffs = k[:, None] - k[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        D = 0.5 * (-1.0) ** diffs / np.tan(np.pi * diffs / m)
    np.fill_diagonal(D, 0.0)
    return D


def segment_panel(a, b, n_nodes):
    xg, wg = leggauss(n_nodes)
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * xg
    weights = 0.5 * (b - a) * wg
    D = _barycentric_diff(nodes)
    return Panel(kind="segment", nodes=nodes.astype(complex),
                 weights=weights.astype(complex), diff=D.astype(complex),
                 endpoints=(float(a), float(b)))


def circle_panel(center, radius, n_nodes, offset=0.5):
    """Clockwise circle (plus side outside); uniform-angle trapezoid nodes."""
    if n_nodes % 2:
        raise ValueError("circle panels need an even node count")
    theta = (np.arange(n_nodes) + offset) * 2 * np.pi / n_nodes
    nodes = center + radius * np.exp(-1j * theta)
    # z(theta) = c + R e^{-i theta}: dz/dtheta = -i R e^{-i theta}
    dz = -1j * radius * np.exp(-1j * theta)
    weights = dz * (2 * np.pi / n_nodes)
    Dth = _trig_diff(n_nodes)
    D = Dth / dz[:, None]
    return Panel(kind="circle", nodes=nodes, weights=weights, diff=D,
                 endpoints=None, center=complex(center), radius=float(radius))


def contour_build(window=(-20.0, 20.0), n_panels=24, nodes_per_panel=16,
                  edges=None, circles=(), circle_nodes=64,
                  include_real=True) -> ContourSigma:
    """Real-axis panels (left to right) plus clockwise circles.

    circles: iterable of (center, radius); conjugate closure of the node
    multiset is the caller's responsibility (add circles in conjugate
    pairs for off-axis data).
    """
    panels = []
    if include_real:
        if edges is None:
            edges = np.linspace(window[0], window[1], n_panels + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            panels.append(segment_panel(a, b, nodes_per_panel))
    for (c, r) in circles:
        panels.append(circle_panel(c, r, circle_nodes))
    if not panels:
        raise EmptyContour("no panels requested")
    return ContourSigma(panels=panels)


def _build_cauchy_plus(contour):
    """Dense discrete plus-side Cauchy operator (N x N, scalar samples).

    Off-component entries are plain quadrature of 1/(s-z); the singular
    same-component part uses global subtraction with the exact p.v. of the
    constant (log of endpoint ratio for open segments, -i pi for closed
    clockwise circles) and a nodal differentiation matrix for the
    removable diagonal term.
    """
    z = contour.nodes
    w = contour.weights
    n = z.size
    with np.errstate(divide="ignore", invalid="ignore"):
        K = w[None, :] / (z[None, :] - z[:, None])
    np.fill_diagonal(K, 0.0)

    # group real segments into one component (shared endpoints), each
    # circle its own
    offs = np.cumsum([0] + [p.nodes.size for p in contour.panels])
    seg_idx = [np.arange(offs[i], offs[i + 1])
               for i, p in enumerate(contour.panels) if p.kind == "segment"]
    comps = []
    if seg_idx:
        seg_pan = [p for p in contour.panels if p.kind == "segment"]
        a = min(p.endpoints[0] for p in seg_pan)
        b = max(p.endpoints[1] for p in seg_pan)
        comps.append(("segment", np.concatenate(seg_idx), (a, b)))
    for i, p in enumerate(contour.panels):
        if p.kind == "circle":
            comps.append(("circle", np.arange(offs[i], offs[i + 1]), None))

    for kind, idx, ab in comps:
        sub = np.ix_(idx, idx)
        zc = z[idx]
        if kind == "segment":
            lam0 = np.log((ab[1] - zc) / (zc - ab[0]))
        else:
            lam0 = np.full(idx.size, -1j * np.pi)
        # subtraction: move sum_j w_j/(z_j - z_i) onto the diagonal
        Ksub = K[sub]
        colsum = np.sum(Ksub, axis=1)
        diag = lam0 - colsum
        Ksub[np.arange(idx.size), np.arange(idx.size)] = diag
        K[sub] = Ksub

    # removable diagonal term: w_i f'(z_i), panel-spectral derivative
    for i, p in enumerate(contour.panels):
        idx = np.arange(offs[i], offs[i + 1])
        sub = np.ix_(idx, idx)
        K[sub] += p.weights[:, None] * p.diff

    return K / (2j * np.pi) + 0.5 * np.eye(n)


# ----------------------------------------------------------------------
# singular integral equation
# ----------------------------------------------------------------------

@dataclass
class RHResult:
    Q: np.ndarray               # (N, 2, 2) plus-boundary correction M+ - I
    m: np.ndarray               # 2x2 z^{-1} moment of M
    E: complex
    diagnostics: dict = field(default_factory=dict)


def sie_solve(contour: ContourSigma, jd: JumpData, cond_limit=1e12,
              require_posdef=True) -> RHResult:
    """Dense collocation solve of Q - C+[Q(I-J)] = C+[I-J]."""
    J = jd.J
    n = contour.n_nodes
    if J.shape[0] != n:
        raise ValueError("jump data does not match the contour nodes")
    if require_posdef and np.any(jd.nodes.imag == 0.0):
        cert = posdef_check(jd)
        if cert <= 0.0:
            raise PosdefViolated(f"real-axis Hermitian-part minimum {cert:.3e}")

    CP = contour.cauchy_plus()
    IJ = np.eye(2) - J                                   # (N, 2, 2)
    # T[(i,b),(j,a)] = CP[i,j] * (I-J)[j][a,b]
    T = np.einsum("ij,jab->ibja", CP, IJ).reshape(2 * n, 2 * n)
    A = np.eye(2 * n, dtype=complex) - T
    R = np.einsum("ij,jab->iab", CP, IJ)                 # (N, 2, 2)

    lu, piv = lu_factor(A)
    anorm = np.linalg.norm(A, 1)
    rcond, _ = zgecon(lu, anorm)
    if rcond == 0.0 or 1.0 / rcond > cond_limit:
        raise IllConditioned(f"condition estimate {1.0 / max(rcond, 1e-300):.2e}")

    Q = np.empty((n, 2, 2), dtype=complex)
    for r in range(2):
        rhs = R[:, r, :].reshape(2 * n)
        Q[:, r, :] = lu_solve((lu, piv), rhs).reshape(n, 2)

    # a-posteriori residual of the discrete equation
    KQ = np.einsum("ij,jab->iab", CP, Q @ IJ)
    res = float(np.max(np.abs(Q - KQ - R)))
    rnorm = max(float(np.max(np.abs(R))), 1e-300)

    m, E = _moment_and_field(contour, Q, J)
    return RHResult(Q=Q, m=m, E=E,
                    diagnostics={"residual": res, "residual_rel": res / rnorm,
                                 "cond": 1.0 / rcond})


def _moment_and_field(contour, Q, J):
    w = contour.weights
    X = (np.eye(2) + Q) @ (J - np.eye(2))
    m = np.einsum("j,jab->ab", w, X) / (2j * np.pi)
    # field envelope from the moment; sign fixed by the linearized
    # (Born) limit against the forward transform
    E = -4j * m[0, 1]
    return m, E


def reconstruct_field(result: RHResult, contour: ContourSigma, jd: JumpData):
    """(m, E) by contour quadrature of (I+Q)(J-I)."""
    return _moment_and_field(contour, result.Q, jd.J)


def evaluate_M(result: RHResult, contour: ContourSigma, jd: JumpData, z,
               floor_factor=2.0):
    """Off-contour M(z) = I + (1/2 pi i) int (I+Q)(I-J)/(s-z) ds."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    floor = floor_factor * contour.spacing_floor()
    dist = np.min(np.abs(z[:, None] - contour.nodes[None, :]), axis=1)
    if np.any(dist < floor):
        raise TooCloseToContour(f"evaluation point within {floor:.3e} of a node")
    P = np.eye(2) + result.Q
    Y = P @ (np.eye(2) - jd.J)                           # (N, 2, 2)
    kern = contour.weights[None, :] / (contour.nodes[None, :] - z[:, None])
    out = np.eye(2) + np.einsum("zj,jab->zab", kern, Y) / (2j * np.pi)
    return out


# ----------------------------------------------------------------------
# pure-soliton residue algebra
# ----------------------------------------------------------------------

def soliton_closed_form(poles, profile, t, x):
    """Reflectionless field from the residue linear system.

    poles: list of (z_j in C+, m_j).  M = I + sum_j (A_j/(z - z_j)
    + B_j/(z - z_j*)) with A_j supported on column 2 and B_j its
    sigma2-conjugate; the residue conditions close into an antilinear
    system for the column vectors a_j, solved as a real system of
    dimension 4p.  Returns (E, a) with a the stacked column vectors.
    """
    p = len(poles)
    if p == 0:
        return 0.0 + 0.0j, np.zeros((0, 2), complex)
    zj = np.array([z for z, _ in poles], dtype=complex)
    mj = np.array([m for _, m in poles], dtype=complex)
    if np.any(zj.imag <= 0):
        raise SingularResidueSystem("poles must lie strictly above the axis")
    eta_j = eta_eval(profile, zj)
    cj = mj * np.exp(-2j * (zj * t - x * eta_j))

    # a_j - c_j sum_k S_jk conj(b-map(a_k)) = c_j e1, with
    # b_k = (conj(a_k2), -conj(a_k1)) and S_jk = 1/(z_j - conj(z_k))
    S = 1.0 / (zj[:, None] - np.conj(zj)[None, :])

    # real formulation: unknown u = [Re a; Im a], a flattened (p, 2)
    dim = 2 * p
    Lmap = np.zeros((2 * dim, 2 * dim))
    # action: (T a)_j = c_j sum_k S_jk (conj(a_k2), -conj(a_k1))
    # build as a real-linear operator on u
    basis = np.eye(2 * dim)
    for col in range(2 * dim):
        u = basis[:, col]
        a = (u[:dim] + 1j * u[dim:]).reshape(p, 2)
        b = np.stack([np.conj(a[:, 1]), -np.conj(a[:, 0])], axis=1)
        Ta = cj[:, None] * (S @ b)
        Lmap[:, col] = np.concatenate([Ta.real.ravel(), Ta.imag.ravel()])
    rhs_c = np.zeros((p, 2), complex)
    rhs_c[:, 0] = cj
    rhs = np.concatenate([rhs_c.real.ravel(), rhs_c.imag.ravel()])
    sys = np.eye(2 * dim) - Lmap
    try:
        sol = np.linalg.solve(sys, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularResidueSystem(str(exc)) from exc
    a = (sol[:dim] + 1j * sol[dim:]).reshape(p, 2)
    # z^{-1} moment: column-2 residues A_j contribute a_j1 at entry (1,2)
    E = -4j * np.sum(a[:, 0])
    return E, a


def soliton_evaluate_M(poles, profile, t, x, z):
    """Meromorphic M(z) of the reflectionless solution at points z."""
    E, a = soliton_closed_form(poles, profile, t, x)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    zj = np.array([zz for zz, _ in poles], dtype=complex)
    out = np.broadcast_to(np.eye(2, dtype=complex), z.shape + (2, 2)).copy()
    for j in range(len(poles)):
        Aj = np.zeros((2, 2), complex)
        Aj[:, 1] = a[j]
        Bj = np.zeros((2, 2), complex)
        Bj[0, 0] = np.conj(a[j, 1])
        Bj[1, 0] = -np.conj(a[j, 0])
        out += (Aj[None] / (z - zj[j])[:, None, None]
                + Bj[None] / (z - np.conj(zj[j]))[:, None, None])
    return out


def soliton_circle_jump(poles, profile, t, x, contour):
    """Jump data on pole-enclosing clockwise circles equivalent to the
    residue conditions: J = I - c_j/(z - z_j) E12 around z_j and
    J = I + conj(c_j)/(z - z_j*) E21 around z_j*."""
    zj = np.array([zz for zz, _ in poles], dtype=complex)
    mj = np.array([m for _, m in poles], dtype=complex)
    eta_j = eta_eval(profile, zj)
    cj = mj * np.exp(-2j * (zj * t - x * eta_j))
    nodes = contour.nodes
    J = np.broadcast_to(np.eye(2, dtype=complex),
                        (nodes.size, 2, 2)).copy()
    for p in contour.panels:
        if p.kind != "circle":
            continue
        i0 = int(np.nonzero(nodes == p.nodes[0])[0][0])
        idx = np.arange(i0, i0 + p.nodes.size)
        if p.center.imag > 0:
            j = int(np.argmin(np.abs(zj - p.center)))
            J[idx, 0, 1] = -cj[j] / (p.nodes - zj[j])
        else:
            j = int(np.argmin(np.abs(np.conj(zj) - p.center)))
            J[idx, 1, 0] = np.conj(cj[j]) / (p.nodes - np.conj(zj[j]))
    return JumpData(problem_class="mixed", t=float(t), x=float(x),
                    nodes=nodes, J=J)


# ----------------------------------------------------------------------
# medium reconstruction
# ----------------------------------------------------------------------

def reconstruct_F_nodes(result, result_xp, result_xm, jd, jd_xp, jd_xm,
                        profile, hx, node_mask=None):
    """Medium state at real collocation nodes from boundary values.

    Dual route to reconstruct_F: instead of approaching the axis from
    either side, use the solved plus-boundary M+ = I + Q at the nodes,
    M- = M+ J, and the closed-form x-derivative of the jump phases,
    with Q_x by central differences from solves at x +- hx.  Returns
    (lam, N, rho) over the selected real nodes.
    """
    lam_all = jd.nodes
    if node_mask is None:
        node_mask = lam_all.imag == 0.0
    lam = lam_all[node_mask].real
    nv = profile.n(lam)
    if np.any(np.abs(nv) < 1e-6):
        raise WeightVanishes("n(lambda) too small for the jump formula")
    ev = eta_boundary(profile, lam)
    sig = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

    Mp = np.eye(2) + result.Q[node_mask]
    Mp_x = (result_xp.Q[node_mask] - result_xm.Q[node_mask]) / (2 * hx)
    J = jd.J[node_mask]
    # the jump carries x-dependence beyond the explicit phases (its
    # undressed factor evolves with the medium), so differentiate the
    # assembled jump numerically
    J_x = (jd_xp.J[node_mask] - jd_xm.J[node_mask]) / (2 * hx)
    Mm = Mp @ J
    Mm_x = Mp_x @ J + Mp @ J_x
    up = Mp_x @ inv2(Mp) \
        + 1j * ev.eta_plus[:, None, None] * (Mp @ sig @ inv2(Mp))
    dn = Mm_x @ inv2(Mm) \
        + 1j * ev.eta_minus[:, None, None] * (Mm @ sig @ inv2(Mm))
    F = (up - dn) * (2.0 / (np.pi * nv))[:, None, None]
    N = F[:, 0, 0].real
    rho = 0.5 * (F[:, 0, 1] + np.conj(F[:, 1, 0]))
    return lam, N, rho


def reconstruct_F(evalM, profile, t, x, lam_targets, delta=0.05, hx=1e-3):
    """Medium state from the boundary jump of the x-logarithmic derivative.

    evalM(t, x, z) -> (Nz, 2, 2) must evaluate the solved M off the
    contour.  Uses Phi_x Phi^{-1} = M_x M^{-1} + i eta(z) M sigma3 M^{-1}
    at lam +- i delta, Richardson-extrapolated from delta and delta/2,
    with M_x by central differences.  Returns (N, rho) arrays.
    """
    lam = np.atleast_1d(np.asarray(lam_targets, dtype=float))
    nv = profile.n(lam)
    if np.any(np.abs(nv) < 1e-6):
        raise WeightVanishes("n(lambda) too small for the jump formula")

    def logderiv(zs):
        M0 = evalM(t, x, zs)
        Mp = evalM(t, x + hx, zs)
        Mm = evalM(t, x - hx, zs)
        Mx = (Mp - Mm) / (2 * hx)
        Minv = inv2(M0)
        sig = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
        eta_z = eta_eval(profile, zs)
        return Mx @ Minv + 1j * eta_z[:, None, None] * (M0 @ sig @ Minv)

    def jump_at(d):
        up = logderiv(lam + 1j * d)
        dn = logderiv(lam - 1j * d)
        return up - dn

    j1 = jump_at(delta)
    j2 = jump_at(delta / 2)
    jmp = 2.0 * j2 - j1                       # linear Richardson in delta
    F = jmp * (2.0 / (np.pi * nv))[:, None, None]
    N = F[:, 0, 0].real
    rho = 0.5 * (F[:, 0, 1] + np.conj(F[:, 1, 0]))
    return N, rho
