"""Linear algebra of the symbol A(xi) and of boundary subspaces.

The Maxwell system is written as u_t = sum_j A_j d_j u with u = (E, B), so
that A(xi)(E, B) = (xi x B, -xi x E).  On the unit sphere the normal points
into the obstacle, nu = -x/|x|, and the boundary form is <A(nu)u, u>.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from .errors import DegenerateDirection, NotMaximalDissipative

RANK_TOL = 1e-9
RADICAL_TOL = 1e-9
CAP_HALF_ANGLE = 1e-3


@dataclass(frozen=True)
class SystemSymbol:
    matrices: np.ndarray            # (n, r, r)
    d: int
    d0: int
    v0: float
    # optional gauge reference: xi -> candidate vectors for each eigenspace
    frame_reference: Optional[Callable] = field(default=None, compare=False)

    @property
    def n(self):
        return self.matrices.shape[0]

    @property
    def r(self):
        return self.matrices.shape[1]


@dataclass(frozen=True)
class EigenFrame:
    direction: np.ndarray
    tau: np.ndarray                 # (d,) descending
    pos_vectors: np.ndarray         # (d, r): A(-xi) r_j = tau_j r_j
    neg_vectors: np.ndarray         # (d, r): A(-xi) v_j = -tau_j v_j
    kernel_basis: np.ndarray        # (d0, r)


@dataclass(frozen=True)
class BoundarySpace:
    normal: np.ndarray
    basis: np.ndarray               # (k, r) complex, rows span N
    point: Optional[np.ndarray] = None

    @property
    def dim(self):
        return matrix_rank(self.basis)


@dataclass(frozen=True)
class PNFactorization:
    p: np.ndarray                   # (d, r)
    nvec: np.ndarray                # (d, r)
    mu: int


def _cross_matrix(v):
    """Matrix of w -> v x w."""
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


def tangent_frame(xi):
    """Polar-chart tangent frame (e_theta, e_phi) at the unit vector xi."""
    xi = np.asarray(xi, dtype=float)
    rho = np.hypot(xi[0], xi[1])
    if np.arctan2(rho, abs(xi[2])) < CAP_HALF_ANGLE:
        raise DegenerateDirection(f"direction {xi} lies in an excluded polar cap")
    cphi, sphi = xi[0] / rho, xi[1] / rho
    e_theta = np.array([xi[2] * cphi, xi[2] * sphi, -rho])
    e_phi = np.array([-sphi, cphi, 0.0])
    return e_theta, e_phi


def _maxwell_reference(xi):
    # exact eigenvectors of A(-xi) in the chart gauge
    et, ep = tangent_frame(xi)
    z = np.zeros(3)
    s = 1.0 / np.sqrt(2.0)
    pos = [np.concatenate([et, ep]) * s, np.concatenate([ep, -et]) * s]
    neg = [np.concatenate([et, -ep]) * s, np.concatenate([ep, et]) * s]
    ker = [np.concatenate([xi, z]), np.concatenate([z, xi])]
    return pos, neg, ker


def build_maxwell_system():
    """Return the 6x6 Maxwell symbol, A(xi)(E, B) = (xi x B, -xi x E)."""
    mats = np.zeros((3, 6, 6))
    for j in range(3):
        c = _cross_matrix(np.eye(3)[j])
        mats[j, :3, 3:] = c
        mats[j, 3:, :3] = -c
    return SystemSymbol(matrices=mats, d=2, d0=2, v0=1.0,
                        frame_reference=_maxwell_reference)


def symbol_at(sys, xi):
    """A(xi) = sum_j A_j xi_j."""
    return np.tensordot(np.asarray(xi, dtype=float), sys.matrices, axes=1)


def matrix_rank(vectors, tol=RANK_TOL):
    s = linalg.svdvals(np.atleast_2d(vectors))
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def orth_rows(vectors, tol=RANK_TOL):
    """Orthonormal basis (as rows) of the span of the given row vectors."""
    v = np.atleast_2d(np.asarray(vectors, dtype=complex))
    if v.shape[0] == 0:
        return v
    u, s, _ = linalg.svd(v.T, full_matrices=False)
    if s[0] == 0.0:
        return np.zeros((0, v.shape[1]), dtype=complex)
    k = int(np.sum(s > tol * s[0]))
    return u[:, :k].T


def projector(vectors):
    q = orth_rows(vectors)
    return q.T @ q.conj()


def subspace_distance(v1, v2):
    """Spectral norm of the difference of the orthogonal projectors."""
    if len(v1) == 0 and len(v2) == 0:
        return 0.0
    r = (v1 if len(v1) else v2).shape[1]
    p1 = projector(v1) if len(v1) else np.zeros((r, r))
    p2 = projector(v2) if len(v2) else np.zeros((r, r))
    return float(linalg.norm(p1 - p2, 2))


def _lowdin(vectors):
    # symmetric orthonormalization, keeps the vectors as close as possible
    v = np.asarray(vectors)
    g = v.conj() @ v.T
    w, u = linalg.eigh(g)
    return (u @ np.diag(w ** -0.5) @ u.conj().T).T @ v


def _align(basis, reference):
    # project reference vectors onto span(basis) and reorthonormalize
    p = basis.T @ basis.conj()
    proj = np.array([p @ ref for ref in reference])
    out = _lowdin(proj)
    return out.real if np.isrealobj(basis) else out


def eigen_frame(sys, xi):
    """Eigen decomposition of A(-xi) in the chart gauge."""
    xi = np.asarray(xi, dtype=float)
    nrm = np.linalg.norm(xi)
    if abs(nrm - 1.0) > 1e-12:
        raise ValueError("eigen_frame expects a unit vector")
    ref = sys.frame_reference(xi) if sys.frame_reference else None
    if ref is None:
        tangent_frame(xi)       # same excluded caps for every system
    w, v = linalg.eigh(symbol_at(sys, -xi))
    order = np.argsort(-w)
    w, v = w[order], v[:, order]
    tau = w[:sys.d]
    pos = v[:, :sys.d].T
    ker = v[:, sys.d:sys.d + sys.d0].T
    neg = v[:, sys.d + sys.d0:][:, ::-1].T
    if ref is not None:
        pos = _align_clusters(pos, tau, ref[0])
        neg = _align_clusters(neg, tau, ref[1])
        ker = _align(ker, ref[2])
    return EigenFrame(direction=xi, tau=tau, pos_vectors=pos,
                      neg_vectors=neg, kernel_basis=ker)


def _align_clusters(vecs, tau, ref):
    out = vecs.copy()
    i = 0
    while i < len(tau):
        j = i + 1
        while j < len(tau) and abs(tau[j] - tau[i]) < 1e-9:
            j += 1
        out[i:j] = _align(vecs[i:j], ref[i:j])
        i = j
    return out


def boundary_form(sys, nu, u):
    """Re <A(nu) u, u>."""
    u = np.asarray(u, dtype=complex)
    return float(np.real(np.vdot(u, symbol_at(sys, nu) @ u)))


def kernel_basis(sys, nu):
    w, v = linalg.eigh(symbol_at(sys, nu))
    idx = np.argsort(np.abs(w))[:sys.d0]
    return v[:, idx].T


def sigma_basis(sys, nu, sign):
    """Orthonormal basis of Sigma_+ (sign=+1) or Sigma_- (sign=-1) of A(nu)."""
    w, v = linalg.eigh(symbol_at(sys, nu))
    idx = np.where(sign * w > RANK_TOL)[0]
    return v[:, idx].T


def sigma_projector(sys, nu, sign):
    b = sigma_basis(sys, nu, sign)
    return b.T @ b.conj()


def tangent_basis(nu):
    """Any orthonormal pair spanning the plane orthogonal to nu."""
    nu = np.asarray(nu, dtype=float)
    a = np.eye(3)[np.argmin(np.abs(nu))]
    t1 = np.cross(nu, a)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(nu, t1)


def impedance_space(nu, eps, x=None):
    """Maxwell boundary space {(1+eps) E_tan = -nu x B_tan} + Ker A(nu).

    With the inward-to-K normal nu = -x/|x| this is the impedance condition
    written with the outward radial unit vector x/|x| = -nu.
    """
    nu = np.asarray(nu, dtype=float)
    t1, t2 = tangent_basis(nu)
    z = np.zeros(3)
    rows = [np.concatenate([-np.cross(nu, t) / (1.0 + eps), t]) for t in (t1, t2)]
    rows += [np.concatenate([nu, z]), np.concatenate([z, nu])]
    return BoundarySpace(normal=nu, basis=np.array(rows, dtype=complex), point=x)


def pec_space(nu):
    """E_tan = 0 (energy preserving)."""
    nu = np.asarray(nu, dtype=float)
    t1, t2 = tangent_basis(nu)
    z = np.zeros(3)
    rows = [np.concatenate([z, t1]), np.concatenate([z, t2]),
            np.concatenate([nu, z]), np.concatenate([z, nu])]
    return BoundarySpace(normal=nu, basis=np.array(rows, dtype=complex))


def pmc_space(nu):
    """B_tan = 0 (energy preserving)."""
    nu = np.asarray(nu, dtype=float)
    t1, t2 = tangent_basis(nu)
    z = np.zeros(3)
    rows = [np.concatenate([t1, z]), np.concatenate([t2, z]),
            np.concatenate([nu, z]), np.concatenate([z, nu])]
    return BoundarySpace(normal=nu, basis=np.array(rows, dtype=complex))


def sigma_minus_space(sys, nu):
    rows = np.vstack([sigma_basis(sys, nu, -1), kernel_basis(sys, nu)])
    return BoundarySpace(normal=np.asarray(nu, float), basis=rows.astype(complex))


def space_from_contraction(sys, nu, m):
    """Graph {u_- + M u_-} + Ker for a d x d contraction M.

    u_- runs over Sigma_-(nu); M maps it into Sigma_+(nu) using the
    eigenvector bases scaled to unit A-norm.  Every maximal dissipative
    space arises this way; mu equals the number of unit singular values.
    """
    a = symbol_at(sys, nu)
    w, v = linalg.eigh(a)
    neg = [v[:, i] / np.sqrt(-w[i]) for i in np.where(w < -RANK_TOL)[0]]
    pos = [v[:, i] / np.sqrt(w[i]) for i in np.where(w > RANK_TOL)[0]]
    neg, pos = np.array(neg), np.array(pos)
    rows = neg + np.asarray(m).T @ pos
    rows = np.vstack([rows, kernel_basis(sys, nu)]).astype(complex)
    return BoundarySpace(normal=np.asarray(nu, float), basis=rows)


def random_contraction(d, mu, rng, smax=0.9):
    """d x d complex contraction with exactly mu unit singular values."""
    def unitary():
        z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        q, r = np.linalg.qr(z)
        return q * (np.diag(r) / np.abs(np.diag(r)))
    sv = np.concatenate([np.ones(mu), rng.uniform(0.0, smax, d - mu)])
    return unitary() @ np.diag(sv) @ unitary()


def check_maximal_dissipative(sys, nu, space):
    q = orth_rows(space.basis)
    h = q.conj() @ symbol_at(sys, nu) @ q.T
    worst = float(linalg.eigvalsh((h + h.conj().T) / 2)[-1]) if len(q) else 0.0
    dissipative = worst <= 1e-12
    maximal = dissipative and len(q) == sys.d + sys.d0
    return {"dissipative": bool(dissipative), "maximal": bool(maximal),
            "worst_form_value": worst}


def _form(a, x, y):
    return x.conj() @ a @ y.T


def factorize_boundary_space(sys, nu, space, radical_tol=RADICAL_TOL):
    """Basis (p_j, n_j, mu) with N = span{p_i+n_i (i<=mu), n_j (j>mu)} + Ker."""
    rep = check_maximal_dissipative(sys, nu, space)
    if not rep["maximal"]:
        raise NotMaximalDissipative(f"check failed: {rep}")
    a = symbol_at(sys, nu)
    d = sys.d
    ker = kernel_basis(sys, nu)
    pk = ker.T @ ker.conj()
    q = orth_rows(space.basis)
    m = orth_rows(q - (pk @ q.T).T)            # N minus Ker, dimension d
    lam, vec = linalg.eigh(_form(a, m, m))
    w = (vec.T @ m)                              # rows: form eigenvectors
    rad = np.abs(lam) < radical_tol
    mu = int(rad.sum())
    pplus = sigma_projector(sys, nu, +1)
    pminus = sigma_projector(sys, nu, -1)

    p_list, n_list = [], []
    if mu:
        v = w[rad]
        vp, vm = (pplus @ v.T).T, (pminus @ v.T).T
        gp = _form(a, vp, vp)
        gw, gu = linalg.eigh((gp + gp.conj().T) / 2)
        t = gu @ np.diag(gw ** -0.5) @ gu.conj().T
        p_list = list(t.T @ vp)
        n_list = list(t.T @ vm)
    # strictly negative directions, shifted by radical vectors so that they
    # are A-orthogonal to the radical p's and n's separately
    for lam_j, u in zip(lam[~rad], w[~rad]):
        u = u.copy()
        for pi, ni in zip(p_list[:mu], n_list[:mu]):
            c = _form(a, ni, u)
            u = u + c * (pi + ni)
        n_list.append(u / np.sqrt(-lam_j))
    nvec = np.array(n_list).reshape(d, -1)
    # p_{mu+1..d}: A-orthonormal completion in the A-orthogonal complement
    # of span{n} inside Ker^perp (reduces to Sigma_+ when span{n} = Sigma_-)
    kperp = orth_rows(np.eye(sys.r) - pk)
    cons = nvec.conj() @ a @ kperp.T
    null = linalg.null_space(cons, rcond=1e-10).T @ kperp
    basis = list(p_list)
    for cand in null:
        x = cand.copy()
        for b in basis:
            x = x - _form(a, b, x) * b
        nrm = np.real(_form(a, x, x))
        if nrm > 1e-8:
            basis.append(x / np.sqrt(nrm))
        if len(basis) == d:
            break
    p = np.array(basis).reshape(d, -1)
    return PNFactorization(p=p, nvec=nvec, mu=mu)


def reconstruct_space(sys, nu, fac):
    rows = [fac.p[i] + fac.nvec[i] for i in range(fac.mu)]
    rows += list(fac.nvec[fac.mu:])
    rows = np.vstack([np.array(rows).reshape(-1, sys.r), kernel_basis(sys, nu)])
    return BoundarySpace(normal=np.asarray(nu, float), basis=rows)


def pairing_errors(sys, nu, fac):
    a = symbol_at(sys, nu)
    d = sys.d
    e_pp = np.abs(_form(a, fac.p, fac.p) - np.eye(d)).max()
    e_nn = np.abs(_form(a, fac.nvec, fac.nvec) + np.eye(d)).max()
    e_np = np.abs(_form(a, fac.nvec, fac.p)).max()
    return float(max(e_pp, e_nn, e_np))


def classify_boundary_space(sys, nu, space):
    """Is N minus Ker(A(nu)) equal to Sigma_-(nu)?

    sigma_minus: the complement is exactly Sigma_- (the leading back-scatter
    term vanishes); generic: it differs and the form has no radical (mu = 0).
    """
    rep = check_maximal_dissipative(sys, nu, space)
    if not rep["maximal"]:
        raise NotMaximalDissipative(f"check failed: {rep}")
    ker = kernel_basis(sys, nu)
    pk = ker.T @ ker.conj()
    q = orth_rows(space.basis)
    m = orth_rows(q - (pk @ q.T).T)
    dist = subspace_distance(m, sigma_basis(sys, nu, -1))
    equal = dist < 1e-10
    mu = factorize_boundary_space(sys, nu, space).mu
    return {"sigma_minus": bool(equal), "generic": bool(not equal and mu == 0),
            "distance": dist, "mu": mu}


def boundary_report(sys, nu, space):
    """JSON-ready summary of a boundary space."""
    rep = check_maximal_dissipative(sys, nu, space)
    if rep["maximal"]:
        rep.update(classify_boundary_space(sys, nu, space))
    return rep


def divergence_operator(xi):
    """Q(xi)(E, B) = (xi.E, xi.B)."""
    q = np.zeros((2, 6))
    q[0, :3] = xi
    q[1, 3:] = xi
    return q


def check_divergence_compatibility(sys, samples=50, seed=0):
    rng = np.random.default_rng(seed)
    worst_qa, worst_dist, ranks_ok = 0.0, 0.0, True
    for _ in range(samples):
        xi = rng.normal(size=3)
        xi /= np.linalg.norm(xi)
        a = symbol_at(sys, xi)
        q = divergence_operator(xi)
        worst_qa = max(worst_qa, float(np.abs(q @ a).max()))
        kq = linalg.null_space(q).T
        im = orth_rows(a.T)
        ranks_ok &= len(kq) == matrix_rank(a) == sys.r - sys.d0
        worst_dist = max(worst_dist, subspace_distance(kq, im))
    ok = worst_qa <= 1e-12 and worst_dist <= 1e-12 and ranks_ok
    return {"qa_max": worst_qa, "kernel_image_distance": worst_dist,
            "ranks_ok": bool(ranks_ok), "ok": bool(ok)}


def write_matrix(path, mat):
    """Text format: header 'rows cols', then one complex token per entry."""
    mat = np.atleast_2d(np.asarray(mat, dtype=complex))
    lines = [f"{mat.shape[0]} {mat.shape[1]}"]
    for row in mat:
        lines.append(" ".join(f"{float(z.real)!r}{float(z.imag):+.17g}j" for z in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix(path):
    with open(path) as fh:
        tokens = fh.read().split()
    rows, cols = int(tokens[0]), int(tokens[1])
    vals = [complex(t) for t in tokens[2:2 + rows * cols]]
    if len(vals) != rows * cols:
        raise ValueError("matrix file is truncated")
    return np.array(vals).reshape(rows, cols)
