"""Radon transform and translation representation of the free Maxwell flow.

For f = (E, B) with compact support, the representation is

    k_j(s, omega) = (1/(2 pi)) d/ds <(Rf)(s, omega), r_j(omega)>

where Rf is the plane-integral transform and r_j(omega) are the unit
eigenvectors of A(-omega) with eigenvalue +1.  With this constant the map is
isometric on the divergence-free part of L^2 and turns the free evolution
into the translation k(s) -> k(s - t).
"""
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from . import kernels
from .errors import SupportOverflow, WrapAround
from .symbol_algebra import build_maxwell_system, eigen_frame, symbol_at

MAXWELL = build_maxwell_system()
NORMALIZATION = 1.0 / (2.0 * np.pi)


@dataclass(frozen=True)
class GridField:
    """Six real components on the periodic box [-L/2, L/2)^3."""
    data: np.ndarray                 # (6, N, N, N)
    L: float
    t: float = 0.0
    support_radius: float = None

    @property
    def n(self):
        return self.data.shape[1]

    @property
    def spacing(self):
        return self.L / self.n

    @property
    def origin(self):
        return np.full(3, -0.5 * self.L)

    def coords(self):
        x = -0.5 * self.L + self.spacing * np.arange(self.n)
        return np.meshgrid(x, x, x, indexing="ij")

    def norm(self):
        return float(np.sqrt(np.sum(self.data**2) * self.spacing**3))

    def check_support(self, extra=0.0):
        rad = self.support_radius
        if rad is None:
            rad = np.sqrt(3) * 0.5 * self.L
        if rad + extra + 4 * self.spacing >= 0.5 * self.L:
            raise SupportOverflow(
                f"support {rad:.3f} + {extra:.3f} + 4 dx exceeds half box {0.5 * self.L:.3f}")
        return rad


def sample_field(func, n, L, support_radius=None, t=0.0):
    """GridField from a closure func(points (..., 3)) -> (E, B)."""
    x = -0.5 * L + (L / n) * np.arange(n)
    pts = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)
    E, B = func(pts)
    data = np.concatenate([np.moveaxis(E, -1, 0), np.moveaxis(B, -1, 0)])
    return GridField(np.ascontiguousarray(data, dtype=float), L, t, support_radius)


def zero_field(n, L, support_radius=0.0):
    return GridField(np.zeros((6, n, n, n)), L, 0.0, support_radius)


@dataclass(frozen=True)
class SphereQuadrature:
    nodes: np.ndarray                # (no, 3)
    weights: np.ndarray              # (no,)
    antipode: np.ndarray             # index of -omega for each node
    degree: int

    @property
    def size(self):
        return len(self.weights)


def sphere_quadrature(degree=16):
    """2(L+1)^2 nodes: Gauss-Legendre in cos(theta) times uniform azimuth."""
    nt, nphi = degree + 1, 2 * (degree + 1)
    ct, wt = np.polynomial.legendre.leggauss(nt)
    phi = 2 * np.pi * np.arange(nphi) / nphi
    st = np.sqrt(1 - ct**2)
    nodes = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
                      np.outer(ct, np.ones(nphi))], axis=-1).reshape(-1, 3)
    weights = np.outer(wt, np.full(nphi, 2 * np.pi / nphi)).ravel()
    it, ip = np.divmod(np.arange(nt * nphi), nphi)
    antipode = (nt - 1 - it) * nphi + (ip + nphi // 2) % nphi
    return SphereQuadrature(nodes, weights, antipode, degree)


def _plane_frames(omegas):
    e1 = np.cross(omegas, np.eye(3)[np.argmin(np.abs(omegas), axis=1)])
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(omegas, e1)
    return np.ascontiguousarray(e1), np.ascontiguousarray(e2)


def radon_transform(g, spacing, omegas, s, radius, origin=None, nthreads=None):
    """Plane integrals of a scalar grid (N, N, N) or stack (nf, N, N, N).

    The box is centred at the origin unless `origin` (corner node) is given.
    Only points with |x| <= radius contribute, so g must vanish outside.
    Returns (n_omega, n_s) or (nf, n_omega, n_s).
    """
    g = np.asarray(g, dtype=float)
    scalar = g.ndim == 3
    vol = np.ascontiguousarray(g[None] if scalar else g)
    n = vol.shape[1]
    if origin is None:
        origin = np.full(3, -0.5 * n * spacing)
    if radius + 4 * spacing > 0.5 * n * spacing + 1e-12:
        raise SupportOverflow("plane disc leaves the grid")
    omegas = np.ascontiguousarray(np.atleast_2d(omegas), dtype=float)
    e1, e2 = _plane_frames(omegas)
    out = kernels.radon_planes(vol, np.asarray(origin, dtype=float), float(spacing),
                               omegas, e1, e2, np.ascontiguousarray(s, dtype=float),
                               float(radius), nthreads or kernels.thread_count())
    return out[0] if scalar else out


def ds4(values, ds, axis=-1):
    """Fourth-order centred derivative with zero extension."""
    v = np.moveaxis(values, axis, -1)
    p = np.pad(v, [(0, 0)] * (v.ndim - 1) + [(2, 2)])
    d = (-p[..., 4:] + 8 * p[..., 3:-1] - 8 * p[..., 1:-3] + p[..., :-4]) / (12 * ds)
    return np.moveaxis(d, -1, axis)


@dataclass(frozen=True)
class TRData:
    s: np.ndarray                    # (ns,)
    quad: SphereQuadrature
    values: np.ndarray               # (d, ns, no)
    frames: np.ndarray = field(repr=False, default=None)   # (no, d, r)

    @property
    def ds(self):
        return float(self.s[1] - self.s[0])

    def norm(self, mask=None):
        v = self.values if mask is None else self.values * mask[None, :, None]
        return float(np.sqrt(np.einsum("jso,o->", v**2, self.quad.weights) * self.ds))

    def vector(self):
        """Sum_j k_j(s, omega) r_j(omega), shape (ns, no, r)."""
        return np.einsum("jso,ojr->sor", self.values, self.frames)

    def with_values(self, values):
        return replace(self, values=values)


def frames_on(quad, sys=MAXWELL):
    frames = np.array([eigen_frame(sys, w).pos_vectors for w in quad.nodes])
    taus = np.array([eigen_frame(sys, w).tau for w in quad.nodes])
    return frames, taus


def s_grid(half_width, ds):
    m = int(np.ceil(half_width / ds))
    return ds * np.arange(-m, m + 1)


def spectral_gradient(data, L):
    """d_i of each component via FFT, shape (3, nf, N, N, N)."""
    n = data.shape[-1]
    k = _wavenumbers(n, L)
    u = np.fft.fftn(data, axes=(-3, -2, -1))
    out = []
    for i in range(3):
        shape = [1, 1, 1]
        shape[i] = n
        out.append(np.fft.ifftn(1j * k.reshape(shape) * u, axes=(-3, -2, -1)).real)
    return np.array(out)


def translation_representation(f, quad=None, s_half_width=None, sys=MAXWELL,
                               nthreads=None, method="gradient"):
    """TRData of a GridField with declared compact support.

    method="gradient" integrates omega . grad f over planes, with the
    gradient taken spectrally, which is d/ds of the plane integral without
    differencing in s.  method="difference" differentiates the plane
    integrals in s with fourth-order centred differences.
    """
    quad = quad or sphere_quadrature()
    rad = f.check_support()
    h = f.spacing
    if s_half_width is None:
        s_half_width = rad + 4 * h
    s = s_grid(s_half_width, h)
    radius = min(rad + 2 * h, 0.5 * f.L - 4 * h)
    frames, taus = frames_on(quad, sys)
    if method == "gradient":
        grad = spectral_gradient(f.data, f.L)
        proj = 0.0
        for i in range(3):
            rf = radon_transform(grad[i], h, quad.nodes, s, radius, f.origin, nthreads)
            proj = proj + np.einsum("fos,ojf,o->jso", rf, frames, quad.nodes[:, i])
        k = NORMALIZATION * proj
    elif method == "difference":
        rf = radon_transform(f.data, h, quad.nodes, s, radius, f.origin, nthreads)
        proj = np.einsum("fos,ojf->jso", rf, frames)
        k = NORMALIZATION * ds4(proj, h, axis=1)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.allclose(taus, 1.0):
        # rescale k_j(s tau_j) tau_j^(1/2) for non-unit speeds
        out = np.empty_like(k)
        for o in range(quad.size):
            for j in range(k.shape[0]):
                out[j, :, o] = np.sqrt(taus[o, j]) * np.interp(s * taus[o, j], s, k[j, :, o],
                                                               left=0.0, right=0.0)
        k = out
    return TRData(s, quad, k, frames)


def _wavenumbers(n, L):
    k = 2 * np.pi * np.fft.fftfreq(n, d=L / n)
    if n % 2 == 0:
        k[n // 2] = 0.0          # Nyquist plane treated as zero frequency
    return k


def _spectral_setup(f):
    k = _wavenumbers(f.n, f.L)
    kx, ky, kz = np.meshgrid(k, k, k, indexing="ij")
    kk = np.stack([kx, ky, kz])
    mag = np.sqrt(np.sum(kk**2, axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        khat = np.where(mag > 0, kk / mag, 0.0)
    return kk, mag, khat


def _longitudinal(v, khat):
    return khat * np.sum(khat * v, axis=0)


def ac_project(f):
    """Remove the Ker A(xi) part (longitudinal E and B, and the mean)."""
    _, mag, khat = _spectral_setup(f)
    u = np.fft.fftn(f.data, axes=(1, 2, 3))
    out = np.empty_like(u)
    for sl in (slice(0, 3), slice(3, 6)):
        out[sl] = u[sl] - _longitudinal(u[sl], khat)
    out[:, mag == 0] = 0.0
    data = np.fft.ifftn(out, axes=(1, 2, 3)).real
    return replace(f, data=np.ascontiguousarray(data))


def free_evolve(f, t):
    """Exact free evolution exp(t G) on the periodic grid."""
    if t == 0:
        return f
    rad = f.support_radius if f.support_radius is not None else 0.5 * f.L
    if rad + abs(t) + 4 * f.spacing >= 0.5 * f.L:
        raise WrapAround(f"support {rad} + |t| {abs(t)} reaches the box edge")
    kk, mag, khat = _spectral_setup(f)
    u = np.fft.fftn(f.data, axes=(1, 2, 3))
    E, B = u[:3], u[3:]
    El, Bl = _longitudinal(E, khat), _longitudinal(B, khat)
    c, sn = np.cos(t * mag), np.sin(t * mag)
    # exp(i t A(xi)) with A(xi)(E, B) = (xi x B, -xi x E)
    En = El + c * (E - El) + 1j * sn * np.cross(khat, B, axis=0)
    Bn = Bl + c * (B - Bl) - 1j * sn * np.cross(khat, E, axis=0)
    data = np.fft.ifftn(np.concatenate([En, Bn]), axes=(1, 2, 3)).real
    return GridField(np.ascontiguousarray(data), f.L, f.t + t, rad + abs(t))


def translate(k, t):
    """T_t: k(s) -> k(s - t) on the same s-grid (zero fill)."""
    shift = t / k.ds
    if abs(shift - round(shift)) < 1e-9:
        m = int(round(shift))
        out = np.zeros_like(k.values)
        if m >= 0:
            out[:, m:] = k.values[:, :len(k.s) - m]
        else:
            out[:, :m] = k.values[:, -m:]
        return k.with_values(out)
    ns = len(k.s)
    nfft = 2 * ns
    freq = 2 * np.pi * np.fft.rfftfreq(nfft, d=k.ds)
    spec = np.fft.rfft(k.values, n=nfft, axis=1)
    spec *= np.exp(-1j * freq * t)[None, :, None]
    return k.with_values(np.fft.irfft(spec, n=nfft, axis=1)[:, :ns])


def intertwining_defect(f, t, quad=None):
    """||R U0(t) f - T_t R f|| / ||R f||."""
    quad = quad or sphere_quadrature()
    rad = f.check_support(abs(t))
    half = rad + abs(t) + 4 * f.spacing
    k0 = translation_representation(f, quad, half)
    if t == 0:
        return 0.0
    kt = translation_representation(free_evolve(f, t), quad, half)
    diff = kt.values - translate(k0, t).values
    return k0.with_values(diff).norm() / k0.norm()


def isometry_defect(f, quad=None):
    k = translation_representation(f, quad)
    ref = ac_project(f).norm()
    return abs(k.norm() - ref) / ref


def dpm_support_test(k, sign, rho=0.0, tol=1e-3):
    """Membership test for D_+^rho (support s >= rho) or D_-^rho (s <= -rho)."""
    slack = 1e-9 * k.ds
    if sign in ("+", 1, +1):
        forbidden = k.s < rho - slack
    elif sign in ("-", -1):
        forbidden = k.s > -rho + slack
    else:
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    total = k.norm()
    return k.norm(forbidden.astype(float)) <= tol * total


def real_spherical_harmonics(m, nodes):
    """All 2m+1 orthonormal real harmonics of degree m at the nodes."""
    theta = np.arccos(np.clip(nodes[:, 2], -1, 1))
    phi = np.arctan2(nodes[:, 1], nodes[:, 0])
    out = [special.sph_harm_y(m, 0, theta, phi).real]
    for q in range(1, m + 1):
        y = special.sph_harm_y(m, q, theta, phi)
        out += [np.sqrt(2) * (-1) ** q * y.real, np.sqrt(2) * (-1) ** q * y.imag]
    return np.array(out)


def moment_functionals(k, a, kpow, m, s_window=None, sys=MAXWELL):
    """Vector moments int int A(w)^k [v(s,w) - v(-s,-w)] s^a Y(w) ds dw.

    v = sum_j k_j r_j.  The sign in the bracket is (-1)^((n-1)/2) = -1 for
    n = 3.  Returns an array (2m+1, r), one row per real harmonic.  With
    s_window = b the s-integral is restricted to |s| <= b.
    """
    v = k.vector()                                   # (ns, no, r)
    flip = v[::-1][:, k.quad.antipode]
    br = v - flip
    sw = k.s**a * k.ds
    if s_window is not None:
        sw = np.where(np.abs(k.s) <= s_window, sw, 0.0)
    col = np.einsum("s,sor->or", sw, br)           # (no, r)
    if kpow:
        amat = np.array([np.linalg.matrix_power(symbol_at(sys, w), kpow)
                         for w in k.quad.nodes])
        col = np.einsum("oab,ob->oa", amat, col)
    Y = real_spherical_harmonics(m, k.quad.nodes)
    return np.einsum("yo,o,or->yr", Y, k.quad.weights, col)


def moment_battery(k, a_max=2, k_max=2, m_max=6, s_window=None):
    """Largest moment magnitude relative to ||k|| over the battery."""
    worst, entries = 0.0, {}
    nk = k.norm()
    for a in range(a_max + 1):
        for kp in range(k_max + 1):
            for m in range(a + kp, m_max + 1):
                val = np.abs(moment_functionals(k, a, kp, m, s_window)).max() / nk
                entries[(a, kp, m)] = float(val)
                worst = max(worst, val)
    return float(worst), entries


def dminus_defect(f, rho=1.0, quad=None, side="-"):
    """Relative mass of the representation of P_ac J f in s <= -rho.

    f is a GridField already extended by zero inside the obstacle.  With
    side="+" the mirrored region s >= rho (the D_+^rho support) is measured
    instead, as a diagnostic.
    """
    if f.norm() == 0:
        return 0.0
    k = translation_representation(ac_project(f), quad)
    region = k.s <= -rho if side == "-" else k.s >= rho
    return k.norm(region.astype(float)) / k.norm()


# -- file formats ---------------------------------------------------------

def write_gridfield(path, f):
    n = f.n
    header = f"{n} {n} {n} {f.L!r} components=6 t={f.t!r}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(f.data, dtype="<f8").tobytes())


def read_gridfield(path, support_radius=None):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        nx, ny, nz, L = int(header[0]), int(header[1]), int(header[2]), float(header[3])
        meta = dict(tok.split("=") for tok in header[4:])
        data = np.frombuffer(fh.read(), dtype="<f8")
    ncomp = int(meta["components"])
    data = data.reshape(ncomp, nx, ny, nz).astype(float)
    return GridField(data, L, float(meta["t"]), support_radius)


def write_trdata(path, k, nodes_path=None):
    d, ns, no = k.values.shape
    j, si, oi = np.meshgrid(np.arange(d), np.arange(ns), np.arange(no), indexing="ij")
    rows = np.column_stack([j.ravel() + 1, k.s[si.ravel()], oi.ravel(), k.values.ravel()])
    np.savetxt(path, rows, delimiter=",", header="j,s,omega_index,value",
               comments="", fmt=["%d", "%.17g", "%d", "%.17g"])
    if nodes_path:
        tab = np.column_stack([np.arange(no), k.quad.nodes, k.quad.weights])
        np.savetxt(nodes_path, tab, delimiter=",", header="omega_index,ox,oy,oz,weight",
                   comments="", fmt=["%d"] + ["%.17g"] * 4)


# -- test fields ----------------------------------------------------------

def bump_potential(pts, width):
    """psi = (1 - |x|^2/w^2)^4 on |x| < w and its gradient."""
    rr = np.sum(pts**2, axis=-1) / width**2
    inside = rr < 1
    q = np.where(inside, 1 - rr, 0.0)
    psi = q**4
    grad = (-8 / width**2) * (q**3)[..., None] * pts
    return psi, grad


def curl_packet(width, a=(0.3, 1.0, -0.5), b=(0.8, -0.2, 0.6), center=(0.0, 0.0, 0.0)):
    """Divergence-free compact field E = curl(psi a), B = curl(psi b)."""
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, center))

    def func(pts):
        _, grad = bump_potential(pts - c, width)
        return np.cross(grad, a), np.cross(grad, b)
    return func


def gaussian_curl_packet(width, a=(0.3, 1.0, -0.5), b=(0.8, -0.2, 0.6)):
    """Smooth divergence-free packet curl(exp(-|x|^2/w^2) a), ..."""
    a, b = np.asarray(a, float), np.asarray(b, float)

    def func(pts):
        g = np.exp(-np.sum(pts**2, axis=-1) / width**2)
        grad = (-2 / width**2) * g[..., None] * pts
        return np.cross(grad, a), np.cross(grad, b)
    return func


def gradient_field(width):
    """Longitudinal data: E = B = grad psi."""
    def func(pts):
        _, grad = bump_potential(pts, width)
        return grad, grad
    return func


def exterior_field(func, n, L, r_out, r_in=1.0, t=0.0):
    """Exterior data on r_in <= |x| <= r_out, extended by zero (the map J)."""
    inside = np.array([2.0 * r_in, 0.0, 0.0])

    def masked(pts):
        r = np.linalg.norm(pts, axis=-1)
        keep = ((r >= r_in) & (r <= r_out))[..., None]
        E, B = func(np.where(keep, pts, inside))
        return E * keep, B * keep
    return sample_field(masked, n, L, r_out, t)
