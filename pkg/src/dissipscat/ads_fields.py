"""Closed-form incoming Maxwell fields outside the unit sphere.

For a profile h of one variable put n = x/R, R = |x|, e = (1, 0, 0) and
evaluate h and its derivatives at s = R + t.  Then

    E = a(R, t) n x e,                 a = h''/R - h'/R^2
    B = -b n x (n x e) + 2 c e,        b = h''/R - 3h'/R^2 + 3h/R^3,
                                       c = h'/R^2 - h/R^3

solve the Maxwell system for every smooth h.  With h(s) = exp(r s) and
2r = 1 - sqrt(1 + 4/eps) the field also satisfies the impedance condition
(1 + eps) E_tan = n x B_tan on |x| = 1 and decays like exp(r t).
"""
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import AllZeroRay, NonPositiveEpsilon, OriginSingularity

AXIS = np.array([1.0, 0.0, 0.0])


def decay_rate(eps):
    if not eps > 0:
        raise NonPositiveEpsilon(f"epsilon must be > 0, got {eps}")
    return 0.5 * (1.0 - np.sqrt(1.0 + 4.0 / eps))


class ExponentialProfile:
    """h(s) = exp(rate * s)."""

    def __init__(self, rate):
        self.rate = float(rate)

    def derivs(self, s, order=4):
        base = np.exp(self.rate * np.asarray(s, dtype=float))
        return [self.rate ** k * base for k in range(order + 1)]


class BumpProfile:
    """Compactly supported h(s) = A (1 - u^2)^p, u = (s - center)/width."""

    def __init__(self, center=3.0, width=1.5, power=6, amplitude=1.0):
        self.center, self.width = center, width
        base = P.polypow([1.0, 0.0, -1.0], power) * amplitude
        self.polys = [base]
        for _ in range(4):
            self.polys.append(P.polyder(self.polys[-1]) / width)

    def derivs(self, s, order=4):
        u = (np.asarray(s, dtype=float) - self.center) / self.width
        inside = np.abs(u) < 1.0
        return [np.where(inside, P.polyval(u, c), 0.0) for c in self.polys[:order + 1]]


@dataclass(frozen=True)
class AdsParams:
    epsilon: float
    r: float = None
    axis: np.ndarray = field(default_factory=lambda: AXIS.copy())

    def __post_init__(self):
        if self.r is None:
            object.__setattr__(self, "r", decay_rate(self.epsilon))

    @property
    def profile(self):
        return ExponentialProfile(self.r)


def _coefficients(h, R):
    """a, b, c and their R- and t-derivatives from the profile values."""
    h0, h1, h2, h3 = h[:4]
    iR = 1.0 / R
    a = h2 * iR - h1 * iR**2
    b = h2 * iR - 3 * h1 * iR**2 + 3 * h0 * iR**3
    c = h1 * iR**2 - h0 * iR**3
    a_t = h3 * iR - h2 * iR**2
    b_t = h3 * iR - 3 * h2 * iR**2 + 3 * h1 * iR**3
    c_t = h2 * iR**2 - h1 * iR**3
    a_R = h3 * iR - 2 * h2 * iR**2 + 2 * h1 * iR**3
    b_R = h3 * iR - 4 * h2 * iR**2 + 9 * h1 * iR**3 - 9 * h0 * iR**4
    c_R = h2 * iR**2 - 3 * h1 * iR**3 + 3 * h0 * iR**4
    return (a, b, c), (a_t, b_t, c_t), (a_R, b_R, c_R)


def _prepare(t, x, axis):
    x = np.asarray(x, dtype=float)
    R = np.linalg.norm(x, axis=-1)
    if np.any(R <= 1e-12):
        raise OriginSingularity("field evaluated at |x| <= 1e-12")
    n = x / R[..., None]
    s = R + np.asarray(t, dtype=float)
    ne = n @ axis
    return x, R, n, s, ne


def eval_profile_fields(profile, t, x, axis=AXIS):
    """(E, B) at points x (..., 3) and times t (broadcast)."""
    x, R, n, s, ne = _prepare(t, x, axis)
    (a, b, c), _, _ = _coefficients(profile.derivs(s, 3), R)
    E = a[..., None] * np.cross(n, axis)
    B = -(b * ne)[..., None] * n + (b + 2 * c)[..., None] * axis
    return E, B


def eval_fields(params, t, x):
    return eval_profile_fields(params.profile, t, x, params.axis)


def field_derivatives(profile, t, x, axis=AXIS):
    """Time derivatives and Jacobians J[..., i, j] = d_j F_i, exact."""
    x, R, n, s, ne = _prepare(t, x, axis)
    (a, b, c), (a_t, b_t, c_t), (a_R, b_R, c_R) = _coefficients(profile.derivs(s, 3), R)
    eye = np.eye(3)
    nxe = np.cross(n, axis)
    # dn_i/dx_j = (delta_ij - n_i n_j)/R
    dn = (eye - n[..., :, None] * n[..., None, :]) / R[..., None, None]
    dne = (axis - ne[..., None] * n) / R[..., None]          # d_j (n.e)
    # d_j (n x e)_i = ((d_j n) x e)_i ; d_j n is column j of dn
    dnxe = np.cross(np.swapaxes(dn, -1, -2), axis)             # [..., j, i]
    dnxe = np.swapaxes(dnxe, -1, -2)
    JE = (a_R[..., None, None] * nxe[..., :, None] * n[..., None, :]
          + a[..., None, None] * dnxe)
    JB = (-(b_R * ne)[..., None, None] * n[..., :, None] * n[..., None, :]
          - b[..., None, None] * n[..., :, None] * dne[..., None, :]
          - (b * ne)[..., None, None] * dn
          + (b_R + 2 * c_R)[..., None, None] * axis[:, None] * n[..., None, :])
    Et = a_t[..., None] * nxe
    Bt = -(b_t * ne)[..., None] * n + (b_t + 2 * c_t)[..., None] * axis
    return Et, Bt, JE, JB


def curl_from_jacobian(J):
    return np.stack([J[..., 2, 1] - J[..., 1, 2],
                     J[..., 0, 2] - J[..., 2, 0],
                     J[..., 1, 0] - J[..., 0, 1]], axis=-1)


def _fd_derivatives(profile, t, x, axis, delta):
    def f(tt, xx):
        return eval_profile_fields(profile, tt, xx, axis)
    Ep, Bp = f(t + delta, x)
    Em, Bm = f(t - delta, x)
    Et, Bt = (Ep - Em) / (2 * delta), (Bp - Bm) / (2 * delta)
    JE = np.zeros(x.shape + (3,))
    JB = np.zeros(x.shape + (3,))
    for j in range(3):
        dx = np.zeros(3)
        dx[j] = delta
        Ep, Bp = f(t, x + dx)
        Em, Bm = f(t, x - dx)
        JE[..., j] = (Ep - Em) / (2 * delta)
        JB[..., j] = (Bp - Bm) / (2 * delta)
    return Et, Bt, JE, JB


def boundary_residual(profile, epsilon, t, points, axis=AXIS):
    """(1 + eps) E_tan - n x B_tan on |x| = 1, with n = x/|x|."""
    x = np.asarray(points, dtype=float)
    n = x / np.linalg.norm(x, axis=-1, keepdims=True)
    E, B = eval_profile_fields(profile, t, n, axis)
    tan = lambda v: v - np.sum(v * n, axis=-1, keepdims=True) * n
    res = (1 + epsilon) * tan(E) - np.cross(n, tan(B))
    scale = max(np.abs((1 + epsilon) * tan(E)).max(), np.abs(tan(B)).max(), 1e-300)
    return np.linalg.norm(res, axis=-1).max() / scale


def maxwell_residuals(profile, t, points, axis=AXIS, mode="analytic", delta=1e-4):
    """Relative sup-norm residuals of the Maxwell system and divergences."""
    x = np.asarray(points, dtype=float)
    if mode == "analytic":
        Et, Bt, JE, JB = field_derivatives(profile, t, x, axis)
    elif mode == "finite-difference":
        Et, Bt, JE, JB = _fd_derivatives(profile, t, x, axis, delta)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    cE, cB = curl_from_jacobian(JE), curl_from_jacobian(JB)

    def rel(res, *terms):
        scale = max(np.abs(term).max() for term in terms)
        return float(np.abs(res).max() / scale) if scale > 0 else 0.0

    return {
        "ampere": rel(Et - cB, Et, cB),
        "faraday": rel(Bt + cE, Bt, cE),
        "div_E": rel(np.trace(JE, axis1=-2, axis2=-1), JE),
        "div_B": rel(np.trace(JB, axis1=-2, axis2=-1), JB),
    }


def random_shell_points(count, rmin=1.0, rmax=10.0, rng=None):
    rng = np.random.default_rng(rng)
    d = rng.normal(size=(count, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    rad = rng.uniform(rmin, rmax, size=count)
    return d * rad[:, None]


def verify_exact_solution(params, sample_points, mode="analytic", t=0.0,
                          delta=1e-4, boundary_points=None, seed=0):
    """Residual report for the Maxwell system and the wall condition."""
    rep = maxwell_residuals(params.profile, t, sample_points, params.axis, mode, delta)
    if boundary_points is None:
        boundary_points = random_shell_points(1000, 1.0, 1.0, seed)
    rep["boundary"] = float(boundary_residual(params.profile, params.epsilon, t,
                                              boundary_points, params.axis))
    rep["max"] = max(rep.values())
    return rep


def _sphere_rule(nang):
    # Gauss-Legendre in cos(theta) times uniform azimuth
    ct, wt = np.polynomial.legendre.leggauss(nang)
    phi = 2 * np.pi * np.arange(2 * nang) / (2 * nang)
    st = np.sqrt(1 - ct**2)
    dirs = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
                     np.outer(ct, np.ones_like(phi))], axis=-1).reshape(-1, 3)
    w = np.outer(wt, np.full(phi.size, np.pi / nang)).ravel()
    return dirs, w


def shell_energy(params, t, a, b, nr=96, nang=8):
    """Integral of |E|^2 + |B|^2 over a <= |x| <= b."""
    if b <= a:
        return 0.0
    xr, wr = np.polynomial.legendre.leggauss(nr)
    rad = 0.5 * (b - a) * xr + 0.5 * (b + a)
    wr = 0.5 * (b - a) * wr * rad**2
    dirs, wa = _sphere_rule(nang)
    total = 0.0
    for ri, wi in zip(rad, wr):
        E, B = eval_fields(params, t, dirs * ri)
        total += wi * np.dot(wa, np.sum(E**2 + B**2, axis=1))
    return float(total)


@dataclass(frozen=True)
class EnvelopeFit:
    slope: float
    intercept: float
    spreading_corrected_slope: float


def envelope_check(params, omega, radii, channel="both", scale=1.0, t=0.0):
    """Least-squares slope of log|F(t, s omega)| against s.

    The corrected slope fits log(s |F|), which removes the 1/|x| spherical
    spreading of the far field and isolates the exponential rate.
    """
    omega = np.asarray(omega, dtype=float)
    omega = omega / np.linalg.norm(omega)
    s = np.asarray(radii, dtype=float)
    E, B = eval_fields(params, t, s[:, None] * omega)
    E, B = scale * E, scale * B
    if channel == "E":
        mag = np.linalg.norm(E, axis=1)
    elif channel == "B":
        mag = np.linalg.norm(B, axis=1)
    else:
        mag = np.sqrt(np.sum(E**2 + B**2, axis=1))
    if np.all(mag <= 1e-14 * (1 + np.abs(B).max())):
        raise AllZeroRay(f"{channel} vanishes along {omega}")
    slope, icpt = np.polyfit(s, np.log(mag), 1)
    corr, _ = np.polyfit(s, np.log(mag * s), 1)
    return EnvelopeFit(float(slope), float(icpt), float(corr))


def write_field_csv(path, params, rows):
    """rows: (N, 4) array of t, x1, x2, x3."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    out = []
    for t, *x in rows:
        E, B = eval_fields(params, t, np.array(x))
        out.append(np.concatenate([[t], x, E, B]))
    header = "t,x1,x2,x3,E1,E2,E3,B1,B2,B3"
    np.savetxt(path, np.array(out).reshape(-1, 10), delimiter=",", header=header,
               comments="", fmt="%.17g")
