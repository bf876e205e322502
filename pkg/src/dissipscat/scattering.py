"""Plane-pulse scattering by the unit sphere and back-scattering supports.

The incident wave is w_o(t, x) = phi_sigma'(<x, omega> - t) r_k(omega) with
phi_sigma(s) = exp(-(s/sigma)^2)/(sigma sqrt(pi)), a mollified version of
the distributional pulse delta'(<x, omega> - t) r_k(omega).  The scattered
part w_s solves the exterior problem with w_s + w_o in the wall space.  The
kernel is read off from the total wall trace u = w_o + w_s as

    S^{jk}(s) = c_norm sum_n w_n g_n'(<x_n, theta> - s),
    g_n(t) = <r_j(theta), A(nu_n) u(t, x_n)>,

which is the boundary integral with delta' applied exactly to the
(already mollified) trace.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .errors import IncompleteTrace, TooFewDirections
from .exterior_solver import (DomainSpec, build_domain, evolve, wall_forcing_from_closure,
                              _spherical_basis)
from .symbol_algebra import build_maxwell_system, eigen_frame, symbol_at

MAXWELL = build_maxwell_system()
C_NORM = 1.0


# -- geometry ----------------------------------------------------------------

@dataclass(frozen=True)
class Obstacle:
    kind: str = "sphere"
    axes: tuple = (1.0, 1.0, 1.0)

    @property
    def rho(self):
        return float(max(self.axes))


def sphere(radius=1.0):
    return Obstacle("sphere", (radius, radius, radius))


def ellipsoid(a, b, c):
    return Obstacle("ellipsoid", (a, b, c))


def support_function(obstacle, omega):
    """min over the boundary of <y, omega>."""
    w = np.asarray(omega, dtype=float)
    a = np.asarray(obstacle.axes, dtype=float)
    return -float(np.sqrt(np.sum((a * w) ** 2, axis=-1)))


def support_bound_from_speeds(tau_j, tau_k, rho):
    return -((tau_j + tau_k) / (tau_j * tau_k)) * rho


def backscatter_support_bound(sys, j, k, omega, obstacle):
    """Upper end of the s-support of S^{jk}(s, -omega, omega)."""
    omega = np.asarray(omega, dtype=float)
    d = sys.d
    if not (1 <= j <= d and 1 <= k <= d):
        raise ValueError(f"indices must lie in 1..{d}")
    tj = eigen_frame(sys, -omega).tau[j - 1]
    tk = eigen_frame(sys, omega).tau[k - 1]
    return support_bound_from_speeds(tj, tk, support_function(obstacle, omega))


def fibonacci_directions(count):
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    phi = np.pi * (1 + np.sqrt(5)) * i
    r = np.sqrt(1 - z**2)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _distance_to_ellipsoid(p, axes):
    a2 = np.asarray(axes, dtype=float) ** 2
    if np.sum(p**2 / a2) <= 1:
        return 0.0
    f = lambda t: np.sum(a2 * p**2 / (a2 + t) ** 2) - 1
    hi = 1.0
    while f(hi) > 0:
        hi *= 2
    t = brentq(f, 0.0, hi, xtol=1e-15)
    q = a2 * p / (a2 + t)
    return float(np.linalg.norm(p - q))


@dataclass(frozen=True)
class HullReport:
    vertices: np.ndarray
    hausdorff: float
    volume: float


def hull_reconstruct(directions, rho_values, obstacle=None):
    """Intersection of the half-spaces <x, omega> >= rho(omega)."""
    directions = np.asarray(directions, dtype=float)
    rho_values = np.asarray(rho_values, dtype=float)
    if len(directions) < 50:
        raise TooFewDirections(f"{len(directions)} directions, need >= 50")
    halfspaces = np.column_stack([-directions, rho_values])
    inter = HalfspaceIntersection(halfspaces, np.zeros(3))
    verts = inter.intersections
    vol = ConvexHull(verts).volume
    dist = np.nan
    if obstacle is not None:
        dist = max(_distance_to_ellipsoid(v, obstacle.axes) for v in verts)
    return HullReport(verts, float(dist), float(vol))


# -- incident pulse -------------------------------------------------------------

def mollifier(s, sigma, order=0):
    """Derivatives of phi_sigma(s) = exp(-(s/sigma)^2) / (sigma sqrt(pi))."""
    u = np.asarray(s, dtype=float) / sigma
    g = np.exp(-u**2) / (sigma * np.sqrt(np.pi))
    # d^n/ds^n exp(-u^2) = (-1)^n H_n(u) exp(-u^2) / sigma^n
    herm = np.polynomial.hermite.hermval(u, [0] * order + [1])
    return (-1) ** order * herm * g / sigma**order


@dataclass(frozen=True)
class IncidentPulse:
    k: int
    omega: np.ndarray
    sigma: float
    polarization: np.ndarray         # r_k(omega), length 6
    amplitude: float = 1.0

    def profile(self, s, order=1):
        return self.amplitude * mollifier(s, self.sigma, order)

    def __call__(self, t, x):
        """(E, B) at world points x (..., 3)."""
        s = np.asarray(x, dtype=float) @ self.omega - t
        val = self.profile(s)[..., None] * self.polarization
        return val[..., :3], val[..., 3:]


def incident_pulse(k, omega, sigma, amplitude=1.0, sys=MAXWELL, polarization=None):
    """Mollified plane pulse along omega; polarization overrides r_k(omega)."""
    omega = np.asarray(omega, dtype=float)
    omega = omega / np.linalg.norm(omega)
    if polarization is None:
        r = eigen_frame(sys, omega).pos_vectors[k - 1]
    else:
        r = np.asarray(polarization, dtype=float)
    return IncidentPulse(k, omega, float(sigma), r, float(amplitude))


# -- disturbed waves and traces ------------------------------------------------------

@dataclass
class TraceRecord:
    times: np.ndarray                # (nt,)
    nodes: np.ndarray                # (N, 3) world coordinates on the wall
    weights: np.ndarray              # (N,)
    normals: np.ndarray              # (N, 3) nu = -x
    values: np.ndarray               # (nt, N, 6) total field u = w_o + w_s
    scattered: np.ndarray = field(default=None, repr=False)
    pulse: IncidentPulse = None
    flux: dict = field(default_factory=dict)

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])


def wall_nodes(domain, nphi=8):
    """Centre-latitude x uniform-azimuth nodes on r = 1 in world coordinates."""
    phi = 2 * np.pi * np.arange(nphi) / nphi
    theta = domain.th_cent
    er, _, _ = _spherical_basis(theta[:, None], phi[None, :])
    nodes = (er @ domain.frame.T).reshape(-1, 3)
    w = np.repeat(domain.Cw, nphi) * (2 * np.pi / nphi)
    return nodes, w, phi


def _modes_to_nodes(domain, wall, phi):
    """Total wall field per mode -> Cartesian (E, B) at centre nodes."""
    nth = domain.spec.ntheta
    acc = np.zeros((nth, len(phi), 6))
    _, et_b, ep_b = _spherical_basis(domain.th_cent[:, None], phi[None, :])
    for m, (et, ep, bt, bp) in wall.items():
        # node-located E_phi, B_theta to centres; ends by linear extrapolation
        epc = _nodes_to_centres(ep)
        btc = _nodes_to_centres(bt)
        fac = domain.mode_factor(m)
        rot = np.exp(1j * m * phi)[None, :]
        vals = [fac * np.real(v[:, None] * rot) for v in (et, epc, btc, bp)]
        acc[..., :3] += vals[0][..., None] * et_b + vals[1][..., None] * ep_b
        acc[..., 3:] += vals[2][..., None] * et_b + vals[3][..., None] * ep_b
    acc[..., :3] = acc[..., :3] @ domain.frame.T
    acc[..., 3:] = acc[..., 3:] @ domain.frame.T
    return acc.reshape(-1, 6)


def _nodes_to_centres(v):
    c = 0.5 * (v[:-1] + v[1:])
    c[0] = 1.5 * v[1] - 0.5 * v[2]
    c[-1] = 1.5 * v[-2] - 0.5 * v[-3]
    return c


def _mode_pair_flux(domain, wa, wb):
    """int over the wall of <A(nu) a, b> for two real fields given by modes."""
    total = 0.0
    for m in wa:
        eta, epa, bta, bpa = wa[m]
        etb, epb, btb, bpb = wb[m]
        cen = np.real(eta * np.conj(bpb) + etb * np.conj(bpa))
        nod = np.real(epa * np.conj(btb) + epb * np.conj(bta))
        total += domain.mode_factor(m) * (np.sum(domain.Cw * cen) - np.sum(domain.Sw * nod))
    return 2 * np.pi * total


def disturbed_wave(obstacle, eps, k, omega, sigma, T=None, nr=None, ntheta=None,
                   r_max=3.5, cfl=0.5, nphi=8, amplitude=1.0, points_per_sigma=6.0,
                   t_end=3.8, polarization=None):
    """Evolve the scattered part of a plane pulse hitting the unit sphere.

    Returns a TraceRecord with the total wall field u = w_o + w_s at wall
    nodes from t0 = -rho - 8 sigma (where w_s vanishes) to t_end, and the
    time-integrated wall fluxes of the scattered, cross and incident parts.
    """
    if obstacle.kind != "sphere" or abs(obstacle.rho - 1.0) > 1e-12:
        raise ValueError("dynamic runs are implemented for the unit sphere only")
    pulse = incident_pulse(k, omega, sigma, amplitude, polarization=polarization)
    h = sigma / points_per_sigma
    nr = nr or int(np.ceil((r_max - 1) / h))
    ntheta = ntheta or int(np.ceil(np.pi / h))
    spec = DomainSpec(r_max=r_max, nr=nr, ntheta=ntheta, modes=(1,), cfl=cfl,
                      boundary=eps, outer="absorb", axis=tuple(pulse.omega),
                      real_field=True)
    dom = build_domain(spec)
    forcing = wall_forcing_from_closure(dom, pulse)
    t0 = -obstacle.rho - 8 * sigma
    if T is None:
        T = t_end - t0
    traj = evolve(dom, None, T, forcing=forcing, t0=t0, check_energy=False,
                  record_wall=True)
    nodes, w, phi = wall_nodes(dom, nphi)
    times = traj.times
    inc_modes = [forcing(t) for t in times]
    scat_modes = []
    for tot, inc in zip(traj.wall_trace, inc_modes):
        scat_modes.append({m: tuple(a - b for a, b in zip(tot[m], inc[m])) for m in tot})
    values = np.array([_modes_to_nodes(dom, wt, phi) for wt in traj.wall_trace])
    scattered = np.array([_modes_to_nodes(dom, ws, phi) for ws in scat_modes])
    f_ss = np.array([_mode_pair_flux(dom, s, s) for s in scat_modes])
    f_os = np.array([_mode_pair_flux(dom, s, i) for s, i in zip(scat_modes, inc_modes)])
    f_oo = np.array([_mode_pair_flux(dom, i, i) for i in inc_modes])
    tr = lambda y: float(np.trapezoid(y, times))
    flux = {"scattered_outflow": tr(f_ss), "extinction": -2 * tr(f_os),
            "incident_net": tr(f_oo), "absorbed": -tr(f_ss + 2 * f_os + f_oo),
            "final_scattered_energy": float(traj.energy[-1]),
            # independent: energy left in the domain plus loss through r_max
            "energy_outflow": float(traj.energy[-1]) - tr(traj.outer_flux)}
    rec = TraceRecord(times, nodes, w, -nodes, values, scattered, pulse, flux)
    rec.domain = dom
    return rec


def incident_trace(pulse, times, nodes, weights):
    """Wall trace of the incident pulse alone on a transparent sphere."""
    vals = np.empty((len(times), len(nodes), 6))
    for i, t in enumerate(times):
        E, B = pulse(t, nodes)
        vals[i, :, :3], vals[i, :, 3:] = E, B
    return TraceRecord(np.asarray(times), nodes, weights, -nodes, vals,
                       np.zeros_like(vals), pulse)


def gauss_sphere_nodes(nt=64, nphi=128):
    ct, wt = np.polynomial.legendre.leggauss(nt)
    phi = 2 * np.pi * (np.arange(nphi) + 0.5) / nphi
    st = np.sqrt(1 - ct**2)
    nodes = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
                      np.outer(ct, np.ones(nphi))], -1).reshape(-1, 3)
    w = np.outer(wt, np.full(nphi, 2 * np.pi / nphi)).ravel()
    return nodes, w


# -- kernel ------------------------------------------------------------------

@dataclass
class KernelEstimate:
    theta: np.ndarray
    omega: np.ndarray
    s: np.ndarray
    values: np.ndarray               # (d, d, ns); filled for the computed k
    sigma: float
    c_norm: float = C_NORM
    scale: float = 0.0               # c_norm sum_n w_n max_t |A(nu_n) du_n/dt|


def _time_derivative(g, dt):
    d = np.empty_like(g)
    d[2:-2] = (-g[4:] + 8 * g[3:-1] - 8 * g[1:-3] + g[:-4]) / (12 * dt)
    d[:2] = (g[1:3] - g[0:2]) / dt
    d[-2:] = (g[-2:] - g[-3:-1]) / dt
    return d


def _cubic_sample(y, t0, dt, tq):
    """Four-point Lagrange interpolation of columns y[:, n] at tq[n, :]."""
    nt = y.shape[0]
    x = (tq - t0) / dt
    i = np.clip(np.floor(x).astype(int), 1, nt - 3)
    u = x - i
    cols = np.arange(y.shape[1])[:, None]
    w = [-u * (u - 1) * (u - 2) / 6, (u + 1) * (u - 1) * (u - 2) / 2,
         -(u + 1) * u * (u - 2) / 2, (u + 1) * u * (u - 1) / 6]
    out = sum(wk * y[i + o, cols] for wk, o in zip(w, (-1, 0, 1, 2)))
    return np.where(x < 0, 0.0, out)


def kernel_estimate(traces, theta, s, sys=MAXWELL, c_norm=C_NORM,
                    require_complete=True, out_vectors=None):
    """Mollified kernel S^{jk}(s, theta, omega) from total wall traces.

    traces: a TraceRecord or a dict {k: TraceRecord} for several incident
    polarizations (same omega and sigma).  out_vectors overrides the
    outgoing frame r_j(theta) (rows).
    """
    recs = traces if isinstance(traces, dict) else {traces.pulse.k: traces}
    theta = np.asarray(theta, dtype=float)
    s = np.asarray(s, dtype=float)
    if out_vectors is None:
        rj = eigen_frame(sys, theta).pos_vectors              # (d, r)
    else:
        rj = np.asarray(out_vectors, dtype=float)
    first = next(iter(recs.values()))
    d = sys.d
    vals = np.zeros((d, d, len(s)))
    scale = 0.0
    for k, rec in recs.items():
        xt = rec.nodes @ theta
        tq = xt[:, None] - s[None, :]                          # (N, ns)
        if require_complete and tq.max() > rec.times[-1] - 2 * rec.dt:
            raise IncompleteTrace(f"need traces up to t={tq.max():.3f}, "
                                  f"have {rec.times[-1]:.3f}")
        A = np.array([symbol_at(sys, nu) for nu in rec.normals])   # (N, r, r)
        proj = np.einsum("jr,nrc->jnc", rj, A)                 # r_j^T A(nu)
        g = np.einsum("jnc,tnc->jtn", proj, rec.values)        # (d, nt, N)
        du = _time_derivative(rec.values, rec.dt)
        env = np.linalg.norm(np.einsum("nrc,tnc->tnr", A, du), axis=-1).max(axis=0)
        scale = max(scale, c_norm * float(rec.weights @ env))
        for j in range(d):
            gp = _time_derivative(g[j], rec.dt)
            samp = _cubic_sample(gp, rec.times[0], rec.dt, tq)  # (N, ns)
            vals[j, k - 1] = c_norm * rec.weights @ samp
    return KernelEstimate(theta, first.pulse.omega, s, vals, first.pulse.sigma, c_norm, scale)


def support_certificate(est, obstacle, margin=None, j=None, k=None):
    """leak = max |S| beyond bound + margin over the global peak."""
    margin = 3 * est.sigma if margin is None else margin
    bound = support_bound_from_speeds(1.0, 1.0, support_function(obstacle, est.omega))
    v = est.values if j is None else est.values[j - 1:j, k - 1:k]
    peak = np.abs(v).max()
    beyond = est.s > bound + margin
    if peak == 0:
        return {"pass": True, "leak": 0.0, "bound": float(bound)}
    leak = float(np.abs(v[..., beyond]).max() / peak) if beyond.any() else 0.0
    return {"pass": bool(leak < 1e-2), "leak": leak, "bound": float(bound)}


def write_traces(path, nodes_path, rec):
    nt, n, _ = rec.values.shape
    ti, ni = np.meshgrid(np.arange(nt), np.arange(n), indexing="ij")
    rows = np.column_stack([rec.times[ti.ravel()], ni.ravel(), rec.values.reshape(-1, 6)])
    np.savetxt(path, rows, delimiter=",", header="t,node_index,u1,u2,u3,u4,u5,u6",
               comments="", fmt=["%.17g", "%d"] + ["%.17g"] * 6)
    tab = np.column_stack([np.arange(n), rec.nodes, rec.weights, rec.normals])
    np.savetxt(nodes_path, tab, delimiter=",", header="node_index,x,y,z,weight,nu1,nu2,nu3",
               comments="", fmt=["%d"] + ["%.17g"] * 7)


def write_kernel(path, sidecar_path, est, obstacle):
    import json
    d = est.values.shape[0]
    rows = [(j + 1, k + 1, s, v) for j in range(d) for k in range(d)
            for s, v in zip(est.s, est.values[j, k])]
    np.savetxt(path, np.array(rows), delimiter=",", header="j,k,s,value", comments="",
               fmt=["%d", "%d", "%.17g", "%.17g"])
    cert = support_certificate(est, obstacle)
    side = {"theta": est.theta.tolist(), "omega": est.omega.tolist(),
            "sigma": est.sigma, "c_norm": est.c_norm, "bound": cert["bound"],
            "leak": cert["leak"], "pass": cert["pass"]}
    with open(sidecar_path, "w") as fh:
        json.dump(side, fh, indent=2)


# -- multi-direction driver --------------------------------------------------------

def default_s_grid(obstacle, sigma, ds=None):
    rho = obstacle.rho
    ds = ds or sigma / 10
    return np.arange(-2 * rho - 0.5, 2 * rho + 1.5 + ds / 2, ds)


def _backscatter_job(args):
    obstacle, eps, omega, sigma, s, kw = args
    omega = np.asarray(omega, dtype=float)
    recs = {k: disturbed_wave(obstacle, eps, k, omega, sigma, **kw) for k in (1, 2)}
    est = kernel_estimate(recs, -omega, s)
    return est, {k: r.flux for k, r in recs.items()}


def backscatter_study(obstacle, eps, directions, sigma, s=None, workers=None, **kw):
    """Back-scattering kernels S(., -omega, omega) for several directions.

    Each direction (both polarizations) is an independent job; jobs run in
    worker processes when more than one worker is available.  Results come
    back in input order.
    """
    from concurrent.futures import ProcessPoolExecutor
    from .kernels import thread_count

    s = default_s_grid(obstacle, sigma) if s is None else np.asarray(s, dtype=float)
    jobs = [(obstacle, eps, tuple(np.asarray(w, dtype=float)), sigma, s, kw) for w in directions]
    workers = min(workers or thread_count(), len(jobs))
    if workers <= 1:
        out = [_backscatter_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(workers) as ex:
            out = list(ex.map(_backscatter_job, jobs))
    results = []
    for (est, flux) in out:
        results.append({"estimate": est, "flux": flux,
                        "certificate": support_certificate(est, obstacle)})
    return results
