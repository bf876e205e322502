"""Time-domain Maxwell solver outside the unit sphere.

Fields are expanded in azimuthal modes exp(i m phi) about a chosen axis and
each mode is advanced on a staggered (r, theta) grid:

    E_r (i+1/2, f)   E_theta (i, j)     E_phi (i, f)
    B_r (i, j)       B_theta (i+1/2, f) B_phi (i+1/2, j)

with integer radial nodes r_i = 1 + i dr, polar nodes theta_f = f dtheta
(poles included) and polar centres theta_j = (j + 1/2) dtheta.  The factor
sin(theta) is replaced by the exact cell integrals of sin(theta) over the
dual cells, which makes the semi-discrete operator skew-adjoint in the
energy inner product up to the wall terms.  The wall condition enters
through the tangential B at r = 1,

    B_phi = y E_theta,   B_theta = -y E_phi,   y = -(1 + eps) <= 0,

and the discrete energy E = int |E|^2 + |B|^2 then satisfies
dE/dt = 2 y int |E_tan|^2 dS + (outer wall term) <= 0.
"""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (CFLViolation, InstabilityDetected, InvalidSpec,
                     NonMonotoneErrors, WindowTooShort)
from .symbol_algebra import (BoundarySpace, build_maxwell_system, impedance_space,
                             orth_rows, tangent_basis)

COMPONENTS = ("Er", "Et", "Ep", "Br", "Bt", "Bp")
RK4_IMAG_LIMIT = 2.0 * np.sqrt(2.0)


@dataclass(frozen=True)
class DomainSpec:
    r_max: float = 8.0
    nr: int = 256
    ntheta: int = 64
    modes: tuple = (0,)
    cfl: float = 0.5
    boundary: object = 0.5           # eps >= 0, "pec", "pmc" or BoundarySpace
    outer: str = "absorb"            # "absorb" | "reflect"
    axis: tuple = (1.0, 0.0, 0.0)
    real_field: bool = True          # modes m > 0 stand for the pair +-m


def boundary_reflection_map(boundary, nu):
    """Map z -> w from arriving (Sigma_-) to departing (Sigma_+) amplitudes.

    Bases: Sigma_-(nu) is spanned by (-nu x t_k, t_k)/sqrt(2) and
    Sigma_+(nu) by (nu x t_k, t_k)/sqrt(2), t_1, t_2 a tangent frame.  The
    map is read off from a boundary space N containing Ker A(nu); its value
    for the impedance space is eps/(2 + eps) times the identity.
    """
    nu = np.asarray(nu, dtype=float)
    space = _as_space(boundary, nu)
    t1, t2 = tangent_basis(nu)
    s = 1 / np.sqrt(2)
    minus = np.array([np.concatenate([-np.cross(nu, t), t]) * s for t in (t1, t2)])
    plus = np.array([np.concatenate([np.cross(nu, t), t]) * s for t in (t1, t2)])
    q = orth_rows(space.basis)
    zc = q @ minus.conj().T            # arriving coordinates of the N-basis
    wc = q @ plus.conj().T
    # combinations with unit arriving part; kernel content drops out
    c = np.linalg.solve(zc.conj().T @ zc, zc.conj().T)
    return (c @ wc).T


def _as_space(boundary, nu):
    if isinstance(boundary, BoundarySpace):
        return boundary
    if boundary == "pec":
        from .symbol_algebra import pec_space
        return pec_space(nu)
    if boundary == "pmc":
        from .symbol_algebra import pmc_space
        return pmc_space(nu)
    return impedance_space(nu, float(boundary))


def admittance(boundary):
    """Scalar y with B_tan = y r x E_tan on the wall, or inf for E_tan = 0."""
    if boundary == "pec":
        return np.inf
    if boundary == "pmc":
        return 0.0
    if isinstance(boundary, BoundarySpace):
        m = boundary_reflection_map(boundary, boundary.normal)
        if np.abs(m - m[0, 0] * np.eye(2)).max() > 1e-10 or abs(m[0, 0].imag) > 1e-10:
            raise InvalidSpec("solver supports rotation-invariant real wall maps only")
        mm = m[0, 0].real
        if abs(mm - 1) < 1e-12:
            return np.inf
        return (mm + 1) / (mm - 1)
    eps = float(boundary)
    if eps < 0:
        raise InvalidSpec("impedance parameter must be >= 0")
    return -(1.0 + eps)


def _frame(axis):
    ez = np.asarray(axis, dtype=float)
    ez = ez / np.linalg.norm(ez)
    a = np.eye(3)[np.argmin(np.abs(ez))]
    ex = np.cross(a, ez)
    ex /= np.linalg.norm(ex)
    ey = np.cross(ez, ex)
    return np.stack([ex, ey, ez], axis=1)      # columns: solver axes in world


class Domain:
    """Grid metrics, weights and the discrete operator for one DomainSpec."""

    def __init__(self, spec):
        if spec.r_max <= 1:
            raise InvalidSpec("r_max must exceed 1")
        if spec.nr < 8 or spec.ntheta < 8:
            raise InvalidSpec("nr and ntheta must be >= 8")
        if spec.outer not in ("absorb", "reflect"):
            raise InvalidSpec(f"unknown outer wall {spec.outer!r}")
        if spec.cfl <= 0:
            raise InvalidSpec("cfl must be positive")
        self.spec = spec
        self.y = admittance(spec.boundary)
        self.modes = tuple(int(m) for m in spec.modes)
        nr, nt = spec.nr, spec.ntheta
        self.dr = (spec.r_max - 1.0) / nr
        self.dth = np.pi / nt
        self.ri = 1.0 + self.dr * np.arange(nr + 1)
        self.rh = 1.0 + self.dr * (np.arange(nr) + 0.5)
        self.th_node = self.dth * np.arange(nt + 1)
        self.th_cent = self.dth * (np.arange(nt) + 0.5)
        c_node = np.cos(self.th_node)
        # cell integrals of sin(theta) over centre cells and node dual cells
        self.Cw = (c_node[:-1] - c_node[1:])                 # (nt,)
        edges = np.concatenate([[0.0], self.th_cent, [np.pi]])
        ce = np.cos(edges)
        self.Sw = ce[:-1] - ce[1:]                           # (nt+1,)
        self.C = self.Cw / self.dth
        self.S = self.Sw / self.dth
        self.dri = np.full(nr + 1, self.dr)
        self.dri[0] = self.dri[-1] = 0.5 * self.dr
        ri, rh = self.ri[:, None], self.rh[:, None]
        self.weights = {
            "Er": rh**2 * self.dr * self.Sw[None, :],
            "Et": ri**2 * self.dri[:, None] * self.Cw[None, :],
            "Ep": ri**2 * self.dri[:, None] * self.Sw[None, :],
            "Br": ri**2 * self.dri[:, None] * self.Cw[None, :],
            "Bt": rh**2 * self.dr * self.Sw[None, :],
            "Bp": rh**2 * self.dr * self.Cw[None, :],
        }
        self.frame = _frame(spec.axis)
        self.h_min = min(self.dr, self.dth)
        self.dt = spec.cfl * self.h_min
        self.dt_stable = RK4_IMAG_LIMIT / self.spectral_radius()
        if self.dt > 0.9 * self.dt_stable:
            raise InvalidSpec(f"dt {self.dt:.4g} exceeds 0.9 x stability bound "
                              f"{self.dt_stable:.4g}")

    # -- layout ----------------------------------------------------------
    def shapes(self):
        nr, nt = self.spec.nr, self.spec.ntheta
        return {"Er": (nr, nt + 1), "Et": (nr + 1, nt), "Ep": (nr + 1, nt + 1),
                "Br": (nr + 1, nt), "Bt": (nr, nt + 1), "Bp": (nr, nt)}

    def zero_mode(self):
        return {k: np.zeros(s, dtype=complex) for k, s in self.shapes().items()}

    def mask(self, m, u):
        u["Ep"][:, 0] = u["Ep"][:, -1] = 0.0
        u["Bt"][:, 0] = u["Bt"][:, -1] = 0.0
        if m != 0:
            u["Er"][:, 0] = u["Er"][:, -1] = 0.0
        if np.isinf(self.y):
            u["Et"][0] = 0.0
            u["Ep"][0] = 0.0
        return u

    def mode_factor(self, m):
        return 2.0 if (self.spec.real_field and m > 0) else 1.0

    # -- operator --------------------------------------------------------
    def wall_b(self, u, forcing=None):
        """Tangential B on r = 1 (Bt at nodes, Bp at centres) for one mode."""
        et, ep = u["Et"][0], u["Ep"][0]
        if forcing is not None:
            eto, epo, bto, bpo = forcing
            if np.isinf(self.y):
                raise InvalidSpec("forced runs need a finite wall admittance")
            return -self.y * (ep + epo) - bto, self.y * (et + eto) - bpo
        if np.isinf(self.y):
            return np.zeros_like(ep), np.zeros_like(et)
        return -self.y * ep, self.y * et

    def outer_b(self, u):
        et, ep = u["Et"][-1], u["Ep"][-1]
        if self.spec.outer == "absorb":
            return -ep, et
        return np.zeros_like(ep), np.zeros_like(et)

    def rhs(self, m, u, forcing=None):
        """Time derivative of one mode."""
        ri, rh = self.ri[:, None], self.rh[:, None]
        dr, dth = self.dr, self.dth
        C, S = self.C[None, :], self.S[None, :]
        Er, Et, Ep, Br, Bt, Bp = (u[k] for k in COMPONENTS)
        im = 1j * m
        bt0, bp0 = self.wall_b(u, forcing)
        btn, bpn = self.outer_b(u)

        # radial fluxes with wall values, r B on integer and half nodes
        rbp = np.empty((self.spec.nr + 2, self.spec.ntheta), dtype=complex)
        rbp[0] = self.ri[0] * bp0
        rbp[1:-1] = rh * Bp
        rbp[-1] = self.ri[-1] * bpn
        rbt = np.empty((self.spec.nr + 2, self.spec.ntheta + 1), dtype=complex)
        rbt[0] = self.ri[0] * bt0
        rbt[1:-1] = rh * Bt
        rbt[-1] = self.ri[-1] * btn
        dri = self.dri[:, None]

        CBp = C * Bp
        dEr = np.zeros_like(Er)
        dEr[:, 1:-1] = (CBp[:, 1:] - CBp[:, :-1]) / (dth * rh * S[:, 1:-1])
        dEr[:, 0] = CBp[:, 0] / (dth * rh[:, 0] * S[0, 0])
        dEr[:, -1] = -CBp[:, -1] / (dth * rh[:, 0] * S[0, -1])
        dEr -= im * Bt / (rh * S)

        dEt = im * Br / (ri * C) - (rbp[1:] - rbp[:-1]) / (ri * dri)

        dEp = (rbt[1:] - rbt[:-1]) / (ri * dri)
        dEp[:, 1:-1] -= (Br[:, 1:] - Br[:, :-1]) / (ri * dth)

        SEp = S * Ep
        dBr = -(SEp[:, 1:] - SEp[:, :-1]) / (ri * C * dth) + im * Et / (ri * C)

        rEp = ri * Ep
        dBt = -im * Er / (rh * S) + (rEp[1:] - rEp[:-1]) / (rh * dr)

        rEt = ri * Et
        dBp = -(rEt[1:] - rEt[:-1]) / (rh * dr) + (Er[:, 1:] - Er[:, :-1]) / (rh * dth)

        du = {"Er": dEr, "Et": dEt, "Ep": dEp, "Br": dBr, "Bt": dBt, "Bp": dBp}
        return self.mask(m, du)

    def mode_energy(self, u):
        return float(sum(np.sum(self.weights[k] * np.abs(u[k])**2) for k in COMPONENTS))

    def mode_flux(self, u, forcing=None):
        """Wall flux int <A(nu) u, u> dS / (2 pi) for the total wall field."""
        bt0, bp0 = self.wall_b(u, forcing)
        et, ep = u["Et"][0], u["Ep"][0]
        if forcing is not None:
            et, ep = et + forcing[0], ep + forcing[1]
            bt0, bp0 = bt0 + forcing[2], bp0 + forcing[3]
        return float(2 * (np.sum(self.Cw * np.real(np.conj(et) * bp0))
                          - np.sum(self.Sw * np.real(np.conj(ep) * bt0))))

    def mode_outer_flux(self, u):
        """Flux into the domain through r = r_max, same scaling as mode_flux."""
        btn, bpn = self.outer_b(u)
        et, ep = u["Et"][-1], u["Ep"][-1]
        R2 = self.ri[-1] ** 2
        return float(-2 * R2 * (np.sum(self.Cw * np.real(np.conj(et) * bpn))
                                - np.sum(self.Sw * np.real(np.conj(ep) * btn))))

    def spectral_radius(self, iters=60, seed=1):
        m = max(self.modes, key=abs)
        rng = np.random.default_rng(seed)
        u = self.mask(m, {k: rng.normal(size=s) + 1j * rng.normal(size=s)
                          for k, s in self.shapes().items()})
        lam = 0.0
        for _ in range(iters):
            nrm = np.sqrt(self.mode_energy(u))
            u = {k: v / nrm for k, v in u.items()}
            u = self.rhs(m, u)
            lam = np.sqrt(self.mode_energy(u))
        return 1.02 * lam


def build_domain(spec):
    return Domain(spec)


@dataclass
class SolverState:
    fields: dict                     # m -> component dict
    t: float = 0.0

    def copy(self):
        return SolverState({m: {k: v.copy() for k, v in u.items()}
                            for m, u in self.fields.items()}, self.t)


def zero_state(domain, t=0.0):
    return SolverState({m: domain.zero_mode() for m in domain.modes}, t)


def energy(domain, state):
    """int |E|^2 + |B|^2 over the grid, summed in fixed mode order."""
    return float(2 * np.pi * sum(domain.mode_factor(m) * domain.mode_energy(state.fields[m])
                                 for m in sorted(state.fields)))


# -- sampling between Cartesian closures and modes ---------------------------

def _spherical_basis(theta, phi):
    theta, phi = np.broadcast_arrays(theta, phi)
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    er = np.stack([st * cp, st * sp, ct], -1)
    et = np.stack([ct * cp, ct * sp, -st], -1)
    ep = np.stack([-sp, cp, np.zeros_like(phi)], -1)
    return er, et, ep


def component_locations(domain):
    """(r, theta) arrays for each staggered component."""
    ri, rh = domain.ri, domain.rh
    tn, tc = domain.th_node, domain.th_cent
    g = lambda r, t: np.meshgrid(r, t, indexing="ij")
    return {"Er": g(rh, tn), "Et": g(ri, tc), "Ep": g(ri, tn),
            "Br": g(ri, tc), "Bt": g(rh, tn), "Bp": g(rh, tc)}


def modes_from_closure(domain, func, t=0.0, nphi=None):
    """Azimuthal mode coefficients of func(t, x_world) -> (E, B)."""
    mmax = max(abs(m) for m in domain.modes)
    nphi = nphi or max(8, 4 * mmax + 4)
    phi = 2 * np.pi * np.arange(nphi) / nphi
    out = {m: {} for m in domain.modes}
    which = {"r": 0, "t": 1, "p": 2}
    for name, (R, T) in component_locations(domain).items():
        basis = _spherical_basis(T[..., None], phi)
        pts = R[..., None, None] * basis[0]
        world = pts @ domain.frame.T
        E, B = func(t, world)
        vec = E if name[0] == "E" else B
        vec = vec @ domain.frame                       # back to solver axes
        comp = np.sum(vec * basis[which[name[1]]], axis=-1)
        coef = np.fft.fft(comp, axis=-1) / nphi
        for m in domain.modes:
            out[m][name] = coef[..., m % nphi].astype(complex)
    for m in domain.modes:
        domain.mask(m, out[m])
    return out


def state_from_closure(domain, func, t=0.0):
    return SolverState(modes_from_closure(domain, func, t), t)


def wall_forcing_from_closure(domain, func, nphi=None):
    """Callable t -> {m: (E_theta, E_phi, B_theta, B_phi)} on the r = 1 wall."""
    mmax = max(abs(m) for m in domain.modes)
    nphi = nphi or max(8, 4 * mmax + 4)
    phi = 2 * np.pi * np.arange(nphi) / nphi
    bc = _spherical_basis(domain.th_cent[:, None], phi)
    bn = _spherical_basis(domain.th_node[:, None], phi)
    wc = bc[0] @ domain.frame.T
    wn = bn[0] @ domain.frame.T

    def forcing(t):
        Ec, Bc = func(t, wc)
        En, Bn = func(t, wn)
        Ec, Bc, En, Bn = (v @ domain.frame for v in (Ec, Bc, En, Bn))
        et = np.fft.fft(np.sum(Ec * bc[1], -1), axis=-1) / nphi
        bp = np.fft.fft(np.sum(Bc * bc[2], -1), axis=-1) / nphi
        ep = np.fft.fft(np.sum(En * bn[2], -1), axis=-1) / nphi
        bt = np.fft.fft(np.sum(Bn * bn[1], -1), axis=-1) / nphi
        out = {}
        for m in domain.modes:
            k = m % nphi
            f_ep, f_bt = ep[:, k].copy(), bt[:, k].copy()
            f_ep[[0, -1]] = 0.0
            f_bt[[0, -1]] = 0.0
            out[m] = (et[:, k], f_ep, f_bt, bp[:, k])
        return out
    return forcing


def _interp_component(domain, name, arr, r, theta):
    R, T = component_locations(domain)[name]
    rs, ts = R[:, 0], T[0]
    i = np.clip(np.searchsorted(rs, r) - 1, 0, len(rs) - 2)
    j = np.clip(np.searchsorted(ts, theta) - 1, 0, len(ts) - 2)
    a = np.clip((r - rs[i]) / (rs[i + 1] - rs[i]), 0, 1)
    b = np.clip((theta - ts[j]) / (ts[j + 1] - ts[j]), 0, 1)
    return ((1 - a) * (1 - b) * arr[i, j] + a * (1 - b) * arr[i + 1, j]
            + (1 - a) * b * arr[i, j + 1] + a * b * arr[i + 1, j + 1])


def point_values(domain, state, x_world):
    """(E, B) in world coordinates at one point, by bilinear interpolation."""
    p = domain.frame.T @ np.asarray(x_world, dtype=float)
    r = np.linalg.norm(p)
    theta = np.arccos(np.clip(p[2] / r, -1, 1))
    phi = np.arctan2(p[1], p[0])
    er, et, ep = _spherical_basis(np.array(theta), np.array(phi))
    vals = {}
    for name in COMPONENTS:
        acc = 0.0
        for m, u in state.fields.items():
            z = _interp_component(domain, name, u[name], r, theta) * np.exp(1j * m * phi)
            acc += domain.mode_factor(m) * z.real if domain.spec.real_field else z
        vals[name] = np.real(acc)
    E = vals["Er"] * er + vals["Et"] * et + vals["Ep"] * ep
    B = vals["Br"] * er + vals["Bt"] * et + vals["Bp"] * ep
    return domain.frame @ E, domain.frame @ B


# -- time stepping ----------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    energy: np.ndarray
    boundary_flux: np.ndarray
    probes: np.ndarray               # (nt, nprobe, 6)
    state: SolverState
    dt: float
    wall_trace: list = field(default_factory=list, repr=False)
    snapshots: list = field(default_factory=list, repr=False)
    compatibility_residual: float = 0.0
    outer_flux: np.ndarray = None


def _axpy(u, k, a):
    return {m: {c: u[m][c] + a * k[m][c] for c in u[m]} for m in u}


def _full_rhs(domain, u, forcing_t):
    return {m: domain.rhs(m, u[m], None if forcing_t is None else forcing_t[m]) for m in u}


def rk4_step(domain, state, dt, forcing=None):
    t = state.t
    u = state.fields
    f = (lambda tt: None) if forcing is None else forcing
    k1 = _full_rhs(domain, u, f(t))
    k2 = _full_rhs(domain, _axpy(u, k1, dt / 2), f(t + dt / 2))
    k3 = _full_rhs(domain, _axpy(u, k2, dt / 2), f(t + dt / 2))
    k4 = _full_rhs(domain, _axpy(u, k3, dt), f(t + dt))
    new = {m: {c: u[m][c] + dt / 6 * (k1[m][c] + 2 * k2[m][c] + 2 * k3[m][c] + k4[m][c])
               for c in u[m]} for m in u}
    return SolverState(new, t + dt)


def total_flux(domain, state, forcing_t=None):
    return float(2 * np.pi * sum(
        domain.mode_factor(m) * domain.mode_flux(state.fields[m],
                                                 None if forcing_t is None else forcing_t[m])
        for m in sorted(state.fields)))


def outer_flux(domain, state):
    return float(2 * np.pi * sum(domain.mode_factor(m) * domain.mode_outer_flux(state.fields[m])
                                 for m in sorted(state.fields)))


def evolve(domain, initial, T, probes=(), forcing=None, dt=None, t0=0.0,
           check_energy=True, record_wall=False, snapshot_every=None):
    """RK4 method-of-lines advance from t0 to t0 + T.

    initial is a SolverState, a closure func(t, x) -> (E, B) in world
    coordinates, or None for zero data.  forcing, if given, maps t to the
    per-mode incident wall values (E_theta, E_phi, B_theta, B_phi) and the
    wall condition is imposed on the sum of the solved and incident fields.
    """
    if dt is None:
        dt = domain.dt
    if dt > domain.dt_stable:
        raise CFLViolation(f"dt {dt:.4g} above stability bound {domain.dt_stable:.4g}")
    compat = 0.0
    if initial is None:
        state = zero_state(domain, t0)
    elif isinstance(initial, SolverState):
        state = initial.copy()
    else:
        state = state_from_closure(domain, initial, t0)
        compat = wall_compatibility(domain, initial, t0)
    nsteps = int(round(T / dt))
    if nsteps > 0 and abs(nsteps * dt - T) > 1e-9 * max(T, 1.0):
        dt = T / nsteps
    probes = [np.asarray(p, dtype=float) for p in probes]
    times, en, fl, pv, wall, snaps, ofl = [], [], [], [], [], [], []

    def record(st):
        ft = None if forcing is None else forcing(st.t)
        times.append(st.t)
        en.append(energy(domain, st))
        fl.append(total_flux(domain, st, ft))
        ofl.append(outer_flux(domain, st))
        pv.append([np.concatenate(point_values(domain, st, p)) for p in probes])
        if record_wall:
            wall.append(wall_values(domain, st, ft))

    record(state)
    e0 = en[0]
    for step in range(nsteps):
        state = rk4_step(domain, state, dt, forcing)
        record(state)
        if not np.isfinite(en[-1]):
            raise InstabilityDetected(f"non-finite energy at t={state.t:.4g}")
        if check_energy and forcing is None:
            if en[-1] > en[-2] * (1 + 1e-9) + 1e-12 * e0:
                raise InstabilityDetected(
                    f"energy grew from {en[-2]:.6g} to {en[-1]:.6g} at t={state.t:.4g}")
        if snapshot_every and (step + 1) % snapshot_every == 0:
            snaps.append(state.copy())
    return Trajectory(np.array(times), np.array(en), np.array(fl),
                      np.array(pv).reshape(len(times), len(probes), 6), state, dt,
                      wall, snaps, compat, np.array(ofl))


def wall_values(domain, state, forcing_t=None):
    """Total tangential wall field per mode: (E_theta, E_phi, B_theta, B_phi)."""
    out = {}
    for m, u in state.fields.items():
        f = None if forcing_t is None else forcing_t[m]
        bt, bp = domain.wall_b(u, f)
        et, ep = u["Et"][0].copy(), u["Ep"][0].copy()
        if f is not None:
            et, ep, bt, bp = et + f[0], ep + f[1], bt + f[2], bp + f[3]
        out[m] = (et, ep, bt, bp)
    return out


def wall_compatibility(domain, func, t=0.0):
    """Relative mismatch of the data with the wall condition at r = 1."""
    if np.isinf(domain.y):
        return 0.0
    f = wall_forcing_from_closure(domain, func)(t)
    num = den = 0.0
    for m, (et, ep, bt, bp) in f.items():
        num += np.sum(np.abs(bp - domain.y * et)**2) + np.sum(np.abs(bt + domain.y * ep)**2)
        den += np.sum(np.abs(bp)**2 + np.abs(et)**2) + np.sum(np.abs(bt)**2 + np.abs(ep)**2)
    return float(np.sqrt(num / den)) if den > 0 else 0.0


# -- diagnostics ------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    rate: float
    stderr: float
    samples: int


def fit_decay_rate(traj, t_min=0.5, t_max=None, min_samples=50):
    """Least-squares slope of (1/2) log E(t) over the window."""
    sel = traj.times >= t_min
    if t_max is not None:
        sel &= traj.times <= t_max
    t, e = traj.times[sel], traj.energy[sel]
    if len(t) < min_samples:
        raise WindowTooShort(f"{len(t)} samples in window, need {min_samples}")
    y = 0.5 * np.log(e)
    A = np.column_stack([t, np.ones_like(t)])
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(t) - 2, 1)
    cov = np.linalg.inv(A.T @ A) * (resid @ resid) / dof
    return DecayFit(float(coef[0]), float(np.sqrt(cov[0, 0])), int(len(t)))


def ads_closure(params):
    from .ads_fields import eval_fields

    def func(t, x):
        return eval_fields(params, t, x)
    return func


def _windowed(domain, u, r_window):
    if r_window is None:
        return u
    out = {}
    for k, v in u.items():
        R = component_locations(domain)[k][0]
        out[k] = np.where(R <= r_window, v, 0.0)
    return out


def relative_error(domain, state, exact_state, r_window=None):
    """Energy-norm error relative to the exact state, optionally for r <= r_window."""
    diff = {m: _windowed(domain, {k: state.fields[m][k] - exact_state.fields[m][k]
                                  for k in COMPONENTS}, r_window) for m in state.fields}
    ref = {m: _windowed(domain, exact_state.fields[m], r_window) for m in state.fields}
    return float(np.sqrt(energy(domain, SolverState(diff)) / energy(domain, SolverState(ref))))


def pointwise_error(domain, state, exact_state, r_window=None):
    worst = 0.0
    for m in state.fields:
        d = _windowed(domain, {k: state.fields[m][k] - exact_state.fields[m][k]
                               for k in COMPONENTS}, r_window)
        worst = max(worst, max(float(np.abs(v).max()) for v in d.values()))
    return worst


def convergence_study(specs, params, T=1.0, dt=None, r_window="auto"):
    """Errors against the exact decaying solution and observed orders.

    specs must be factor-2 refinements.  The exact solution is incoming, so
    the truncated outer wall misses its inflow; by default errors are taken
    on r <= r_max - T - 0.5, outside the reach of that truncation.  A fixed
    dt isolates the spatial error.
    """
    if len(specs) < 3:
        raise ValueError("need at least three resolutions")
    func = ads_closure(params)
    errs, maxerrs = [], []
    for spec in specs:
        dom = build_domain(spec)
        win = spec.r_max - T - 0.5 if r_window == "auto" else r_window
        traj = evolve(dom, func, T, dt=dt)
        exact = state_from_closure(dom, func, traj.state.t)
        errs.append(relative_error(dom, traj.state, exact, win))
        maxerrs.append(pointwise_error(dom, traj.state, exact, win))
    errs = np.array(errs)
    if np.any(np.diff(errs) >= 0):
        raise NonMonotoneErrors(f"errors {errs} do not decrease")
    orders = np.log2(errs[:-1] / errs[1:])
    return {"errors": errs.tolist(), "max_errors": maxerrs, "orders": orders.tolist()}
