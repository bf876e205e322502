import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dissipscat import symbol_algebra as sa
from dissipscat.errors import DegenerateDirection, NotMaximalDissipative

SYS = sa.build_maxwell_system()


def unit(rng, zmax=0.95):
    while True:
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        if abs(v[2]) < zmax:
            return v


def hand_block(xi):
    # (E, B) -> (xi x B, -xi x E) written out entry by entry
    x, y, z = xi
    c = np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]], dtype=float)
    a = np.zeros((6, 6))
    a[:3, 3:] = c
    a[3:, :3] = -c
    return a


def test_matrices_symmetric_and_rank():
    for m in SYS.matrices:
        assert np.array_equal(m, m.T)
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert sa.matrix_rank(sa.symbol_at(SYS, unit(rng))) == 4


def test_eigenvalues_on_axis():
    w = np.linalg.eigvalsh(sa.symbol_at(SYS, [0, 0, 1]))
    assert np.allclose(np.sort(w), [-1, -1, 0, 0, 1, 1], atol=1e-14)


def test_cross_product_oracle():
    u = np.array([1.0, 0, 0, 0, 0, 0])
    out = sa.symbol_at(SYS, [0, 0, 1]) @ u
    assert np.allclose(out, [0, 0, 0, 0, -1, 0])
    assert np.allclose(sa.symbol_at(SYS, [0, 0, 1]) @ np.zeros(6), 0)


def test_symbol_linear_and_transcription():
    assert np.array_equal(sa.symbol_at(SYS, [0, 0, 0]), np.zeros((6, 6)))
    xi = np.array([0.3, -0.2, 0.7])
    assert np.allclose(sa.symbol_at(SYS, 2 * xi), 2 * sa.symbol_at(SYS, xi))
    assert np.array_equal(sa.symbol_at(SYS, [1, 0, 0]), hand_block([1, 0, 0]))
    assert np.allclose(sa.symbol_at(SYS, xi), hand_block(xi))


def test_eigen_frame_residuals():
    rng = np.random.default_rng(1)
    for _ in range(100):
        xi = unit(rng)
        fr = sa.eigen_frame(SYS, xi)
        assert np.allclose(fr.tau, [1, 1], atol=1e-12)
        a = sa.symbol_at(SYS, -xi)
        for t, r in zip(fr.tau, fr.pos_vectors):
            assert np.linalg.norm(a @ r - t * r) < 1e-12
        for t, r in zip(fr.tau, fr.neg_vectors):
            assert np.linalg.norm(a @ r + t * r) < 1e-12
        allv = np.vstack([fr.pos_vectors, fr.neg_vectors, fr.kernel_basis])
        assert np.allclose(allv @ allv.T, np.eye(6), atol=1e-12)
        # kernel is {(a xi, b xi)}
        ref = np.array([np.r_[xi, 0, 0, 0], np.r_[0, 0, 0, xi]])
        assert sa.subspace_distance(fr.kernel_basis, ref) < 1e-12


def test_eigen_frame_caps():
    with pytest.raises(DegenerateDirection):
        sa.eigen_frame(SYS, np.array([0.0, 0.0, 1.0]))
    with pytest.raises(DegenerateDirection):
        sa.eigen_frame(SYS, np.array([1e-4, 0.0, -1.0]) / np.hypot(1e-4, 1.0))


def test_eigen_frame_continuity():
    a, b = np.array([1.0, 0, 0.2]), np.array([0, 1.0, -0.3])
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    jumps = []
    for n in (20, 40, 80):
        path = [np.cos(t) * a + np.sin(t) * b for t in np.linspace(0, 1.2, n)]
        path = [p / np.linalg.norm(p) for p in path]
        fr = [sa.eigen_frame(SYS, p).pos_vectors for p in path]
        jumps.append(max(np.abs(f1 - f0).max() for f0, f1 in zip(fr, fr[1:])))
    assert jumps[0] > jumps[1] > jumps[2]
    assert jumps[2] < 0.05


def test_boundary_form_examples():
    nu = np.array([0.0, 0.0, 1.0])
    ker = sa.kernel_basis(SYS, nu)
    for k in ker:
        assert abs(sa.boundary_form(SYS, nu, k)) < 1e-14
    # With A(nu)(E, B) = (nu x B, -nu x E) this vector gives +2; its
    # companion (E, -B) lies in Sigma_- and gives -2.
    u = np.r_[-1.0, 0, 0, 0, 1.0, 0]
    assert sa.boundary_form(SYS, nu, u) == pytest.approx(2.0)
    v = np.r_[-1.0, 0, 0, 0, -1.0, 0]
    assert sa.boundary_form(SYS, nu, v) == pytest.approx(-2.0)
    assert sa.subspace_distance(np.atleast_2d(v), sa.sigma_basis(SYS, nu, -1)[:1]) > 0
    assert np.linalg.norm(sa.sigma_projector(SYS, nu, -1) @ v - v) < 1e-14


def test_sigma_minus_form_is_minus_tangential_norm():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        nu = rng.normal(size=3)
        nu /= np.linalg.norm(nu)
        basis = np.vstack([sa.sigma_basis(SYS, nu, -1), sa.kernel_basis(SYS, nu)])
        u = rng.normal(size=4) @ basis
        E, B = u[:3], u[3:]
        tan = lambda w: w - (w @ nu) * nu
        expect = -(tan(E) @ tan(E) + tan(B) @ tan(B))
        assert sa.boundary_form(SYS, nu, u) == pytest.approx(expect, abs=1e-12)


@pytest.mark.parametrize("eps", [0.0, 0.25, 1.0, 4 / 3])
def test_impedance_space(eps):
    rng = np.random.default_rng(3)
    nu = unit(rng)
    sp = sa.impedance_space(nu, eps)
    assert sp.dim == 4
    rep = sa.check_maximal_dissipative(SYS, nu, sp)
    assert rep["dissipative"] and rep["maximal"]
    ker = sa.kernel_basis(SYS, nu)
    assert np.linalg.norm(sa.projector(sp.basis) @ ker.T - ker.T) < 1e-12
    for _ in range(100):
        u = (rng.normal(size=4) + 1j * rng.normal(size=4)) @ sp.basis
        assert sa.boundary_form(SYS, nu, u) <= 1e-12
    sm = sa.sigma_basis(SYS, nu, -1)
    inside = np.linalg.norm(sa.projector(sp.basis) @ sm.T - sm.T)
    if eps == 0:
        assert inside < 1e-12
    else:
        # N intersect Sigma_- = {0}: principal angles all nonzero
        q = np.vstack([sa.orth_rows(sp.basis), sm])
        assert sa.matrix_rank(q) == 6


def test_check_maximal_examples():
    nu = np.array([0.6, 0.0, 0.8])
    sp = sa.BoundarySpace(nu, sa.sigma_basis(SYS, nu, +1)[:1].astype(complex))
    assert not sa.check_maximal_dissipative(SYS, nu, sp)["dissipative"]
    rep = sa.check_maximal_dissipative(SYS, nu, sa.sigma_minus_space(SYS, nu))
    assert rep["dissipative"] and rep["maximal"]
    with pytest.raises(NotMaximalDissipative):
        sa.factorize_boundary_space(SYS, nu, sp)


def check_factorization(nu, space, mu):
    fac = sa.factorize_boundary_space(SYS, nu, space)
    assert fac.mu == mu
    assert sa.pairing_errors(SYS, nu, fac) < 1e-10
    assert sa.subspace_distance(sa.reconstruct_space(SYS, nu, fac).basis, space.basis) < 1e-10
    return fac


def test_factorization_examples():
    nu = np.array([0.0, 0.6, -0.8])
    for eps in (0.25, 1.0, 4 / 3):
        check_factorization(nu, sa.impedance_space(nu, eps), 0)
    check_factorization(nu, sa.pmc_space(nu), 2)
    check_factorization(nu, sa.pec_space(nu), 2)
    fac = check_factorization(nu, sa.sigma_minus_space(SYS, nu), 0)
    assert sa.subspace_distance(fac.nvec, sa.sigma_basis(SYS, nu, -1)) < 1e-10


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), mu=st.integers(0, 2))
def test_factorization_random_contractions(seed, mu):
    rng = np.random.default_rng(seed)
    nu = rng.normal(size=3)
    nu /= np.linalg.norm(nu)
    sp = sa.space_from_contraction(SYS, nu, sa.random_contraction(2, mu, rng))
    check_factorization(nu, sp, mu)


def test_classification():
    nu = np.array([0.6, 0.0, 0.8])
    assert sa.classify_boundary_space(SYS, nu, sa.impedance_space(nu, 0.0))["sigma_minus"]
    c1 = sa.classify_boundary_space(SYS, nu, sa.impedance_space(nu, 1.0))
    assert not c1["sigma_minus"] and c1["generic"]
    cp = sa.classify_boundary_space(SYS, nu, sa.pmc_space(nu))
    assert not cp["sigma_minus"] and cp["mu"] == 2
    # scaling invariance
    sp = sa.impedance_space(nu, 0.5)
    scaled = sa.BoundarySpace(nu, sp.basis * np.array([2.0, 1j, -0.5, 3 - 1j])[:, None])
    a = sa.classify_boundary_space(SYS, nu, sp)
    b = sa.classify_boundary_space(SYS, nu, scaled)
    assert a["sigma_minus"] == b["sigma_minus"] and a["generic"] == b["generic"]
    rep = sa.boundary_report(SYS, nu, sp)
    assert {"dissipative", "maximal", "worst_form_value", "mu", "sigma_minus",
            "generic"} <= set(rep)


def test_divergence_compatibility():
    rep = sa.check_divergence_compatibility(SYS)
    assert rep["ok"] and rep["qa_max"] < 1e-15
    xi = np.array([0, 0, 1.0])
    im = sa.orth_rows(sa.symbol_at(SYS, xi).T)
    assert np.abs(sa.divergence_operator(xi) @ im.T).max() < 1e-15
    assert np.allclose(np.abs(im[:, [2, 5]]), 0)


def test_matrix_io_roundtrip(tmp_path):
    m = np.array([[1 + 2j, -0.5], [3e-17, 1j]])
    p = tmp_path / "m.txt"
    sa.write_matrix(p, m)
    assert p.read_text().splitlines()[0] == "2 2"
    assert np.array_equal(sa.read_matrix(p), m)
