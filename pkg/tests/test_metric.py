import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from uqchain.chain import ChainSpec, GeneralCoupling, SingleSCoupling, hamiltonian
from uqchain.errors import BadBlock, DegenerateSpectrum, IllConditioned, NotQuasiHermitian
from uqchain.metric import (
    alpha0,
    assess_metric,
    biorthogonal_system,
    det_formula_check,
    eta0,
    eta_product,
    gamma_hat,
    hermitian_metric,
    isotypic_identity_check,
    metric_from_json,
    metric_general,
    metric_polynomial_form,
    metric_to_json,
    multiparam_metric,
    pd_range_scan,
    similarity_residual,
    symmetrization_residual,
    universal_eta,
)
from uqchain.qalgebra import DeformationParams, embed_two_site, isotypic_projectors, projector, r_matrix, spin_rep

S1 = np.array([[0, 1], [1, 0]], dtype=complex)
S2 = np.array([[0, -1j], [1j, 0]])
S3 = np.diag([1.0, -1.0]).astype(complex)


def two_by_two(theta=0.5, z=0.3):
    return np.sinh(z) * expm(1j * theta * S3) + np.sin(theta) * np.cosh(z) * S1


def quasi_hermitian(n, seed, degenerate=False):
    """Oracle construction V D V^-1 with real D."""
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    D = rng.uniform(-3, 3, n)
    if degenerate:
        D[1] = D[0]
    return V @ np.diag(D) @ np.linalg.inv(V), D


def pair_for(two_S, N, g):
    return universal_eta(spin_rep(DeformationParams(g, two_S)), N)


def random_general(two_S, N, g, rng):
    b = rng.uniform(-2, 2, (N - 1, two_S + 1))
    return hamiltonian(ChainSpec(DeformationParams(g, two_S), N, GeneralCoupling(b))).matrix


# -- bi-orthogonal systems

@pytest.mark.parametrize("seed", range(4))
def test_biorthogonal_invariants(seed):
    H, D = quasi_hermitian(8, seed)
    sysm = biorthogonal_system(H)
    V, W, G = sysm.omegas, sysm.duals, sysm.gram
    assert np.allclose(np.linalg.norm(V, axis=0), 1)
    assert np.allclose(W.conj().T @ V, np.eye(8), atol=1e-10)
    assert np.allclose(G, G.conj().T) and np.linalg.eigvalsh(G).min() > 0
    assert np.allclose(W.conj().T @ W, np.linalg.inv(G), atol=1e-10)
    assert np.allclose(W @ G, V, atol=1e-10)
    assert np.allclose(sum(sysm.projectors()), np.eye(8), atol=1e-9)
    assert np.allclose(np.sort(sysm.distinct), np.sort(D), atol=1e-9)


def test_biorthogonal_symbol_rules():
    H, _ = quasi_hermitian(8, 11)
    sysm = biorthogonal_system(H)
    rng = np.random.default_rng(0)
    A, B = (rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)) for _ in range(2))
    G = sysm.gram
    assert np.allclose(sysm.symbol(A @ B), sysm.symbol(A) @ G @ sysm.symbol(B), atol=1e-9)
    assert np.allclose(sysm.dual_symbol(A), G @ sysm.symbol(A) @ G, atol=1e-9)
    V = sysm.omegas
    assert np.allclose(V @ sysm.symbol(A) @ V.conj().T, A, atol=1e-9)


def test_biorthogonal_hermitian_input():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    sysm = biorthogonal_system(X + X.conj().T)
    assert np.allclose(sysm.gram, np.eye(5), atol=1e-10)
    assert np.allclose(sysm.duals, sysm.omegas, atol=1e-10)


def test_biorthogonal_two_by_two_projectors():
    z = 0.3
    sysm = biorthogonal_system(two_by_two(0.5, z))
    P = [expm(-z / 2 * S2) @ (np.eye(2) + sgn * S1) / 2 @ expm(z / 2 * S2) for sgn in (-1, 1)]
    # distinct eigenvalues are ascending: lambda_- first
    for got, want in zip(sysm.eigenprojectors(), P):
        assert np.allclose(got, want, atol=1e-12)


def test_biorthogonal_rejects():
    with pytest.raises((NotQuasiHermitian, IllConditioned)):
        biorthogonal_system(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(NotQuasiHermitian):
        biorthogonal_system(np.diag([1j, -1j]))


def test_degenerate_eigenspaces_grouped():
    H, D = quasi_hermitian(6, 2, degenerate=True)
    sysm = biorthogonal_system(H)
    assert sorted(sysm.multiplicities) == [1, 1, 1, 1, 2]


# -- metric from eigenvectors

def test_metric_general_identity_blocks_equals_eta0():
    H, _ = quasi_hermitian(6, 5)
    sysm = biorthogonal_system(H)
    m = metric_general(sysm, [np.eye(k) for k in sysm.multiplicities])
    assert np.allclose(m.eta, eta0(H).eta, atol=1e-9)
    assert m.is_positive_definite
    assert np.allclose(m.eta @ m.inverse, np.eye(6), atol=1e-9)
    assert symmetrization_residual(m.eta, H) < 1e-10


@pytest.mark.parametrize("phi", [0.0, 0.7, -1.3])
def test_metric_general_two_by_two_family(phi):
    z = 0.3
    sysm = biorthogonal_system(two_by_two(0.5, z))
    blocks = [np.exp(-phi) / np.cosh(z), np.exp(phi) / np.cosh(z)]
    m = metric_general(sysm, blocks)
    want = expm(z / 2 * S2) @ expm(phi * S1) @ expm(z / 2 * S2)
    assert np.allclose(m.eta, want, atol=1e-10)


def test_metric_general_degenerate_blocks():
    H, _ = quasi_hermitian(6, 2, degenerate=True)
    sysm = biorthogonal_system(H)
    rng = np.random.default_rng(1)
    blocks = []
    for k in sysm.multiplicities:
        X = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
        blocks.append(X @ X.conj().T + np.eye(k))
    m = metric_general(sysm, blocks)
    assert m.is_positive_definite and symmetrization_residual(m.eta, H) < 1e-10


def test_metric_general_bad_blocks():
    sysm = biorthogonal_system(two_by_two())
    with pytest.raises(BadBlock):
        metric_general(sysm, [1.0])
    with pytest.raises(BadBlock):
        metric_general(sysm, [1.0, -2.0])
    with pytest.raises(BadBlock):
        metric_general(sysm, [1.0, np.ones((2, 2))])


def test_metric_hermitian_input_diagonal_in_eigenbasis():
    H = np.diag([1.0, 2.0, 4.0]).astype(complex)
    m = metric_general(biorthogonal_system(H), [3.0, 0.5, 2.0])
    assert m.is_positive_definite and np.allclose(m.eta, np.diag(np.diag(m.eta)))


def test_eta0_two_by_two():
    z = 0.3
    H = two_by_two(0.5, z)
    Omega = expm(z / 2 * S2)
    V = np.linalg.inv(Omega) @ np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert np.allclose(eta0(H, eigenvectors=V).eta, expm(z * S2), atol=1e-12)
    # unit eigenvectors are 1/sqrt(cosh z) times the ones above, so eta_0 picks up cosh z
    assert np.allclose(eta0(H).eta, np.cosh(z) * expm(z * S2), atol=1e-12)


def test_eta0_hermitian_and_basis_independent():
    X = np.random.default_rng(0).standard_normal((4, 4))
    assert np.allclose(eta0(X + X.T).eta, np.eye(4), atol=1e-10)
    H, _ = quasi_hermitian(6, 8)
    Q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((6, 6)) + 0j)
    assert np.allclose(eta0(H).eta, eta0(H, basis=Q).eta, atol=1e-10)
    assert symmetrization_residual(eta0(H).eta, H) < 1e-10


def test_eta0_rejects_non_eigenvectors():
    with pytest.raises(ValueError):
        eta0(two_by_two(), eigenvectors=np.eye(2))


def test_polynomial_form():
    assert np.allclose(metric_polynomial_form(np.array([[2.5]]), [3.0]).eta, [[3.0]])
    H = two_by_two()
    # linear in Theta: recover the two basis operators and least-squares match eta_0
    e11 = metric_polynomial_form(H, [1.0, 1.0]).eta
    e12 = metric_polynomial_form(H, [1.0, 2.0]).eta
    M2 = e12 - e11
    M1 = e11 - M2
    target = eta0(H).eta
    A = np.stack([M1.ravel(), M2.ravel()], axis=1)
    theta, *_ = np.linalg.lstsq(A, target.ravel(), rcond=None)
    assert np.all(theta.real > 0)
    assert np.linalg.norm(A @ theta - target.ravel()) < 1e-9


def test_polynomial_form_chain_and_degenerate():
    H = hamiltonian(ChainSpec(DeformationParams(0.4, 1), 2, SingleSCoupling(0, (1.0,)))).matrix
    with pytest.raises(DegenerateSpectrum):
        metric_polynomial_form(H, [1.0, 1.0])
    Hq, _ = quasi_hermitian(5, 4)
    m = metric_polynomial_form(Hq, [1.0, 2.0, 0.5, 1.5, 1.0])
    assert m.is_positive_definite and symmetrization_residual(m.eta, Hq) < 1e-10


def test_metric_properties_on_random_instances():
    H, _ = quasi_hermitian(6, 21)
    sysm = biorthogonal_system(H)
    rng = np.random.default_rng(2)
    etas = [metric_general(sysm, list(rng.uniform(0.2, 3, 6))).eta for _ in range(3)]
    # composition of symmetrizers
    comp = etas[0] @ np.linalg.inv(etas[1]) @ etas[2]
    assert symmetrization_residual(comp, H) < 1e-9
    # eigenprojector criterion, both directions
    Ps = sysm.eigenprojectors()
    assert all(np.allclose(etas[0] @ P, P.conj().T @ etas[0], atol=1e-9) for P in Ps)
    bad = etas[0] + np.diag(np.arange(6.0))
    assert not all(np.allclose(bad @ P, P.conj().T @ bad, atol=1e-9) for P in Ps)
    assert symmetrization_residual(bad, H) > 1e-6
    # similarity transport
    assert similarity_residual(etas[0], H) < 1e-9


def test_assess_metric_diagnostics():
    m = assess_metric(np.diag([1.0, -1.0]))
    assert not m.is_positive_definite and m.min_eig_hermitian_part == pytest.approx(-1)
    m = assess_metric(np.array([[1.0, 1j], [0, 1.0]]))
    assert m.hermiticity_residual > 0.1 and not m.is_positive_definite
    d = assess_metric(np.eye(2)).diagnostics(gamma=0.1)
    assert d["is_pd"] and d["gamma"] == 0.1


# -- universal metric

def test_universal_eta_two_sites_is_r():
    rep = spin_rep(DeformationParams(0.3, 2))
    pair = universal_eta(rep, 2)
    assert np.allclose(pair.eta_plus, r_matrix(rep, "+")) and np.allclose(pair.eta_minus, r_matrix(rep, "-"))


def test_universal_eta_classical_limit():
    pair = pair_for(1, 3, 0.0)
    assert np.allclose(pair.eta_plus, np.eye(8)) and np.allclose(pair.eta_minus, np.eye(8))
    assert np.allclose(hermitian_metric(pair, 0.0).eta, 2 * np.eye(8))


@pytest.mark.parametrize("two_S,N", [(1, 3), (1, 4), (2, 3)])
def test_universal_eta_relations(two_S, N):
    g = 0.3 if two_S == 1 else 0.1
    rep = spin_rep(DeformationParams(g, two_S))
    pair = universal_eta(rep, N)
    assert np.linalg.norm(eta_product(rep, N, "+", "left") - eta_product(rep, N, "+", "right")) < 1e-11
    assert np.allclose(pair.eta_plus.conj().T, pair.eta_minus, atol=1e-10)
    assert abs(np.linalg.det(pair.eta_plus) - 1) < 1e-9
    for s in range(two_S + 1):
        P = projector(rep, s)
        for n in range(1, N):
            lhs = pair.eta_plus @ embed_two_site(P, n, n + 1, N)
            rhs = embed_two_site(P, n + 1, n, N) @ pair.eta_plus
            assert np.linalg.norm(lhs - rhs) < 1e-10


def test_alpha0_and_gamma_hat():
    assert alpha0(1, 2, 0.4) == pytest.approx(0.2)
    assert alpha0(1, 3, 0.3) == pytest.approx(0.0)
    assert alpha0(2, 3, 0.0) == 0.0
    assert gamma_hat(1, 2) == pytest.approx(np.pi / 2)
    assert gamma_hat(1, 3) == pytest.approx(np.pi / 3)
    assert gamma_hat(2, 3) == pytest.approx(np.pi / 12)


def test_hermitian_metric_pd_inside_range():
    pair = pair_for(1, 2, 0.5)
    assert hermitian_metric(pair, alpha0(1, 2, 0.5)).is_positive_definite


@pytest.mark.parametrize("two_S,N", [(1, 2), (1, 3), (2, 3)])
def test_hermitian_metric_loses_positivity_above_threshold(two_S, N):
    g = 1.01 * gamma_hat(two_S, N)
    m = hermitian_metric(pair_for(two_S, N, g), alpha0(two_S, N, g))
    assert m.min_eig_hermitian_part <= 0


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=10, deadline=None)
def test_hermitian_metric_symmetrizes_random_chains(seed):
    rng = np.random.default_rng(seed)
    g = 0.8 * gamma_hat(1, 3)
    m = hermitian_metric(pair_for(1, 3, g), alpha0(1, 3, g))
    assert m.hermiticity_residual < 1e-12
    assert symmetrization_residual(m.eta, random_general(1, 3, g, rng)) < 1e-10


def test_multiparam_metric():
    pair = pair_for(1, 3, 0.3)
    assert np.allclose(multiparam_metric(pair, [0.4], [1.0]).eta, hermitian_metric(pair, 0.4).eta)
    p0 = pair_for(1, 3, 0.0)
    assert np.allclose(multiparam_metric(p0, [0.4, 1.1], [1.0, 0.5]).eta,
                       (2 * np.cos(0.4) + np.cos(1.1)) * np.eye(8))
    m = multiparam_metric(pair, [0.1, -0.3], [1.0, 0.4])
    assert m.hermiticity_residual < 1e-12
    H = random_general(1, 3, 0.3, np.random.default_rng(9))
    assert symmetrization_residual(m.eta, H) < 1e-9


# -- determinant formula

def test_det_formula_classical_limit():
    chk = det_formula_check(pair_for(1, 3, 0.0), 0.0)
    assert chk.log_abs_lhs == pytest.approx(8 * np.log(2))
    assert chk.rel_err < 1e-12


def test_det_formula_two_sites_direct():
    g = 0.4
    chk = det_formula_check(pair_for(1, 2, g), 0.0)
    # phases s(s+1) - N S(S+1) = -3/2 (s=0, exponent 1) and 1/2 (s=1, exponent 3)
    rhs = (2 * np.cos(-1.5 * g)) * (2 * np.cos(0.5 * g)) ** 3
    direct = np.linalg.det(hermitian_metric(pair_for(1, 2, g), 0.0).eta)
    assert direct.real == pytest.approx(rhs, rel=1e-9)
    assert np.exp(chk.log_abs_rhs) == pytest.approx(abs(rhs), rel=1e-9)
    assert chk.rel_err < 1e-9


def test_det_formula_three_sites():
    g = 0.3
    assert det_formula_check(pair_for(1, 3, g), alpha0(1, 3, g)).rel_err < 1e-8


# -- positivity scans

@pytest.mark.parametrize("two_S,N", [(1, 2), (1, 3)])
def test_pd_range_scan(two_S, N):
    scan = pd_range_scan(two_S, N, resolution=1e-4, n_grid=60)
    assert scan.boundary >= gamma_hat(two_S, N) - 1e-3
    assert scan.is_pd_curve[0]


# -- isotypic identity

@pytest.mark.parametrize("two_S,N,g", [(1, 2, 0.4), (2, 2, 0.25), (1, 4, 0.2)])
def test_isotypic_identity(two_S, N, g):
    rep = spin_rep(DeformationParams(g, two_S))
    assert isotypic_identity_check(universal_eta(rep, N), isotypic_projectors(rep, N)) < 1e-10


def test_isotypic_identity_classical():
    rep = spin_rep(DeformationParams(0.0, 1))
    assert isotypic_identity_check(universal_eta(rep, 3), isotypic_projectors(rep, 3)) < 1e-14


# -- serialization

def test_metric_json_round_trip():
    eta = hermitian_metric(pair_for(1, 2, 0.3), 0.1).eta
    doc = json.loads(json.dumps(metric_to_json(eta)))
    assert np.array_equal(metric_from_json(doc), eta)
