"""Metric operators: dynamical (from eigenvectors) and universal (from R-matrices)."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BadBlock, DegenerateSpectrum, DomainError, IllConditioned, NotQuasiHermitian
from .qalgebra import (
    DeformationParams,
    IsotypicData,
    SpinRep,
    embed_two_site,
    multiplicities,
    r_matrix,
    spin_rep,
)
from .spectral import CLUSTER_TOL, REALITY_TOL, cluster_eigenvalues

__all__ = [
    "HERMITICITY_TOL",
    "PD_TOL",
    "BiorthogonalSystem",
    "MetricCandidate",
    "UniversalMetricPair",
    "DetCheck",
    "PDScan",
    "assess_metric",
    "symmetrization_residual",
    "biorthogonal_system",
    "metric_general",
    "eta0",
    "metric_polynomial_form",
    "universal_eta",
    "eta_product",
    "hermitian_metric",
    "multiparam_metric",
    "alpha0",
    "gamma_hat",
    "lowest_spin",
    "det_formula_check",
    "pd_range_scan",
    "isotypic_identity_check",
    "similarity_residual",
    "metric_to_json",
    "metric_from_json",
]

HERMITICITY_TOL = 1e-9
PD_TOL = 1e-10
COND_MAX = 1e8


def _adj(A: np.ndarray) -> np.ndarray:
    return A.conj().T


def symmetrization_residual(eta, H) -> float:
    """||eta H - H* eta||_F relative to ||eta||_F ||H||_F."""
    eta, H = np.asarray(eta), np.asarray(H)
    scale = np.linalg.norm(eta) * np.linalg.norm(H)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(eta @ H - _adj(H) @ eta) / scale)


@dataclass(frozen=True)
class MetricCandidate:
    eta: np.ndarray = field(repr=False)
    hermiticity_residual: float
    min_eig_hermitian_part: float
    is_positive_definite: bool
    inverse: np.ndarray | None = field(default=None, repr=False)

    def diagnostics(self, **extra) -> dict:
        return {
            "hermiticity_residual": self.hermiticity_residual,
            "min_eig": self.min_eig_hermitian_part,
            "is_pd": self.is_positive_definite,
            **extra,
        }


def assess_metric(eta: np.ndarray, inverse: np.ndarray | None = None) -> MetricCandidate:
    """Hermiticity and positivity diagnostics for a candidate metric.

    Positive definite means Hermitian to 1e-9 relative and the smallest
    eigenvalue of (eta + eta*)/2 above 1e-10 * ||eta||_2.
    """
    eta = np.asarray(eta)
    norm = np.linalg.norm(eta)
    herm = float(np.linalg.norm(eta - _adj(eta)) / norm) if norm else 0.0
    w = np.linalg.eigvalsh((eta + _adj(eta)) / 2)
    min_eig = float(w[0])
    is_pd = herm < HERMITICITY_TOL and min_eig > PD_TOL * float(np.abs(w).max())
    return MetricCandidate(eta, herm, min_eig, bool(is_pd), inverse)


@dataclass(frozen=True)
class BiorthogonalSystem:
    """Unit eigenvectors (columns of ``omegas``), their duals and the Gram matrix.

    Columns are grouped by distinct eigenvalue; ``groups[j]`` indexes the
    columns spanning the j-th eigenspace.
    """

    omegas: np.ndarray = field(repr=False)
    duals: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray
    distinct: np.ndarray
    groups: tuple
    condition: float

    @property
    def multiplicities(self) -> list[int]:
        return [len(g) for g in self.groups]

    def projectors(self) -> list[np.ndarray]:
        """Rank-one P_j = w_j dual_j^dagger."""
        return [np.outer(self.omegas[:, j], self.duals[:, j].conj()) for j in range(self.omegas.shape[1])]

    def eigenprojectors(self) -> list[np.ndarray]:
        """Spectral projectors onto each eigenspace."""
        return [self.omegas[:, g] @ _adj(self.duals[:, g]) for g in self.groups]

    def symbol(self, A) -> np.ndarray:
        """O(A) with A = sum O_kn w_k w_n^dagger."""
        return _adj(self.duals) @ np.asarray(A) @ self.duals

    def dual_symbol(self, A) -> np.ndarray:
        """O~(A) with A = sum O~_kn dual_k dual_n^dagger."""
        return _adj(self.omegas) @ np.asarray(A) @ self.omegas


def biorthogonal_system(H, tol: float = REALITY_TOL, cluster_tol: float = CLUSTER_TOL) -> BiorthogonalSystem:
    """Eigenvector basis of a quasi-Hermitian operator and its dual basis.

    Raises
    ------
    NotQuasiHermitian
        If the spectrum is not real at ``tol``.
    IllConditioned
        If the eigenvector matrix has condition number above 1e8.
    """
    H = np.asarray(H)
    lam, V = np.linalg.eig(H)
    scale = max(1.0, float(np.abs(lam).max(initial=0.0)))
    if np.abs(lam.imag).max(initial=0.0) > tol * scale:
        raise NotQuasiHermitian(f"max |Im lambda| = {np.abs(lam.imag).max():.3g}")
    V = V / np.linalg.norm(V, axis=0)
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > COND_MAX:
        raise IllConditioned(f"eigenvector condition number {cond:.3g}")

    clusters = cluster_eigenvalues(lam, cluster_tol * scale)
    distinct = np.array([c.real for c, _ in clusters])
    assign = np.argmin(np.abs(lam[:, None] - distinct[None, :]), axis=1)
    order, groups, start = [], [], 0
    for j in range(len(distinct)):
        cols = np.flatnonzero(assign == j)
        order.extend(cols)
        groups.append(np.arange(start, start + len(cols)))
        start += len(cols)
    V = V[:, order]
    G = _adj(V) @ V
    W = np.linalg.solve(G.T, V.T).T  # W = V G^{-1}
    return BiorthogonalSystem(
        omegas=V, duals=W, gram=G, eigenvalues=lam.real[order],
        distinct=distinct, groups=tuple(groups), condition=cond,
    )


def _check_block(phi: np.ndarray, size: int) -> np.ndarray:
    phi = np.atleast_2d(np.asarray(phi, dtype=complex))
    if phi.shape != (size, size):
        raise BadBlock(f"block must be {size}x{size}, got {phi.shape}")
    if np.linalg.norm(phi - _adj(phi)) > 1e-12 * max(1.0, np.linalg.norm(phi)):
        raise BadBlock("block is not Hermitian")
    if np.linalg.eigvalsh((phi + _adj(phi)) / 2)[0] <= 0:
        raise BadBlock("block is not positive definite")
    return phi


def metric_general(system: BiorthogonalSystem, phi_blocks) -> MetricCandidate:
    """eta = sum_j W_j Phi_j W_j^dagger with inverse sum_j V_j Phi_j^-1 V_j^dagger.

    ``phi_blocks[j]`` is a Hermitian positive definite mu_j x mu_j matrix
    (a positive scalar is accepted for a simple eigenvalue).
    """
    if len(phi_blocks) != len(system.groups):
        raise BadBlock(f"need {len(system.groups)} blocks, got {len(phi_blocks)}")
    dim = system.omegas.shape[0]
    eta = np.zeros((dim, dim), dtype=complex)
    inv = np.zeros((dim, dim), dtype=complex)
    for g, phi in zip(system.groups, phi_blocks):
        phi = _check_block(phi, len(g))
        W, V = system.duals[:, g], system.omegas[:, g]
        eta += W @ phi @ _adj(W)
        inv += V @ np.linalg.inv(phi) @ _adj(V)
    return assess_metric(eta, inverse=inv)


def eta0(H, basis: np.ndarray | None = None, eigenvectors: np.ndarray | None = None) -> MetricCandidate:
    """eta_0 = Omega* Omega where Omega maps eigenvectors to an orthonormal basis.

    Parameters
    ----------
    H : array_like
        Quasi-Hermitian operator.
    basis : ndarray, optional
        Unitary whose columns are the target basis e_j; defaults to the
        identity. The result does not depend on it.
    eigenvectors : ndarray, optional
        Columns w_j with H w_j = l_j w_j. eta_0 scales with their norms, so
        this fixes the normalization; defaults to unit vectors.
    """
    if eigenvectors is None:
        V = biorthogonal_system(H).omegas
    else:
        V = np.asarray(eigenvectors, dtype=complex)
        H = np.asarray(H)
        lam = np.einsum("ij,ji->i", np.linalg.pinv(V), H @ V)
        if np.linalg.norm(H @ V - V * lam) > 1e-9 * max(1.0, np.linalg.norm(H)) * np.linalg.norm(V):
            raise ValueError("columns are not eigenvectors of H")
        cond = float(np.linalg.cond(V))
        if not np.isfinite(cond) or cond > COND_MAX:
            raise IllConditioned(f"eigenvector condition number {cond:.3g}")
    U = np.eye(V.shape[0]) if basis is None else np.asarray(basis)
    Omega = U @ np.linalg.inv(V)
    return assess_metric(_adj(Omega) @ Omega, inverse=V @ _adj(V))


def metric_polynomial_form(H, thetas, cluster_tol: float = CLUSTER_TOL) -> MetricCandidate:
    """eta = sum_j Theta_j prod_{n!=j}(H* - l_n) prod_{m!=j}(H - l_m), simple spectrum only."""
    H = np.asarray(H)
    lam = np.linalg.eigvals(H)
    scale = max(1.0, float(np.abs(lam).max(initial=0.0)))
    clusters = cluster_eigenvalues(lam, cluster_tol * scale)
    if len(clusters) != H.shape[0]:
        raise DegenerateSpectrum(f"{H.shape[0] - len(clusters)} repeated eigenvalue(s)")
    thetas = np.asarray(thetas, dtype=float)
    if thetas.shape != (len(clusters),) or np.any(thetas <= 0):
        raise ValueError("need one positive Theta per eigenvalue")
    roots = [c.real for c, _ in clusters]
    eye = np.eye(H.shape[0])
    eta = np.zeros_like(H, dtype=complex)
    for j, theta in enumerate(thetas):
        A = eye.astype(complex)
        for m, lm in enumerate(roots):
            if m != j:
                A = A @ (H - lm * eye)
        eta += theta * _adj(A) @ A
    return assess_metric(eta)


def similarity_residual(eta, H) -> float:
    """Non-Hermiticity of eta^{1/2} H eta^{-1/2} (relative, Frobenius)."""
    eta = np.asarray(eta)
    w, U = np.linalg.eigh((eta + _adj(eta)) / 2)
    w = np.clip(w, 0.0, None)
    root = U @ np.diag(np.sqrt(w)) @ _adj(U)
    inv_root = U @ np.diag(1 / np.sqrt(w)) @ _adj(U)
    X = root @ np.asarray(H) @ inv_root
    return float(np.linalg.norm(X - _adj(X)) / max(np.linalg.norm(X), 1e-300))


@dataclass(frozen=True)
class UniversalMetricPair:
    eta_plus: np.ndarray = field(repr=False)
    eta_minus: np.ndarray = field(repr=False)
    two_S: int
    N: int
    gamma: float


def eta_product(rep: SpinRep, N: int, sign: str = "+", ordering: str = "left") -> np.ndarray:
    """Ordered product of embedded R-matrices.

    ``left``:  eta = Rl_N ... Rl_2,   Rl_n = R_{n-1,n} ... R_{1,n}
    ``right``: eta = Rr_1 ... Rr_{N-1}, Rr_n = R_{n,n+1} ... R_{n,N}
    """
    if N < 2:
        raise DomainError("need N >= 2")
    R = r_matrix(rep, sign)
    factors = []
    if ordering == "left":
        for n in range(N, 1, -1):
            factors += [(m, n) for m in range(n - 1, 0, -1)]
    elif ordering == "right":
        for n in range(1, N):
            factors += [(n, m) for m in range(n + 1, N + 1)]
    else:
        raise ValueError("ordering must be 'left' or 'right'")
    eta = np.eye(rep.dim**N, dtype=complex)
    for i, j in factors:
        eta = eta @ embed_two_site(R, i, j, N)
    return eta


def universal_eta(rep: SpinRep, N: int) -> UniversalMetricPair:
    """The coupling-independent symmetrizers eta^+_N and eta^-_N."""
    return UniversalMetricPair(
        eta_plus=eta_product(rep, N, "+"),
        eta_minus=eta_product(rep, N, "-"),
        two_S=rep.two_S, N=N, gamma=rep.gamma,
    )


def hermitian_metric(pair: UniversalMetricPair, alpha: float) -> MetricCandidate:
    """eta(alpha) = e^{i alpha} eta^+ + e^{-i alpha} eta^-."""
    return assess_metric(np.exp(1j * alpha) * pair.eta_plus + np.exp(-1j * alpha) * pair.eta_minus)


def multiparam_metric(pair: UniversalMetricPair, alphas, betas) -> MetricCandidate:
    """sum_n beta_n (e^{i a_n} eta+ (eta-^-1 eta+)^{n-1} + e^{-i a_n} eta- (eta+^-1 eta-)^{n-1})."""
    alphas, betas = list(alphas), list(betas)
    if len(alphas) != len(betas) or not alphas:
        raise ValueError("need matching, non-empty alpha and beta lists")
    ep, em = pair.eta_plus, pair.eta_minus
    step_p = np.linalg.solve(em, ep)
    step_m = np.linalg.solve(ep, em)
    acc_p, acc_m = ep.copy(), em.copy()
    eta = np.zeros_like(ep)
    for n, (a, b) in enumerate(zip(alphas, betas)):
        if n:
            acc_p = acc_p @ step_p
            acc_m = acc_m @ step_m
        eta += b * (np.exp(1j * a) * acc_p + np.exp(-1j * a) * acc_m)
    return assess_metric(eta)


def lowest_spin(two_S: int, N: int) -> float:
    """s_0: 0 when NS is an integer, 1/2 otherwise."""
    return 0.0 if (two_S * N) % 2 == 0 else 0.5


def alpha0(two_S: int, N: int, gamma: float) -> float:
    """Optimal phase (gamma/2)(NS(2S+1-NS) - s0(s0+1))."""
    S, s0 = two_S / 2, lowest_spin(two_S, N)
    return gamma / 2 * (N * S * (2 * S + 1 - N * S) - s0 * (s0 + 1))


def gamma_hat(two_S: int, N: int) -> float:
    """pi / ((NS - s0)(NS + s0 + 1))."""
    NS, s0 = N * two_S / 2, lowest_spin(two_S, N)
    return np.pi / ((NS - s0) * (NS + s0 + 1))


@dataclass(frozen=True)
class DetCheck:
    lhs: complex
    rhs: complex
    rel_err: float
    log_abs_lhs: float
    log_abs_rhs: float


def det_formula_check(pair: UniversalMetricPair, alpha: float) -> DetCheck:
    """Compare det(eta(alpha)) with the product over isotypic components.

    Both sides are accumulated in the log domain; ``lhs``/``rhs`` are
    exponentiated only when finite.
    """
    eta = np.exp(1j * alpha) * pair.eta_plus + np.exp(-1j * alpha) * pair.eta_minus
    sign_l, logabs_l = np.linalg.slogdet(eta)
    S, N, g = pair.two_S / 2, pair.N, pair.gamma
    c = N * S * (S + 1)
    phase_r, logabs_r = 1.0 + 0j, 0.0
    for two_s, nu in multiplicities(pair.two_S, N).items():
        s = two_s / 2
        factor = 2 * np.cos(alpha + g * (s * (s + 1) - c))
        power = (two_s + 1) * nu
        if factor == 0:
            phase_r, logabs_r = 0j, -np.inf
            break
        logabs_r += power * np.log(abs(factor))
        phase_r *= np.sign(factor) ** power
    if logabs_r == -np.inf or sign_l == 0:
        rel = 0.0 if (sign_l == 0 and logabs_r == -np.inf) else np.inf
    else:
        rel = float(abs(sign_l / phase_r * np.exp(logabs_l - logabs_r) - 1))

    def _value(sign, logabs):
        return complex(sign * np.exp(logabs)) if logabs < 700 else complex(np.nan)

    return DetCheck(_value(sign_l, logabs_l), _value(phase_r, logabs_r), rel, float(logabs_l), float(logabs_r))


def _is_pd_at(two_S: int, N: int, gamma: float) -> bool:
    rep = spin_rep(DeformationParams(gamma, two_S))
    return hermitian_metric(universal_eta(rep, N), alpha0(two_S, N, gamma)).is_positive_definite


@dataclass(frozen=True)
class PDScan:
    boundary: float | None
    bracket: tuple | None
    gamma_hat: float
    gamma_grid: list
    is_pd_curve: list
    resolution: float

    def to_dict(self) -> dict:
        return {
            "boundary": self.boundary,
            "bracket": list(self.bracket) if self.bracket else None,
            "gamma_hat": self.gamma_hat,
            "resolution": self.resolution,
        }


def pd_range_scan(
    two_S: int,
    N: int,
    resolution: float = 1e-4,
    n_grid: int = 100,
    gamma_max: float | None = None,
    jobs: int = 1,
) -> PDScan:
    """Largest gamma up to which eta(alpha0(gamma)) stays positive definite.

    Coarse grid from gamma = 0, then bisection on the first PD -> non-PD
    change. ``boundary`` is None if positivity holds over the whole range.
    """
    limit = 0.999 * np.pi / two_S
    gmax = limit if gamma_max is None else min(gamma_max, limit)
    if gmax <= 0:
        raise DomainError("empty gamma range")
    grid = gmax * np.arange(1, n_grid + 1) / n_grid
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            flags = list(pool.map(lambda g: _is_pd_at(two_S, N, g), grid))
    else:
        flags = [_is_pd_at(two_S, N, g) for g in grid]
    ghat = gamma_hat(two_S, N)
    first = next((i for i, f in enumerate(flags) if not f), None)
    if first is None:
        return PDScan(None, None, ghat, list(map(float, grid)), flags, resolution)
    lo = 0.0 if first == 0 else float(grid[first - 1])
    hi = float(grid[first])
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if _is_pd_at(two_S, N, mid):
            lo = mid
        else:
            hi = mid
    return PDScan(0.5 * (lo + hi), (lo, hi), ghat, list(map(float, grid)), flags, resolution)


def isotypic_identity_check(pair: UniversalMetricPair, iso: IsotypicData) -> float:
    """||(eta^-)^{-1} eta^+ - sum_s q^{2s(s+1) - 2NS(S+1)} P_s||_F / dim."""
    S, N, g = pair.two_S / 2, pair.N, pair.gamma
    lhs = np.linalg.solve(pair.eta_minus, pair.eta_plus)
    rhs = np.zeros_like(lhs)
    for two_s, P in zip(iso.two_s_values, iso.projectors):
        s = two_s / 2
        rhs += np.exp(1j * g * (2 * s * (s + 1) - 2 * N * S * (S + 1))) * P
    return float(np.linalg.norm(lhs - rhs) / lhs.shape[0])


def metric_to_json(eta: np.ndarray) -> list:
    """Row-major nested list of [re, im] pairs."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(eta)]


def metric_from_json(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]
