"""Registry of algebraic identities, each checked as a matrix residual.

Every check returns a relative Frobenius residual
||lhs - rhs|| / max(1, ||lhs||, ||rhs||); the largest over the sub-cases
of an identity is reported.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .chain import GeneralCoupling, ChainSpec, hamiltonian_general, reversal_symmetrizer
from .errors import DomainError, SingularGamma, UnknownIdentity
from .metric import alpha0, det_formula_check, eta_product, hermitian_metric, universal_eta
from .qalgebra import (
    DeformationParams,
    _casimir_from_ladders,
    _swap,
    coproduct_action,
    embed_two_site,
    isotypic_projectors,
    kron_all,
    magnetization_labels,
    projector,
    q_number,
    r_matrix,
    singlet_vector,
    spin_rep,
    tensor_casimir,
)

__all__ = [
    "IdentityParams",
    "IdentityReport",
    "REGISTRY",
    "DEFAULT_GAMMAS",
    "default_lattice",
    "run_identity",
    "run_all",
    "tolerance_for",
]

DEFAULT_GAMMAS = (-0.2, 0.05, 0.1, 0.15, 0.25)


@dataclass(frozen=True)
class IdentityParams:
    two_S: int
    N: int
    gamma: float
    seed: int = 0
    perturbation: float = 0.0


@dataclass
class IdentityReport:
    identity_name: str
    anchor: str
    residual: float
    tolerance: float
    passed: bool
    params: dict
    details: dict = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


def tolerance_for(dim: int) -> float:
    return 1e-10 if dim <= 256 else 1e-8


def _rel(lhs, rhs) -> float:
    lhs, rhs = np.asarray(lhs), np.asarray(rhs)
    scale = max(1.0, float(np.linalg.norm(lhs)), float(np.linalg.norm(rhs)))
    return float(np.linalg.norm(lhs - rhs) / scale)


class _Ctx:
    """Per-run inputs plus the seeded perturbation hook."""

    def __init__(self, p: IdentityParams):
        self.p = p
        self.rng = np.random.default_rng(p.seed)
        self.rep = spin_rep(DeformationParams(p.gamma, p.two_S))
        self.d = self.rep.dim
        self.details: dict = {}

    def perturb(self, M: np.ndarray) -> np.ndarray:
        if not self.p.perturbation:
            return M
        rng = np.random.default_rng(self.p.seed + 7919)
        X = rng.standard_normal(M.shape) + 1j * rng.standard_normal(M.shape)
        return M + self.p.perturbation * X * (max(1.0, np.linalg.norm(M)) / np.linalg.norm(X))


def _uq_relations(c: _Ctx) -> float:
    N, g = c.p.N, c.p.gamma
    E = c.perturb(coproduct_action(c.rep, N, "E"))
    F = coproduct_action(c.rep, N, "F")
    K = coproduct_action(c.rep, N, "K")
    q = np.exp(1j * g)
    # (K^2 - K^-2)/(q - q^-1) is diagonal with entries [2m]
    comm_rhs = np.diag(q_number(magnetization_labels(c.rep.two_S, N).astype(float), g))
    return max(
        _rel(K @ E, q * E @ K),
        _rel(K @ F, F @ K / q),
        _rel(E @ F - F @ E, comm_rhs),
    )


def _hopf_star_defect(c: _Ctx) -> float:
    N = c.p.N
    rev = reversal_symmetrizer(c.rep.two_S, N)
    dE = c.perturb(coproduct_action(c.rep, N, "E"))
    dF = coproduct_action(c.rep, N, "F")
    dK = coproduct_action(c.rep, N, "K")
    dKi = coproduct_action(c.rep, N, "Kinv")
    c.details["naive_defect"] = _rel(dE.conj().T, dF)
    return max(
        _rel(dE.conj().T, rev @ dF @ rev),
        _rel(dF.conj().T, rev @ dE @ rev),
        _rel(dK.conj().T, rev @ dKi @ rev),
    )


def _casimir_value(c: _Ctx) -> float:
    S, g = c.rep.two_S / 2, c.p.gamma
    C = c.perturb(_casimir_from_ladders(c.rep.E, c.rep.F, magnetization_labels(c.rep.two_S, 1), g))
    return _rel(C, q_number(S, g) * q_number(S + 1, g) * np.eye(c.d))


def _casimir_conjugation(c: _Ctx) -> float:
    C = c.perturb(tensor_casimir(c.rep))
    P = _swap(c.d)
    C_bar = tensor_casimir(spin_rep(DeformationParams(-c.p.gamma, c.rep.two_S)))
    return max(_rel(C.conj().T, P @ C @ P), _rel(C.conj().T, C_bar))


def _projector_conjugation(c: _Ctx) -> float:
    P = _swap(c.d)
    rep_bar = spin_rep(DeformationParams(-c.p.gamma, c.rep.two_S))
    worst = 0.0
    for s in range(c.rep.two_S + 1):
        Ps = c.perturb(projector(c.rep, s))
        worst = max(worst, _rel(Ps.conj().T, P @ Ps @ P), _rel(Ps.conj().T, projector(rep_bar, s)))
    return worst


def _temperley_lieb(c: _Ctx) -> float:
    N = max(c.p.N, 3)
    P0 = c.perturb(projector(c.rep, 0))
    mu = 1 / q_number(c.rep.two_S + 1, c.p.gamma) ** 2
    c.details["mu_S"] = float(mu)
    worst = 0.0
    for n in range(2, N):
        A = embed_two_site(P0, n - 1, n, N)
        B = embed_two_site(P0, n, n + 1, N)
        worst = max(worst, _rel(A @ B @ A, mu * A), _rel(B @ A @ B, mu * B))
    return worst


def _yang_baxter(c: _Ctx) -> float:
    worst = 0.0
    for sign in "+-":
        R = c.perturb(r_matrix(c.rep, sign))
        R12, R13, R23 = (embed_two_site(R, i, j, 3) for i, j in ((1, 2), (1, 3), (2, 3)))
        worst = max(worst, _rel(R12 @ R13 @ R23, R23 @ R13 @ R12))
    return worst


def _r_conjugation(c: _Ctx) -> float:
    Rp = c.perturb(r_matrix(c.rep, "+"))
    Rm = r_matrix(c.rep, "-")
    c.details["det_plus"] = [float(z) for z in (np.linalg.det(Rp).real, np.linalg.det(Rp).imag)]
    return max(_rel(Rp.conj().T, Rm), abs(np.linalg.det(Rp) - 1), abs(np.linalg.det(Rm) - 1))


def _r_intertwines(c: _Ctx) -> float:
    P = _swap(c.d)
    worst = 0.0
    for sign in "+-":
        R = c.perturb(r_matrix(c.rep, sign))
        for X in "EFK":
            D = coproduct_action(c.rep, 2, X)
            worst = max(worst, _rel(R @ D, P @ D @ P @ R))
    return worst


def _r_fusion(c: _Ctx) -> float:
    rep, g, d = c.rep, c.p.gamma, c.d
    k = rep.H_exponents
    R = c.perturb(r_matrix(rep, "+"))
    R12, R13, R23 = (embed_two_site(R, i, j, 3) for i, j in ((1, 2), (1, 3), (2, 3)))
    one = np.ones(d)
    k1, k2, k3 = (kron_all(*[k if t == i else one for t in range(3)]) for i in range(3))
    coef = [
        (2j * np.sin(g)) ** n * np.exp(0.5j * g * (n * n - n))
        / np.prod([q_number(j, g) for j in range(1, n + 1)])
        for n in range(rep.two_S + 1)
    ]
    dF = coproduct_action(rep, 2, "F")
    dE = coproduct_action(rep, 2, "E")
    # (Delta x id) R: H -> H x 1 + 1 x H in the first leg
    Q = np.diag(np.exp(1j * g * (k1 + k2) * k3))
    series = sum(cn * np.kron(np.linalg.matrix_power(dF, n), np.linalg.matrix_power(rep.E, n)) for n, cn in enumerate(coef))
    left = Q @ series @ Q
    Q2 = np.diag(np.exp(1j * g * k1 * (k2 + k3)))
    series2 = sum(cn * np.kron(np.linalg.matrix_power(rep.F, n), np.linalg.matrix_power(dE, n)) for n, cn in enumerate(coef))
    right = Q2 @ series2 @ Q2
    return max(_rel(left, R13 @ R23), _rel(right, R13 @ R12))


def _rp_intertwines(c: _Ctx) -> float:
    P = _swap(c.d)
    worst = 0.0
    for sign in "+-":
        R = c.perturb(r_matrix(c.rep, sign))
        for s in range(c.rep.two_S + 1):
            Ps = projector(c.rep, s)
            worst = max(worst, _rel(R @ Ps, P @ Ps @ P @ R))
    return worst


def _random_general(c: _Ctx) -> np.ndarray:
    b = c.rng.uniform(-2, 2, size=(c.p.N - 1, c.rep.two_S + 1))
    spec = ChainSpec(DeformationParams(c.p.gamma, c.rep.two_S), c.p.N, GeneralCoupling(b))
    return hamiltonian_general(spec).matrix


def _h_symmetry(c: _Ctx) -> float:
    H = c.perturb(_random_general(c))
    return max(_rel(H @ X, X @ H) for X in (coproduct_action(c.rep, c.p.N, g) for g in "EFK"))


def _eta_orderings(c: _Ctx) -> float:
    worst = 0.0
    for sign in "+-":
        left = c.perturb(eta_product(c.rep, c.p.N, sign, "left"))
        worst = max(worst, _rel(left, eta_product(c.rep, c.p.N, sign, "right")))
    return worst


def _eta_conjugate(c: _Ctx) -> float:
    pair = universal_eta(c.rep, c.p.N)
    return _rel(c.perturb(pair.eta_plus).conj().T, pair.eta_minus)


def _eta_symmetrizes(c: _Ctx) -> float:
    N = c.p.N
    pair = universal_eta(c.rep, N)
    worst = 0.0
    for eta in (c.perturb(pair.eta_plus), pair.eta_minus):
        for s in range(c.rep.two_S + 1):
            Ps = projector(c.rep, s)
            for n in range(1, N):
                worst = max(worst, _rel(eta @ embed_two_site(Ps, n, n + 1, N), embed_two_site(Ps, n + 1, n, N) @ eta))
    H = _random_general(c)
    eta = hermitian_metric(pair, alpha0(c.rep.two_S, N, c.p.gamma)).eta
    return max(worst, _rel(eta @ H, H.conj().T @ eta))


def _det_formula(c: _Ctx) -> float:
    pair = universal_eta(c.rep, c.p.N)
    if c.p.perturbation:
        pair = type(pair)(c.perturb(pair.eta_plus), pair.eta_minus, pair.two_S, pair.N, pair.gamma)
    alpha = float(c.rng.uniform(-np.pi, np.pi))
    chk = det_formula_check(pair, alpha)
    c.details.update(alpha=alpha, log_abs_lhs=chk.log_abs_lhs, log_abs_rhs=chk.log_abs_rhs)
    det_p = np.linalg.det(pair.eta_plus)
    det_m = np.linalg.det(pair.eta_minus)
    return max(chk.rel_err, abs(det_p - 1), abs(det_m - 1))


def _isotypic(c: _Ctx) -> float:
    N, S, g = c.p.N, c.rep.two_S / 2, c.p.gamma
    pair = universal_eta(c.rep, N)
    iso = isotypic_projectors(c.rep, N)
    lhs = np.linalg.solve(pair.eta_minus, c.perturb(pair.eta_plus))
    rhs = sum(
        np.exp(1j * g * (2 * (ts / 2) * (ts / 2 + 1) - 2 * N * S * (S + 1))) * P
        for ts, P in zip(iso.two_s_values, iso.projectors)
    )
    return _rel(lhs, rhs)


def _singlet_vector(c: _Ctx) -> float:
    w = c.perturb(singlet_vector(c.rep)[:, None])[:, 0]
    dE = coproduct_action(c.rep, 2, "E")
    dF = coproduct_action(c.rep, 2, "F")
    kappa = q_number(c.rep.two_S + 1, c.p.gamma) / (c.rep.two_S + 1)
    # w_bar is w at q -> conj(q), i.e. the complex conjugate
    P0 = np.outer(w, w) / kappa
    return max(
        float(np.linalg.norm(dE @ w)),
        float(np.linalg.norm(dF @ w)),
        _rel(P0, projector(c.rep, 0)),
    )


# name -> (anchor formula, check, needs N >= 2 chain)
REGISTRY: dict[str, tuple[str, Callable[[_Ctx], float]]] = {
    "uq_relations": ("KE = qEK, KF = q^-1 FK, [E,F] = (K^2 - K^-2)/(q - q^-1) on N sites", _uq_relations),
    "hopf_star_defect": ("(Delta X)* = P_rev Delta(X*) P_rev", _hopf_star_defect),
    "casimir_value": ("C = [S][S+1] on V^S", _casimir_value),
    "casimir_conjugation": ("(C^{S,S})* = C^{S,S}|q->q^-1 = P C^{S,S} P", _casimir_conjugation),
    "projector_conjugation": ("(P^{S,s})* = P^{S,s}|q->conj(q) = P P^{S,s} P", _projector_conjugation),
    "temperley_lieb": ("P0_{n-1,n} P0_{n,n+1} P0_{n-1,n} = P0_{n-1,n} / [2S+1]^2", _temperley_lieb),
    "yang_baxter": ("R12 R13 R23 = R23 R13 R12", _yang_baxter),
    "r_conjugation": ("(R+)* = R-, det R = 1", _r_conjugation),
    "r_intertwines": ("R Delta(X) = Delta'(X) R", _r_intertwines),
    "r_fusion": ("(Delta x id) R = R13 R23, (id x Delta) R = R13 R12", _r_fusion),
    "rp_intertwines": ("R P^{S,s} = P P^{S,s} P R", _rp_intertwines),
    "h_symmetry": ("[H, Delta^(N-1)(X)] = 0", _h_symmetry),
    "eta_orderings": ("left- and right-nested R products coincide", _eta_orderings),
    "eta_conjugate": ("(eta+)* = eta-", _eta_conjugate),
    "eta_symmetrizes": ("eta P_{n,n+1} = P_{n+1,n} eta for every bond and channel", _eta_symmetrizes),
    "det_formula": ("det(eta(alpha)) = prod_s (2cos(alpha + g(s(s+1) - NS(S+1))))^{(2s+1) nu_s}", _det_formula),
    "isotypic": ("(eta-)^-1 eta+ = sum_s q^{2s(s+1) - 2NS(S+1)} P_s", _isotypic),
    "singlet_vector": ("Delta(E) w00 = Delta(F) w00 = 0, P^{S,0} = w00 w00bar^dagger / kappa00", _singlet_vector),
}


def run_identity(name: str, params: IdentityParams) -> IdentityReport:
    """Evaluate one registered identity.

    Domain problems (singular gamma, inadmissible spin/gamma) are reported
    in ``error`` with ``passed=False`` instead of being raised.
    """
    try:
        anchor, check = REGISTRY[name]
    except KeyError:
        raise UnknownIdentity(name) from None
    dim = (params.two_S + 1) ** max(params.N, 3 if name in ("temperley_lieb", "yang_baxter", "r_fusion") else 1)
    tol = tolerance_for(dim)
    pdict = {"S": params.two_S / 2, "N": params.N, "gamma": params.gamma, "seed": params.seed}
    if params.perturbation:
        pdict["perturbation"] = params.perturbation
    try:
        ctx = _Ctx(params)
        residual = float(check(ctx))
    except (SingularGamma, DomainError) as exc:
        return IdentityReport(name, anchor, float("nan"), tol, False, pdict, {}, f"{type(exc).__name__}: {exc}")
    return IdentityReport(name, anchor, residual, tol, residual < tol, pdict, ctx.details)


def default_lattice(gammas=DEFAULT_GAMMAS, seed: int = 0) -> list[IdentityParams]:
    return [
        IdentityParams(two_S, N, g, seed)
        for two_S, N, g in itertools.product((1, 2, 3), (2, 3, 4), gammas)
    ]


def run_all(lattice: list[IdentityParams] | None = None, names=None, jobs: int = 1) -> list[IdentityReport]:
    """Run every registered identity (or ``names``) over a parameter lattice.

    Results are ordered by registration order, then lattice order.
    """
    lattice = default_lattice() if lattice is None else lattice
    names = list(REGISTRY) if names is None else list(names)
    for n in names:
        if n not in REGISTRY:
            raise UnknownIdentity(n)
    tasks = [(n, p) for n in names for p in lattice]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda t: run_identity(*t), tasks))
    return [run_identity(n, p) for n, p in tasks]
