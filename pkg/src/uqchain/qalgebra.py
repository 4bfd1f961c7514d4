"""Representation theory of U_q(sl_2) at q = exp(i*gamma).

Basis conventions: within a site the canonical vectors are ordered from
the highest weight k = S down to k = -S; tensor products are ordered
lexicographically with the leftmost factor varying slowest (``np.kron``
order). Spins are carried as the integer ``two_S`` so half-integers stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from math import prod

import numpy as np

from .errors import DomainError, SingularGamma

__all__ = [
    "EPS_SINGULAR",
    "DeformationParams",
    "SpinRep",
    "IsotypicData",
    "parse_spin",
    "format_spin",
    "q_number",
    "q_bracket",
    "spin_rep",
    "kron_all",
    "embed_site",
    "embed_two_site",
    "permutation_operator",
    "magnetization_labels",
    "coproduct_action",
    "tensor_casimir",
    "total_casimir",
    "projector",
    "r_matrix",
    "multiplicities",
    "isotypic_projectors",
    "singlet_vector",
]

EPS_SINGULAR = 1e-8


def parse_spin(spin) -> int:
    """Return ``two_S`` for a spin given as "1/2", "3/2", 1, 1.5, Fraction...

    Floats are accepted only when they are exact multiples of 1/2.
    """
    if isinstance(spin, str):
        value = Fraction(spin.strip())
    elif isinstance(spin, float):
        if not float(2 * spin).is_integer():
            raise DomainError(f"spin {spin!r} is not a multiple of 1/2")
        value = Fraction(int(2 * spin), 2)
    else:
        value = Fraction(spin)
    two_S = 2 * value
    if two_S.denominator != 1 or two_S <= 0:
        raise DomainError(f"spin must be a positive multiple of 1/2, got {spin!r}")
    return int(two_S)


def format_spin(two_val: int) -> str:
    return str(two_val // 2) if two_val % 2 == 0 else f"{two_val}/2"


def q_number(t, gamma):
    """The q-number [t] = sin(gamma*t)/sin(gamma); equals t at gamma = 0."""
    if gamma == 0:
        return t * 1.0
    return np.sin(gamma * t) / np.sin(gamma)


def q_bracket(t, gamma):
    """The symmetric q-bracket {t} = 2 cos(gamma*t)."""
    return 2.0 * np.cos(gamma * t)


@dataclass(frozen=True)
class DeformationParams:
    gamma: float
    two_S: int

    def __post_init__(self):
        if int(self.two_S) != self.two_S or self.two_S < 1:
            raise DomainError(f"two_S must be a positive integer, got {self.two_S!r}")
        if not np.isfinite(self.gamma):
            raise DomainError("gamma must be finite")

    @property
    def S(self) -> float:
        return self.two_S / 2

    @property
    def q(self) -> complex:
        return complex(np.exp(1j * self.gamma))

    @property
    def dim(self) -> int:
        return self.two_S + 1


@dataclass(frozen=True)
class SpinRep:
    """Matrices of E, F, K in the spin-S representation."""

    params: DeformationParams
    E: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    K: np.ndarray = field(repr=False)
    H_exponents: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.params.dim

    @property
    def gamma(self) -> float:
        return self.params.gamma

    @property
    def two_S(self) -> int:
        return self.params.two_S

    @property
    def Kinv(self) -> np.ndarray:
        return np.diag(np.exp(-1j * self.gamma * self.H_exponents))

    def generator(self, name: str) -> np.ndarray:
        try:
            return {"E": self.E, "F": self.F, "K": self.K, "Kinv": self.Kinv}[name]
        except KeyError:
            raise ValueError(f"unknown generator {name!r}") from None


def spin_rep(params: DeformationParams) -> SpinRep:
    """Build the standard spin-S representation.

    Raises
    ------
    DomainError
        If ``2S*|gamma| >= pi``; outside this window the ladder entries stop
        being positive and E, F are no longer mutually adjoint.
    """
    gamma, two_S = params.gamma, params.two_S
    if two_S * abs(gamma) >= np.pi:
        raise DomainError(f"2S|gamma| = {two_S * abs(gamma):.6g} must be < pi")
    S = two_S / 2
    d = two_S + 1
    k = S - np.arange(d)
    E = np.zeros((d, d), dtype=complex)
    for i in range(1, d):
        # E w_k = sqrt([S-k][S+k+1]) w_{k+1}; w_{k+1} sits one row up
        amp = q_number(S - k[i], gamma) * q_number(S + k[i] + 1, gamma)
        E[i - 1, i] = np.sqrt(max(amp, 0.0))
    F = E.T.copy()
    K = np.diag(np.exp(1j * gamma * k))
    for m in (E, F, K, k):
        m.setflags(write=False)
    return SpinRep(params=params, E=E, F=F, K=K, H_exponents=k)


def kron_all(*mats) -> np.ndarray:
    return reduce(np.kron, mats)


def embed_site(op: np.ndarray, n: int, N: int) -> np.ndarray:
    """Place a single-site operator at site ``n`` (1-based) of an N-site chain."""
    d = op.shape[0]
    if not 1 <= n <= N:
        raise IndexError(f"site {n} outside 1..{N}")
    return kron_all(np.eye(d ** (n - 1)), op, np.eye(d ** (N - n)))


def embed_two_site(op: np.ndarray, i: int, j: int, N: int) -> np.ndarray:
    """Embed a two-site operator with its first factor on site i, second on j.

    Sites are 1-based and need not be adjacent or ordered; ``i > j`` gives
    the flipped embedding A_{ji} used for P_{n+1,n}.
    """
    d = int(round(np.sqrt(op.shape[0])))
    if d * d != op.shape[0]:
        raise ValueError("two-site operator must have square-number dimension")
    if i == j or not (1 <= i <= N and 1 <= j <= N):
        raise IndexError(f"invalid site pair ({i}, {j}) for N={N}")
    if N == 2:
        return op.copy() if i < j else _swap(d) @ op @ _swap(d)
    order = [i - 1, j - 1] + [t for t in range(N) if t not in (i - 1, j - 1)]
    full = np.kron(op, np.eye(d ** (N - 2))).reshape((d,) * (2 * N))
    inv = list(np.argsort(order))
    perm = inv + [N + a for a in inv]
    return full.transpose(perm).reshape(d**N, d**N)


def _swap(d: int) -> np.ndarray:
    P = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            P[a * d + b, b * d + a] = 1.0
    return P


def permutation_operator(dim_single: int, N: int, i: int, j: int) -> np.ndarray:
    """Permutation of tensor factors i and j (1-based, i < j)."""
    if not 1 <= i < j <= N:
        raise IndexError(f"need 1 <= i < j <= N, got ({i}, {j}) with N={N}")
    return embed_two_site(_swap(dim_single), i, j, N)


def magnetization_labels(two_S: int, N: int) -> np.ndarray:
    """Twice the total weight (2m) of every product basis state."""
    site = two_S - 2 * np.arange(two_S + 1)
    labels = np.zeros(1, dtype=int)
    for _ in range(N):
        labels = (labels[:, None] + site[None, :]).ravel()
    return labels


def coproduct_action(rep: SpinRep, N: int, generator: str) -> np.ndarray:
    """Matrix of the iterated coproduct of E, F or K on N sites.

    Iterating Delta(E) = E x K^-1 + K x E gives
    sum_n K x ... x K x E_n x K^-1 x ... x K^-1 (same for F); Delta(K) = K x K.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if generator in ("K", "Kinv"):
        sign = 1 if generator == "K" else -1
        return np.diag(np.exp(sign * 1j * rep.gamma * magnetization_labels(rep.two_S, N) / 2))
    X = rep.generator(generator)
    K, Kinv = rep.K, rep.Kinv
    total = np.zeros((rep.dim**N,) * 2, dtype=complex)
    for n in range(N):
        total += kron_all(*([K] * n + [X] + [Kinv] * (N - n - 1)))
    return total


def _casimir_from_ladders(dE, dF, two_m, gamma) -> np.ndarray:
    # -cos(g)/(4 sin^2 g) (K - K^-1)^2 is diagonal with entries cos(g)[m]^2
    diag = np.cos(gamma) * q_number(two_m / 2, gamma) ** 2
    return (dE @ dF + dF @ dE) / 2 + np.diag(diag)


def total_casimir(rep: SpinRep, N: int) -> np.ndarray:
    """Casimir element evaluated on N sites through the iterated coproduct."""
    dE = coproduct_action(rep, N, "E")
    dF = coproduct_action(rep, N, "F")
    return _casimir_from_ladders(dE, dF, magnetization_labels(rep.two_S, N), rep.gamma)


def tensor_casimir(rep: SpinRep) -> np.ndarray:
    """Two-site Casimir (pi x pi) Delta(C) written as a closed two-site form.

    The diagonal q^{2H}-part is rewritten as
    2 cos(g) q^{k-m} [k][m] + [S][S+1] (q^{2k} + q^{-2m}),
    which is regular at gamma = 0.
    """
    g, S = rep.gamma, rep.two_S / 2
    K, Kinv, E, F = rep.K, rep.Kinv, rep.E, rep.F
    k = rep.H_exponents
    kk, mm = np.meshgrid(k, k, indexing="ij")
    q = np.exp(1j * g)
    diag = (
        2 * np.cos(g) * q ** (kk - mm) * q_number(kk, g) * q_number(mm, g)
        + q_number(S, g) * q_number(S + 1, g) * (q ** (2 * kk) + q ** (-2 * mm))
    )
    off = np.kron(K @ E, F @ Kinv) + np.kron(F @ K, Kinv @ E)
    return off + np.diag(diag.ravel())


def _node_gap(two_s: int, two_l: int, gamma: float) -> float:
    # [s][s+1] - [l][l+1] = [s-l][s+l+1]
    return q_number((two_s - two_l) / 2, gamma) * q_number((two_s + two_l) / 2 + 1, gamma)


def projector(rep: SpinRep, s: int) -> np.ndarray:
    """Projector P^{S,s} onto the spin-s submodule of V^S x V^S.

    Built as the Lagrange polynomial in the tensor Casimir with nodes [l][l+1].

    Raises
    ------
    SingularGamma
        If some denominator [s-l][s+l+1] has magnitude <= EPS_SINGULAR.
    """
    two_S, g = rep.two_S, rep.gamma
    if int(s) != s or not 0 <= s <= two_S:
        raise ValueError(f"channel s must be an integer in 0..{two_S}, got {s!r}")
    C = tensor_casimir(rep)
    eye = np.eye(C.shape[0])
    P = eye.astype(complex)
    for l in range(two_S + 1):
        if l == s:
            continue
        den = _node_gap(2 * s, 2 * l, g)
        if abs(den) <= EPS_SINGULAR:
            raise SingularGamma(f"[s-l][s+l+1] = {den:.3g} for S={format_spin(two_S)}, s={s}, l={l}, gamma={g}")
        P = P @ (C - q_number(l, g) * q_number(l + 1, g) * eye) / den
    return P


def r_matrix(rep: SpinRep, sign: str = "+") -> np.ndarray:
    """Universal R-matrix R^+ (or R^- = P (R^+)^-1 P) in the representation.

    The series terminates at n = 2S because (F x E)^n vanishes beyond it.
    """
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    g, d = rep.gamma, rep.dim
    k = rep.H_exponents
    qHH = np.diag(np.exp(1j * g * np.outer(k, k).ravel()))
    X = (2j * np.sin(g)) * np.kron(rep.F, rep.E)
    series = np.zeros((d * d, d * d), dtype=complex)
    Xn = np.eye(d * d, dtype=complex)
    for n in range(rep.two_S + 1):
        coef = np.exp(0.5j * g * (n * n - n)) / prod(q_number(j, g) for j in range(1, n + 1))
        series += coef * Xn
        Xn = Xn @ X
    R = qHH @ series @ qHH
    if sign == "+":
        return R
    P = _swap(d)
    return P @ np.linalg.inv(R) @ P


def multiplicities(two_S: int, N: int) -> dict[int, int]:
    """Multiplicities nu_s in (V^S)^{xN}, keyed by 2s (Clebsch-Gordan recursion)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    nu = {two_S: 1}
    for _ in range(N - 1):
        nxt: dict[int, int] = {}
        for ts, count in nu.items():
            for t in range(abs(ts - two_S), ts + two_S + 1, 2):
                nxt[t] = nxt.get(t, 0) + count
        nu = nxt
    return dict(sorted(nu.items()))


@dataclass(frozen=True)
class IsotypicData:
    """Isotypic decomposition of (V^S)^{xN}; spins stored as 2s."""

    two_s_values: tuple[int, ...]
    multiplicities: dict[int, int]
    projectors: tuple[np.ndarray, ...] = field(repr=False)

    def projector_for(self, two_s: int) -> np.ndarray:
        return self.projectors[self.two_s_values.index(two_s)]


def isotypic_projectors(rep: SpinRep, N: int) -> IsotypicData:
    """Projectors onto all copies of V^s inside (V^S)^{xN}.

    The total Casimir commutes with Delta(K), so the Lagrange polynomial is
    evaluated sector by sector in the total weight m, using only the nodes
    s >= |m| that occur there.
    """
    g = rep.gamma
    nu = multiplicities(rep.two_S, N)
    two_s_values = tuple(nu)
    C = total_casimir(rep, N)
    labels = magnetization_labels(rep.two_S, N)
    dim = C.shape[0]
    blocks = {ts: np.zeros((dim, dim), dtype=complex) for ts in two_s_values}
    for tm in np.unique(labels):
        idx = np.flatnonzero(labels == tm)
        sub = C[np.ix_(idx, idx)]
        eye = np.eye(len(idx))
        nodes = [ts for ts in two_s_values if ts >= abs(tm)]
        for ts in nodes:
            P = eye.astype(complex)
            for tl in nodes:
                if tl == ts:
                    continue
                den = _node_gap(ts, tl, g)
                if abs(den) <= EPS_SINGULAR:
                    raise SingularGamma(
                        f"Casimir nodes for 2s={ts} and 2s={tl} collide at gamma={g}"
                    )
                c_l = q_number(tl / 2, g) * q_number(tl / 2 + 1, g)
                P = P @ (sub - c_l * eye) / den
            blocks[ts][np.ix_(idx, idx)] = P
    return IsotypicData(
        two_s_values=two_s_values,
        multiplicities=nu,
        projectors=tuple(blocks[ts] for ts in two_s_values),
    )


def singlet_vector(rep: SpinRep) -> np.ndarray:
    """The spin-0 vector sum_k (-1)^{S-k} q^{-k} w_k x w_{-k} / sqrt(2S+1)."""
    d = rep.dim
    k = rep.H_exponents
    v = np.zeros(d * d, dtype=complex)
    for i in range(d):
        j = d - 1 - i  # index of -k
        v[i * d + j] = (-1) ** int(round(rep.two_S / 2 - k[i])) * np.exp(-1j * rep.gamma * k[i])
    return v / np.sqrt(d)
