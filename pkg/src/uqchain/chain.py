"""Open U_q(sl_2)-invariant spin chains with inhomogeneous coupling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DomainError, SingularGamma
from .qalgebra import (
    EPS_SINGULAR,
    DeformationParams,
    embed_two_site,
    format_spin,
    kron_all,
    magnetization_labels,
    parse_spin,
    permutation_operator,
    projector,
    spin_rep,
)

__all__ = [
    "DEFAULT_DIM_CAP",
    "ChainOperator",
    "SingleSCoupling",
    "GeneralCoupling",
    "CouplingSchedule",
    "ChainSpec",
    "embed_bond",
    "hamiltonian",
    "hamiltonian_single_s",
    "hamiltonian_general",
    "xxz_half_hamiltonian",
    "xxz_half_pauli",
    "xxz_spin_s_coupling",
    "xxz_spin_s_limit_coupling",
    "reversal_symmetrizer",
    "alternating",
    "chain_spec_from_dict",
    "chain_spec_to_dict",
    "load_chain_spec",
]

DEFAULT_DIM_CAP = 4096


@dataclass(frozen=True)
class ChainOperator:
    """Dense operator on (V^S)^{xN} with its chain metadata."""

    matrix: np.ndarray = field(repr=False)
    two_S: int
    N: int
    gamma: float

    def __post_init__(self):
        d = (self.two_S + 1) ** self.N
        if self.matrix.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix, got {self.matrix.shape}")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("operator has non-finite entries")

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def labels(self) -> np.ndarray:
        """2m of every basis state; the chain operators here conserve it."""
        return magnetization_labels(self.two_S, self.N)

    @property
    def H(self) -> np.ndarray:
        return self.matrix.conj().T


@dataclass(frozen=True)
class SingleSCoupling:
    """sum_n a_n P^{S,s}_{n,n+1}."""

    s: int
    a: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        if not all(np.isfinite(self.a)):
            raise ValueError("couplings must be finite")

    @property
    def n_bonds(self) -> int:
        return len(self.a)

    def to_general(self, two_S: int) -> GeneralCoupling:
        b = np.zeros((self.n_bonds, two_S + 1))
        b[:, self.s] = self.a
        return GeneralCoupling(b)


@dataclass(frozen=True)
class GeneralCoupling:
    """sum_{n,s} b[n][s] P^{S,s}_{n,n+1}; rows are bonds, columns channels."""

    b: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        if b.ndim != 2:
            raise ValueError("coupling table must be 2-D (bonds x channels)")
        if not np.all(np.isfinite(b)):
            raise ValueError("couplings must be finite")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    @property
    def n_bonds(self) -> int:
        return self.b.shape[0]


CouplingSchedule = Union[SingleSCoupling, GeneralCoupling]


@dataclass(frozen=True)
class ChainSpec:
    params: DeformationParams
    N: int
    coupling: CouplingSchedule
    dim_cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        if self.N < 2:
            raise DomainError("a chain needs N >= 2 sites")
        if self.dim > self.dim_cap:
            raise DomainError(f"dimension {self.dim} exceeds cap {self.dim_cap}")
        if self.coupling.n_bonds != self.N - 1:
            raise ValueError(f"expected {self.N - 1} bonds, got {self.coupling.n_bonds}")
        if isinstance(self.coupling, SingleSCoupling):
            if not 0 <= self.coupling.s <= self.params.two_S:
                raise ValueError(f"channel s={self.coupling.s} outside 0..2S")
        elif self.coupling.b.shape[1] != self.params.two_S + 1:
            raise ValueError(f"coupling table needs {self.params.two_S + 1} channels")

    @property
    def dim(self) -> int:
        return (self.params.two_S + 1) ** self.N


def embed_bond(op: np.ndarray, n: int, N: int) -> np.ndarray:
    """Identity^{x(n-1)} x op x Identity^{x(N-n-1)} for bond (n, n+1)."""
    if not 1 <= n <= N - 1:
        raise IndexError(f"bond {n} outside 1..{N - 1}")
    return embed_two_site(op, n, n + 1, N)


def _wrap(matrix, spec: ChainSpec) -> ChainOperator:
    return ChainOperator(matrix, spec.params.two_S, spec.N, spec.params.gamma)


def hamiltonian_single_s(spec: ChainSpec) -> ChainOperator:
    c = spec.coupling
    if not isinstance(c, SingleSCoupling):
        raise TypeError("hamiltonian_single_s needs a SingleSCoupling")
    P = projector(spin_rep(spec.params), c.s)
    H = np.zeros((spec.dim, spec.dim), dtype=complex)
    for n, a in enumerate(c.a, start=1):
        if a != 0:
            H += a * embed_bond(P, n, spec.N)
    return _wrap(H, spec)


def hamiltonian_general(spec: ChainSpec) -> ChainOperator:
    c = spec.coupling
    if isinstance(c, SingleSCoupling):
        c = c.to_general(spec.params.two_S)
    rep = spin_rep(spec.params)
    H = np.zeros((spec.dim, spec.dim), dtype=complex)
    for s in range(spec.params.two_S + 1):
        col = c.b[:, s]
        if not np.any(col):
            continue
        P = projector(rep, s)
        for n, b in enumerate(col, start=1):
            if b != 0:
                H += b * embed_bond(P, n, spec.N)
    return _wrap(H, spec)


def hamiltonian(spec: ChainSpec) -> ChainOperator:
    if isinstance(spec.coupling, SingleSCoupling):
        return hamiltonian_single_s(spec)
    return hamiltonian_general(spec)


def alternating(N: int, a: float = 1.0) -> tuple[float, ...]:
    """Coupling pattern a, -a, a, ... on N-1 bonds."""
    return tuple(a * (-1) ** n for n in range(N - 1))


def xxz_half_hamiltonian(N: int, gamma: float) -> ChainOperator:
    """Spin-1/2 XXZ chain as the s=0 chain with a_n = -cos(gamma)."""
    spec = ChainSpec(
        DeformationParams(gamma, 1), N, SingleSCoupling(0, (-np.cos(gamma),) * (N - 1))
    )
    return hamiltonian_single_s(spec)


def xxz_half_pauli(N: int, gamma: float) -> ChainOperator:
    """The same XXZ chain assembled directly from Pauli operators."""
    if N < 2:
        raise DomainError("a chain needs N >= 2 sites")
    sp = np.array([[0, 1], [0, 0]], dtype=complex)
    sm = sp.T.copy()
    sz = np.diag([1.0, -1.0]).astype(complex)
    one = np.eye(2)

    def site(op, n):
        return kron_all(*[op if k == n else one for k in range(N)])

    dim = 2**N
    H = np.zeros((dim, dim), dtype=complex)
    for n in range(N - 1):
        H += 0.5 * (site(sp, n) @ site(sm, n + 1) + site(sm, n) @ site(sp, n + 1))
        H += np.cos(gamma) / 4 * (site(sz, n) @ site(sz, n + 1) - np.eye(dim))
        H += 1j * np.sin(gamma) / 4 * (site(sz, n) - site(sz, n + 1))
    return ChainOperator(H, 1, N, gamma)


def xxz_spin_s_coupling(two_S: int, gamma: float, N: int) -> GeneralCoupling:
    """Homogeneous table b[n][s] = sin(g) sum_{k<=s} cot(g k) of the spin-S XXZ chain."""
    for k in range(1, two_S + 1):
        if abs(np.sin(gamma * k)) <= EPS_SINGULAR:
            raise SingularGamma(f"cot(gamma*{k}) undefined at gamma={gamma}")
    row = [np.sin(gamma) * sum(1 / np.tan(gamma * k) for k in range(1, s + 1)) for s in range(two_S + 1)]
    return GeneralCoupling(np.tile(row, (N - 1, 1)))


def xxz_spin_s_limit_coupling(two_S: int, N: int) -> GeneralCoupling:
    """gamma -> 0 limit of the XXZ table: harmonic numbers H_s."""
    row = [sum(1 / k for k in range(1, s + 1)) for s in range(two_S + 1)]
    return GeneralCoupling(np.tile(row, (N - 1, 1)))


def reversal_symmetrizer(two_S: int, N: int) -> np.ndarray:
    """Site-reversal operator P_{1,N} P_{2,N-1} ... ."""
    if N < 2:
        raise DomainError("need N >= 2")
    d = two_S + 1
    eta = np.eye(d**N)
    for k in range(1, N // 2 + 1):
        eta = eta @ permutation_operator(d, N, k, N + 1 - k)
    return eta


def chain_spec_from_dict(doc: dict, dim_cap: int = DEFAULT_DIM_CAP) -> ChainSpec:
    """Parse ``{"S": "1/2", "N": 4, "gamma": 0.3, "coupling": {...}}``."""
    try:
        two_S = parse_spin(doc["S"])
        N = int(doc["N"])
        gamma = float(doc["gamma"])
        cdoc = doc["coupling"]
        kind = cdoc["type"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed chain spec: missing {exc}") from exc
    if kind == "single_s":
        coupling = SingleSCoupling(int(cdoc["s"]), tuple(cdoc["a"]))
    elif kind == "general":
        coupling = GeneralCoupling(np.asarray(cdoc["b"], dtype=float))
    else:
        raise ValueError(f"unknown coupling type {kind!r}")
    return ChainSpec(DeformationParams(gamma, two_S), N, coupling, dim_cap=dim_cap)


def chain_spec_to_dict(spec: ChainSpec) -> dict:
    c = spec.coupling
    if isinstance(c, SingleSCoupling):
        cdoc = {"type": "single_s", "s": c.s, "a": list(c.a)}
    else:
        cdoc = {"type": "general", "b": c.b.tolist()}
    return {
        "S": format_spin(spec.params.two_S),
        "N": spec.N,
        "gamma": spec.params.gamma,
        "coupling": cdoc,
    }


def load_chain_spec(path, dim_cap: int = DEFAULT_DIM_CAP) -> ChainSpec:
    return chain_spec_from_dict(json.loads(Path(path).read_text()), dim_cap=dim_cap)
