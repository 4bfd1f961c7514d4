"""Spectra, minimal polynomials and reality boundaries of chain Hamiltonians."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.optimize import brentq

from .chain import ChainOperator, ChainSpec, SingleSCoupling, alternating, hamiltonian_single_s
from .errors import ConvergenceError, DomainError, FitError, NotDiagonalizable, SingularGamma
from .qalgebra import DeformationParams, q_bracket, q_number

__all__ = [
    "REALITY_TOL",
    "CLUSTER_TOL",
    "SpectrumReport",
    "MinimalPolynomialReport",
    "RealityScan",
    "eigenvalues",
    "cluster_eigenvalues",
    "spectrum",
    "minimal_polynomial",
    "DK_TABLE",
    "dk_expected",
    "dk_closed_form",
    "extract_dk",
    "max_imag",
    "reality_boundary",
    "chain_family",
    "chebyshev_u",
    "chebyshev_boundary",
    "conjecture1_bound",
    "conjecture_support",
]

log = logging.getLogger(__name__)

REALITY_TOL = 1e-9
CLUSTER_TOL = 1e-7
RESIDUAL_TOL = 1e-8


def _blocks(op):
    """Index sets of the weight sectors, if ``op`` is a chain operator that respects them."""
    if not isinstance(op, ChainOperator):
        return None
    labels = op.labels
    M = op.matrix
    mask = labels[:, None] != labels[None, :]
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M[mask]).max(initial=0.0) > 1e-12 * scale:
        return None
    return [np.flatnonzero(labels == tm) for tm in np.unique(labels)]


def eigenvalues(op) -> np.ndarray:
    """All eigenvalues (with algebraic multiplicity) of a dense operator.

    Chain operators are split into their conserved total-weight sectors first.
    """
    M = np.asarray(op)
    try:
        blocks = _blocks(op)
        if blocks is None:
            return np.linalg.eigvals(M)
        return np.concatenate([np.linalg.eigvals(M[np.ix_(b, b)]) for b in blocks])
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(str(exc)) from exc


def _sort(values: np.ndarray) -> np.ndarray:
    return values[np.lexsort((values.imag, values.real))]


def cluster_eigenvalues(values, tol: float) -> list[tuple[complex, int]]:
    """Single-linkage clusters of eigenvalues closer than ``tol``.

    Returns ``(center, multiplicity)`` pairs ordered by real then imaginary part.
    """
    values = np.asarray(values, dtype=complex)
    if values.size == 0:
        return []
    if values.size == 1:
        return [(complex(values[0]), 1)]
    pts = np.column_stack([values.real, values.imag])
    labels = fcluster(linkage(pts, method="single"), t=tol, criterion="distance")
    out = []
    for lab in np.unique(labels):
        members = values[labels == lab]
        out.append((complex(members.mean()), int(members.size)))
    centers = np.array([c for c, _ in out])
    order = np.lexsort((centers.imag, centers.real))
    return [out[i] for i in order]


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray = field(repr=False)
    max_abs_imag: float
    is_real: bool
    clusters: list
    tol: float
    scale: float

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "max_abs_imag": self.max_abs_imag,
            "is_real": self.is_real,
            "clusters": [[[c.real, c.imag], m] for c, m in self.clusters],
            "tol": self.tol,
            "scale": self.scale,
        }


def spectrum(op, tol: float = REALITY_TOL, cluster_tol: float = CLUSTER_TOL) -> SpectrumReport:
    """Eigenvalues of ``op`` with a reality verdict.

    ``is_real`` holds when max |Im lambda| <= tol * max(1, spectral radius).
    """
    ev = _sort(eigenvalues(op))
    scale = max(1.0, float(np.abs(ev).max(initial=0.0)))
    mai = float(np.abs(ev.imag).max(initial=0.0))
    return SpectrumReport(
        eigenvalues=ev,
        max_abs_imag=mai,
        is_real=mai <= tol * scale,
        clusters=cluster_eigenvalues(ev, cluster_tol * scale),
        tol=tol,
        scale=scale,
    )


@dataclass(frozen=True)
class MinimalPolynomialReport:
    distinct_roots: np.ndarray
    residual: float

    @property
    def degree(self) -> int:
        return len(self.distinct_roots)

    def coefficients(self) -> np.ndarray:
        """Monic coefficients, highest power first."""
        return np.poly(self.distinct_roots)


def _annihilation_residual(M: np.ndarray, roots, blocks) -> float:
    sigma = max(1.0, float(np.linalg.norm(M, 2)))
    parts = blocks if blocks is not None else [np.arange(M.shape[0])]
    worst = 0.0
    for b in parts:
        A = M[np.ix_(b, b)]
        eye = np.eye(len(b))
        prod_ = eye.astype(complex)
        for lam in roots:
            prod_ = prod_ @ ((A - lam * eye) / sigma)
        worst = max(worst, float(np.linalg.norm(prod_)))
    return worst


def minimal_polynomial(op, cluster_tol: float = CLUSTER_TOL) -> MinimalPolynomialReport:
    """Numerical minimal polynomial of a diagonalizable operator.

    Distinct roots are eigenvalue clusters; the product of (H - lambda_k)
    over the roots must annihilate H (normalized residual <= 1e-8).

    Raises
    ------
    NotDiagonalizable
        If the product does not vanish even after a coarser re-clustering.
    """
    M = np.asarray(op)
    blocks = _blocks(op)
    ev = eigenvalues(op)
    scale = max(1.0, float(np.abs(ev).max(initial=0.0)))
    for tol in (cluster_tol, 100 * cluster_tol):
        roots = np.array([c for c, _ in cluster_eigenvalues(ev, tol * scale)])
        res = _annihilation_residual(M, roots, blocks)
        if res <= RESIDUAL_TOL:
            return MinimalPolynomialReport(distinct_roots=roots, residual=res)
    raise NotDiagonalizable(f"product over distinct roots leaves residual {res:.3g}")


# Closed forms of d_k^{S,s} keyed by (2S, s); {t} = 2cos(gt), [t] = sin(gt)/sin(g).
def _b(t, g):
    return q_bracket(t, g)


def _n(t, g):
    return q_number(t, g)


DK_TABLE: dict[tuple[int, int], list[Callable[[float], float]]] = {
    (2, 1): [
        lambda g: 1 / _b(2, g) ** 2,
        lambda g: (_b(3, g) / (_b(1, g) * _b(2, g))) ** 2,
    ],
    (2, 2): [
        lambda g: 1 / _b(2, g) ** 2,
        lambda g: (1 / (_b(2, g) * _n(3, g))) ** 2,
        lambda g: 1.0,
    ],
    (3, 1): [
        lambda g: (_n(3, g) / (_b(2, g) * _n(5, g))) ** 2,
        lambda g: 1 / _b(2, g) ** 2,
        lambda g: ((_n(2, g) * _n(6, g) - 1) / (_n(4, g) * _n(5, g))) ** 2,
    ],
    (3, 2): [
        lambda g: 1 / _b(3, g) ** 2,
        lambda g: 1 / _b(2, g) ** 2,
        lambda g: (_b(5, g) / (_b(2, g) * _b(3, g))) ** 2,
        lambda g: ((_n(5, g) - 2) / (_b(2, g) * _b(3, g))) ** 2,
    ],
    (3, 3): [
        lambda g: 1 / _b(3, g) ** 2,
        lambda g: (_b(1, g) / (_b(3, g) * _n(5, g))) ** 2,
        lambda g: (1 / (_b(2, g) * _b(3, g) * _n(5, g))) ** 2,
        lambda g: 1.0,
    ],
}


def dk_closed_form(two_S: int, s: int, gamma: float) -> list[float]:
    """Tabulated d_k^{S,s}(gamma) in table order (k = 1 first)."""
    try:
        return [float(f(gamma)) for f in DK_TABLE[(two_S, s)]]
    except KeyError:
        raise KeyError(f"no tabulated d_k for 2S={two_S}, s={s}") from None


def dk_expected(two_S: int, s: int, gamma: float) -> list[float]:
    """Sorted d_k set the three-site minimal polynomial actually carries.

    For 2S=2, s=1 the two-site root lambda = a1 + a2 (d = 1) is present in
    addition to the tabulated entries.
    """
    ds = dk_closed_form(two_S, s, gamma)
    if (two_S, s) == (2, 1):
        ds.append(1.0)
    return sorted(ds)


def _pair_dk(roots, a1: float, a2: float, tol: float) -> list[float]:
    total = a1 + a2
    roots = list(roots)
    ds = []
    while roots:
        lam = roots.pop(0)
        if roots:
            j = int(np.argmin([abs(lam + mu - total) for mu in roots]))
            if abs(lam + roots[j] - total) < tol:
                mu = roots.pop(j)
                ds.append(float((1 - lam * mu / (a1 * a2)).real))
                continue
        if abs(lam) < tol:
            continue  # the lone lambda factor
        if abs(2 * lam - total) < tol:
            ds.append(float((1 - lam * lam / (a1 * a2)).real))
            continue
        raise FitError(f"root {lam:.6g} has no partner summing to a1+a2={total:.6g}")
    return sorted(ds)


def extract_dk(two_S: int, s: int, gamma: float, samples: int = 2, seed: int = 0) -> list[float]:
    """Numerically extract the d_k of the N=3 minimal polynomial.

    Each nonzero quadratic factor l^2 - (a1+a2) l + a1 a2 (1-d) is recovered
    from a root pair with l + l' = a1 + a2 as d = 1 - l l'/(a1 a2). Several
    random positive (a1, a2) draws must give the same sorted list.
    """
    rng = np.random.default_rng(seed)
    found = None
    for _ in range(samples):
        a1, a2 = rng.uniform(0.5, 2.0, size=2)
        spec = ChainSpec(DeformationParams(gamma, two_S), 3, SingleSCoupling(s, (a1, a2)))
        roots = minimal_polynomial(hamiltonian_single_s(spec)).distinct_roots
        ds = _pair_dk(roots, a1, a2, tol=1e-6 * (a1 + a2))
        if found is None:
            found = ds
        elif len(ds) != len(found) or not np.allclose(ds, found, atol=1e-8, rtol=0):
            raise FitError(f"inconsistent d_k across coupling draws: {found} vs {ds}")
    return found


def max_imag(op) -> tuple[float, float]:
    """(max |Im lambda|, max(1, spectral radius)) of ``op``."""
    ev = eigenvalues(op)
    return float(np.abs(ev.imag).max(initial=0.0)), max(1.0, float(np.abs(ev).max(initial=0.0)))


@dataclass
class RealityScan:
    gamma_grid: list
    max_imag_curve: list
    is_real_curve: list
    boundary: float | None
    boundary_bracket: tuple | None
    transitions: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    tol: float = REALITY_TOL
    resolution: float = 1e-4

    def to_dict(self) -> dict:
        return {
            "boundary": self.boundary,
            "bracket": list(self.boundary_bracket) if self.boundary_bracket else None,
            "transitions": self.transitions,
            "skipped": self.skipped,
            "tol": self.tol,
            "resolution": self.resolution,
        }


def chain_family(two_S: int, s: int, a) -> Callable[[float], ChainOperator]:
    """gamma -> H^{S,s}_{a} for a fixed coupling vector."""
    a = tuple(a)
    N = len(a) + 1

    def build(gamma: float) -> ChainOperator:
        return hamiltonian_single_s(
            ChainSpec(DeformationParams(gamma, two_S), N, SingleSCoupling(s, a))
        )

    return build


def _evaluate(family, gamma, tol):
    try:
        mi, scale = max_imag(family(gamma))
    except SingularGamma:
        return None
    return mi, mi <= tol * scale


def reality_boundary(
    family: Callable[[float], object],
    gamma_max: float,
    resolution: float = 1e-4,
    n_grid: int = 400,
    tol: float = REALITY_TOL,
    gamma_min: float = 0.0,
    jobs: int = 1,
) -> RealityScan:
    """First real -> non-real transition of ``family(gamma)`` above ``gamma_min``.

    A coarse grid locates every transition; the first one is refined by
    bisection until the bracket is narrower than ``resolution``. Singular
    gamma values are skipped and recorded. ``boundary`` is None when the
    spectrum stays real over the whole range.
    """
    if not gamma_max > gamma_min:
        raise DomainError(f"empty gamma range ({gamma_min}, {gamma_max}]")
    step = (gamma_max - gamma_min) / n_grid
    grid = gamma_min + step * np.arange(1, n_grid + 1)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda g: _evaluate(family, g, tol), grid))
    else:
        results = [_evaluate(family, g, tol) for g in grid]

    curve, flags, skipped, kept = [], [], [], []
    for g, r in zip(grid, results):
        if r is None:
            skipped.append(float(g))
            continue
        kept.append(float(g))
        curve.append(r[0])
        flags.append(bool(r[1]))

    transitions = []
    prev_g, prev_f = gamma_min, True
    for g, f in zip(kept, flags):
        if f != prev_f:
            transitions.append([prev_g, g, "real->complex" if prev_f else "complex->real"])
        prev_g, prev_f = g, f

    scan = RealityScan(kept, curve, flags, None, None, transitions, skipped, tol, resolution)
    first = next((t for t in transitions if t[2] == "real->complex"), None)
    if first is None or transitions[0] is not first:
        if transitions and transitions[0] is not first:
            log.warning("spectrum not real just above gamma_min; no boundary reported")
        return scan

    lo, hi = first[0], first[1]
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        r = _evaluate(family, mid, tol)
        if r is None:
            r = _evaluate(family, mid + 0.1 * resolution, tol)
            if r is None:
                break
        if r[1]:
            lo = mid
        else:
            hi = mid
    scan.boundary = 0.5 * (lo + hi)
    scan.boundary_bracket = (lo, hi)
    return scan


def chebyshev_u(n: int, t: float) -> float:
    """Chebyshev polynomial of the second kind by U_{n+1} = 2t U_n - U_{n-1}."""
    u_prev, u = 1.0, 2.0 * t
    if n == 0:
        return u_prev
    for _ in range(n - 1):
        u_prev, u = u, 2 * t * u - u_prev
    return u


def chebyshev_boundary(two_S: int, N: int) -> float:
    """Smallest gamma > 0 with U_{2S}(cos gamma) = 2 cos(pi/N)."""
    if N < 3:
        raise DomainError("the alternating-chain boundary needs N >= 3")
    target = 2 * np.cos(np.pi / N)
    # U_{2S}(cos g) = sin((2S+1)g)/sin g falls monotonically from 2S+1 to 0 on (0, pi/(2S+1))
    return float(
        brentq(lambda g: chebyshev_u(two_S, np.cos(g)) - target, 1e-12, np.pi / (two_S + 1), xtol=1e-15)
    )


def conjecture1_bound(two_S: int, s: int) -> float:
    """pi / (2 (s + S + 1 - delta_{s,2S}))."""
    return np.pi / (2 * (s + two_S / 2 + 1 - (1 if s == two_S else 0)))


def _admissible_max(two_S: int) -> float:
    return np.pi / two_S


def _conjecture1(trials: int, rng, two_S_values=(1, 2, 3)) -> dict:
    cases = []
    for two_S in two_S_values:
        for s in range(two_S + 1):
            bound = conjecture1_bound(two_S, s)
            a = float(rng.uniform(0.5, 2.0))
            family = chain_family(two_S, s, (a, -a))
            below_fail = []
            for g in rng.uniform(0.02 * bound, 0.98 * bound, size=trials):
                r = _evaluate(family, float(g), REALITY_TOL)
                if r is not None and not r[1]:
                    below_fail.append(float(g))
            hi = min(1.1 * bound, 0.999 * _admissible_max(two_S))
            above = [float(g) for g in np.linspace(1.005 * bound, hi, 8)]
            violation = None
            for g in above:
                r = _evaluate(family, g, REALITY_TOL)
                if r is not None and not r[1]:
                    violation = g
                    break
            cases.append({
                "S": two_S / 2, "s": s, "a": a, "predicted_bound": bound,
                "real_below": not below_fail, "counterexamples_below": below_fail,
                "violation_above": violation,
                "supported": not below_fail and violation is not None,
            })
    return {"cases": cases, "supported": all(c["supported"] for c in cases)}


def _conjecture2(n_grid: int = 200, resolution: float = 1e-4) -> dict:
    cases = []
    for two_S, Ns in ((1, (3, 4, 5, 6)), (2, (3, 4, 5, 6))):
        for N in Ns:
            predicted = chebyshev_boundary(two_S, N)
            gmax = min(1.5 * predicted, 0.999 * _admissible_max(two_S))
            scan = reality_boundary(chain_family(two_S, 0, alternating(N)), gmax, resolution, n_grid)
            diff = None if scan.boundary is None else abs(scan.boundary - predicted)
            cases.append({
                "S": two_S / 2, "N": N, "predicted": predicted, "scanned": scan.boundary,
                "abs_diff": diff, "supported": diff is not None and diff < 2e-3,
            })
    return {"cases": cases, "supported": all(c["supported"] for c in cases)}


def _conjecture3(trials: int, rng, cases=((1, 4), (2, 3))) -> dict:
    out = []
    for two_S, N in cases:
        counterexamples, singular_resamples = [], 0
        done = 0
        while done < trials:
            s = int(rng.integers(0, two_S + 1))
            a = tuple(float(x) for x in rng.uniform(1e-3, 2.0, size=N - 1))
            g = float(rng.uniform(0, 0.95 * np.pi / two_S))
            try:
                op = chain_family(two_S, s, a)(g)
            except SingularGamma:
                singular_resamples += 1
                continue
            rep = spectrum(op)
            if not rep.is_real:
                counterexamples.append({"s": s, "a": list(a), "gamma": g, "max_abs_imag": rep.max_abs_imag})
            done += 1
        out.append({
            "S": two_S / 2, "N": N, "trials": trials,
            "counterexamples": counterexamples, "singular_resamples": singular_resamples,
        })
    return {"cases": out, "supported": all(not c["counterexamples"] for c in out)}


def conjecture_support(which: int, trials: int = 20, seed: int = 0) -> dict:
    """Numerical evidence for the three spectral-reality conjectures.

    A counterexample is recorded in the report, never raised: the claims
    are conjectures, so a failure is a finding rather than an error.
    ``which=2`` is deterministic and ignores ``trials``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    if which == 1:
        body = _conjecture1(trials, rng)
    elif which == 2:
        body = _conjecture2()
    elif which == 3:
        body = _conjecture3(trials, rng)
    else:
        raise ValueError("which must be 1, 2 or 3")
    return {"conjecture": which, "seed": seed, "trials": trials, "tol": REALITY_TOL, **body}
