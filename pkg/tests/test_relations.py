import math

import numpy as np
import pytest

from uqchain.errors import UnknownIdentity
from uqchain.relations import (
    REGISTRY,
    IdentityParams,
    default_lattice,
    run_all,
    run_identity,
    tolerance_for,
)


@pytest.mark.parametrize("name", list(REGISTRY))
@pytest.mark.parametrize("two_S,N,g", [(1, 3, 0.2), (2, 2, -0.15), (3, 3, 0.1)])
def test_every_identity_holds(name, two_S, N, g):
    rep = run_identity(name, IdentityParams(two_S, N, g))
    assert rep.error is None
    assert rep.passed, (rep.residual, rep.tolerance)


def test_yang_baxter_spin_one():
    rep = run_identity("yang_baxter", IdentityParams(2, 3, 0.3))
    assert rep.passed and rep.residual < 1e-10


def test_temperley_lieb_records_mu():
    g = 0.5
    rep = run_identity("temperley_lieb", IdentityParams(1, 3, g))
    assert rep.passed
    assert rep.details["mu_S"] == pytest.approx(1 / (4 * math.cos(g) ** 2), rel=1e-12)


def test_classical_point_is_exact():
    rep = run_identity("uq_relations", IdentityParams(1, 3, 0.0))
    assert rep.residual < 1e-14


def test_unknown_identity():
    with pytest.raises(UnknownIdentity):
        run_identity("pentagon", IdentityParams(1, 2, 0.1))
    with pytest.raises(UnknownIdentity):
        run_all([IdentityParams(1, 2, 0.1)], names=["pentagon"])


@pytest.mark.parametrize("name", ["yang_baxter", "temperley_lieb", "uq_relations", "r_conjugation"])
def test_perturbation_is_detected(name):
    # negative control: a relative 1e-3 perturbation must break the identity
    rep = run_identity(name, IdentityParams(2, 3, 0.3, perturbation=1e-3))
    assert not rep.passed
    assert rep.residual > 1e3 * rep.tolerance
    assert rep.params["perturbation"] == 1e-3


def test_singular_gamma_is_reported_not_raised():
    # S=1 projectors need [3] != 0, which fails at gamma = pi/3
    reps = run_all([IdentityParams(2, 2, math.pi / 3), IdentityParams(2, 2, 0.2)], names=["temperley_lieb"])
    bad, good = reps
    assert not bad.passed and "SingularGamma" in bad.error and math.isnan(bad.residual)
    assert good.passed


def test_inadmissible_gamma_is_reported():
    rep = run_identity("casimir_value", IdentityParams(2, 2, 2.0))
    assert not rep.passed and rep.error.startswith("DomainError")


def test_tolerance_by_dimension():
    assert tolerance_for(256) == 1e-10
    assert tolerance_for(257) == 1e-8
    assert run_identity("h_symmetry", IdentityParams(3, 4, 0.1)).tolerance == 1e-10
    assert run_identity("yang_baxter", IdentityParams(1, 2, 0.1)).tolerance == 1e-10


def test_residual_scales_linearly_with_perturbation():
    r1 = run_identity("yang_baxter", IdentityParams(1, 3, 0.2, perturbation=1e-6)).residual
    r2 = run_identity("yang_baxter", IdentityParams(1, 3, 0.2, perturbation=1e-5)).residual
    assert r2 / r1 == pytest.approx(10, rel=0.05)


def test_run_all_order_and_determinism():
    lattice = default_lattice(gammas=(0.1, -0.2))[:4]
    names = ["eta_conjugate", "casimir_value", "h_symmetry"]
    a = run_all(lattice, names=names)
    b = run_all(lattice, names=names, jobs=2)
    assert [r.identity_name for r in a] == [n for n in names for _ in lattice]
    assert [r.residual for r in a] == [r.residual for r in b]
    assert [r.params for r in a] == [r.params for r in b]


def test_report_dict_shape():
    d = run_identity("det_formula", IdentityParams(1, 2, 0.1)).to_dict()
    assert {"identity_name", "anchor", "residual", "tolerance", "pass", "params", "details", "error"} <= set(d)
    assert d["pass"] is True
    assert d["params"] == {"S": 0.5, "N": 2, "gamma": 0.1, "seed": 0}


def test_default_lattice_covers_spins_and_lengths():
    lat = default_lattice()
    assert {(p.two_S, p.N) for p in lat} == {(s, n) for s in (1, 2, 3) for n in (2, 3, 4)}
    assert all(2 * p.two_S / 2 * abs(p.gamma) < np.pi for p in lat)
