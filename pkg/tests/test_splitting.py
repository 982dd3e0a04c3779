"""Splitting the vertical retraction, biproduct structure, and the
non-example that refuses to split."""

import numpy as np
import pytest

from tanbun.expr import (
    CheckConfig, compose, cube, eval_map, parse_map, simplify_map,
    to_source,
)
from tanbun.jet import tangent_map
from tanbun.bundle import BundleSpec, Verdict, check_predifferential
from tanbun.splitting import (
    biproduct_check, check_splitting, chi, chi_checks, lift_on_pullback,
    non_idempotent_demo, pulled_back_tangent, splitting_pair,
)
from tanbun.corpus import bump_bundle, conjugated_bundle, trivial_bundle

CFG = CheckConfig(count=40, seed=5)


def _shear_bundle() -> BundleSpec:
    phi = parse_map("x0, x1, x2 + x1^2", 3)
    phi_inv = parse_map("x0, x1, x2 - x1^2", 3)
    lam_triv = parse_map("x0, 0, 0, 0, x1, x2", 3)
    lam = simplify_map(compose(tangent_map(phi, 1),
                               compose(lam_triv, phi_inv)))
    return BundleSpec(name="shear", base_dim=1, total_dim=3,
                      base_box=cube(1), total_box=cube(3),
                      q=parse_map("x0", 3), xi=parse_map("x0, 0, 0", 1),
                      lam=lam)


# --------------------------------------------------------------------------
# The vertical retraction


def test_chi_closed_forms():
    assert to_source(chi(trivial_bundle(1, 1))) == "x0, 0, x2"
    assert to_source(chi(conjugated_bundle())) == "x0, 0, x2 - 2*x0*x1"


def test_chi_is_idempotent_pointwise():
    ch = chi(conjugated_bundle())
    x = np.array([0.7, -1.2, 0.4])
    once = eval_map(ch, x)
    assert np.allclose(eval_map(ch, once), once, atol=1e-12)


def test_chi_checks_pass_on_conjugated():
    rep = chi_checks(conjugated_bundle(), CFG)
    assert [e.law_id for e in rep.entries] == [
        "chi-idempotent", "chi-linear", "chi-lift-compat", "chi-rank-trace"]
    assert rep.ok


# --------------------------------------------------------------------------
# Splitting pairs


def test_splitting_pair_closed_forms():
    into, back = splitting_pair(trivial_bundle(1, 1), CFG)
    assert to_source(into) == "x0, 0, x1"
    assert to_source(back) == "x0, x2"
    into_c, back_c = splitting_pair(conjugated_bundle(), CFG)
    assert to_source(into_c) == "x0, 0, x1 - x0^2"
    assert to_source(back_c) == "x0, x2 + x0^2 - 2*x0*x1"


def test_splitting_pair_recovers_chi():
    cb = conjugated_bundle()
    into, back = splitting_pair(cb, CFG)
    ch = chi(cb)
    x = np.array([0.7, -1.2, 0.4])
    # back then into reproduces the retraction; into then back is the
    # identity on the carrier.
    assert np.allclose(eval_map(into, eval_map(back, x)), eval_map(ch, x),
                       atol=1e-12)
    e = np.array([0.7, -1.2])
    assert np.allclose(eval_map(back, eval_map(into, e)), e, atol=1e-12)


def test_check_splitting_passes_exactly_on_conjugated():
    rep = check_splitting(conjugated_bundle(), CFG)
    assert [e.law_id for e in rep.entries] == [
        "retract-identity", "section-image", "uniqueness", "equalised"]
    assert rep.aggregate is Verdict.PASS_EXACT


def test_quadratic_fibre_forces_the_implicit_retraction():
    shear = _shear_bundle()
    into, back = splitting_pair(shear, CFG)
    assert hasattr(into, "components")
    assert not hasattr(back, "components")
    rep = check_splitting(shear, CFG)
    assert rep.ok


def test_bump_splitting_gates_on_universality():
    rep = check_splitting(bump_bundle(), CFG)
    assert [e.law_id for e in rep.entries] == ["splitting-gate"]
    assert rep.entries[0].verdict is Verdict.FAIL


# --------------------------------------------------------------------------
# Biproduct structure


def test_biproduct_identities_hold_exactly():
    rep = biproduct_check(conjugated_bundle(), CFG)
    assert [e.law_id for e in rep.entries] == [
        "pi0-iota0", "pi1-iota0", "pi0-iota1", "pi1-iota1",
        "idempotent-split"]
    assert rep.aggregate is Verdict.PASS_EXACT


def test_biproduct_identities_hold_on_trivial_rank_two():
    rep = biproduct_check(trivial_bundle(1, 2), CFG)
    assert rep.ok


# --------------------------------------------------------------------------
# Pulled-back tangent data


def test_pulled_back_tangent_charts_have_expected_arities():
    cb = conjugated_bundle()
    pb = pulled_back_tangent(cb)
    assert pb.pi.arity == 3 and pb.pi.coarity == 1
    assert pb.iota.arity == 3 and pb.iota.coarity == 4


def test_pulled_back_data_forms_a_lawful_bundle():
    cb = conjugated_bundle()
    pb = pulled_back_tangent(cb)
    spec = BundleSpec(name="pullback", base_dim=1, total_dim=3,
                      base_box=cb.base_box, total_box=cube(3),
                      q=pb.pi, xi=parse_map("x0, 0, 0", 1),
                      lam=lift_on_pullback(cb))
    rep = check_predifferential(spec, CFG)
    assert rep.aggregate is Verdict.PASS_EXACT


# --------------------------------------------------------------------------
# The idempotent that is not one


def test_demo_morphism_is_lawful_but_never_splits():
    rep = non_idempotent_demo(CFG)
    got = {e.law_id: e.verdict for e in rep.entries}
    assert got["morphism-laws"].ok
    assert got["not-idempotent"] is Verdict.PASS_EXACT
    assert got["rank-nonconstant"] is Verdict.PASS_EXACT
    assert got["splitting-refused"] is Verdict.PASS_EXACT
