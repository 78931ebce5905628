import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compshock import (
    SignRestriction,
    case2_line,
    counterfactual_theta1,
    intersect,
    is_subset,
    sign_restriction_set,
    subset_relations,
)
from compshock.bounds import (
    ABOVE,
    BELOW,
    HalfPlane,
    IdentifiedSet,
    Region,
    population_line,
    sample_line,
)
from compshock.errors import DegenerateLineError, NonIdentificationError, RelevanceError
from compshock.identification import alpha, sectoral_targets
from compshock import simulate

from conftest import two_iv_specs

GRID = np.linspace(-3, 3, 100)
T1, T2 = np.meshgrid(GRID, GRID, indexing="ij")


def oracle(weight, sign, beta, t1, t2):
    """Membership from the weight formula; NaN on boundary points."""
    with np.errstate(divide="ignore", invalid="ignore"):
        w1 = (beta - t2) / (t1 - t2)
    w = w1 if weight == 1 else 1.0 - w1
    out = np.where(sign * w > 0, 1.0, 0.0)
    boundary = (np.abs(t1 - t2) < 1e-9) | (np.abs(t2 - beta) < 1e-9) | (np.abs(t1 - beta) < 1e-9)
    return np.where(boundary, np.nan, out)


def assert_matches(ident_set, expected):
    got = ident_set.contains_grid(T1, T2)
    keep = ~np.isnan(expected)
    assert np.array_equal(got[keep], expected[keep].astype(bool))


@pytest.mark.parametrize("weight", [1, 2])
@pytest.mark.parametrize("sign", [1, -1])
def test_single_sets_match_formula(weight, sign):
    rng = np.random.default_rng(weight * 10 + sign)
    for beta in rng.uniform(-2.5, 2.5, 10):
        s = sign_restriction_set(SignRestriction(weight, sign, float(beta)))
        assert_matches(s, oracle(weight, sign, beta, T1, T2))


def test_member_example():
    s = sign_restriction_set(SignRestriction(1, 1, 0.37))
    assert s.contains(1.0, 0.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 2), st.sampled_from([1, -1]), st.floats(-10, 10))
def test_diagonal_never_member(weight, sign, beta):
    s = sign_restriction_set(SignRestriction(weight, sign, beta))
    assert not s.contains(beta, beta)
    assert not s.contains(beta + 1.0, beta + 1.0)


def test_equal_beta_opposite_signs_empty():
    for beta in (-1.0, 0.0, 0.69):
        a = sign_restriction_set(SignRestriction(1, 1, beta, "A"))
        b = sign_restriction_set(SignRestriction(1, -1, beta, "B"))
        both = intersect([a, b])
        assert both.is_empty
        assert not both.contains_grid(T1, T2).any()


def test_two_instrument_interval():
    a = sign_restriction_set(SignRestriction(1, 1, 0.69, "A"))
    b = sign_restriction_set(SignRestriction(1, -1, 0.37, "B"))
    both = intersect([a, b])
    assert not both.is_empty
    pieces = both.intervals()
    assert len(pieces) == 1 and pieces[0]["branch"] == ABOVE
    assert pieces[0]["theta2"] == (0.37, 0.69)
    expected = np.where(np.isnan(oracle(1, 1, 0.69, T1, T2) + oracle(1, -1, 0.37, T1, T2)), np.nan,
                        oracle(1, 1, 0.69, T1, T2) * oracle(1, -1, 0.37, T1, T2))
    assert_matches(both, expected)
    members = both.contains_grid(T1, T2)
    assert np.all((T2[members] > 0.37) & (T2[members] < 0.69) & (T1[members] > T2[members]))


def test_intersection_idempotent():
    s = sign_restriction_set(SignRestriction(2, -1, 0.4))
    assert np.array_equal(intersect([s, s]).contains_grid(T1, T2), s.contains_grid(T1, T2))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 2), st.sampled_from([1, -1]), st.floats(-2, 2)),
                min_size=1, max_size=3),
       st.tuples(st.integers(1, 2), st.sampled_from([1, -1]), st.floats(-2, 2)))
def test_intersection_monotone(specs, extra):
    sets = [sign_restriction_set(SignRestriction(*s)) for s in specs]
    more = intersect(sets + [sign_restriction_set(SignRestriction(*extra))])
    base = intersect(sets)
    assert not np.any(more.contains_grid(T1, T2) & ~base.contains_grid(T1, T2))
    assert is_subset(more, base)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2))
def test_reflection_duality(beta):
    pos = sign_restriction_set(SignRestriction(1, 1, beta))
    neg = sign_restriction_set(SignRestriction(1, -1, beta))
    # reflect theta_2 across beta while keeping theta_1 - theta_2 (the branch) unchanged
    d = T1 - T2
    r2 = 2 * beta - T2
    r1 = r2 + d
    keep = (np.abs(T2 - beta) > 1e-9) & (np.abs(d) > 1e-9)
    assert np.array_equal(pos.contains_grid(T1, T2)[keep], neg.contains_grid(r1, r2)[keep])


@pytest.mark.parametrize("beta", [0.5, 0.0, -1.0])
def test_subset_relations(beta):
    rep = subset_relations(beta)
    assert rep.all_hold
    w1p = sign_restriction_set(SignRestriction(1, 1, beta)).contains_grid(T1, T2)
    w1n = sign_restriction_set(SignRestriction(1, -1, beta)).contains_grid(T1, T2)
    w2p = sign_restriction_set(SignRestriction(2, 1, beta)).contains_grid(T1, T2)
    w2n = sign_restriction_set(SignRestriction(2, -1, beta)).contains_grid(T1, T2)
    assert not np.any(w2n & ~w1p)
    assert not np.any(w1n & ~w2p)


def test_exact_membership_on_boundary():
    s = sign_restriction_set(SignRestriction(1, 1, 0.1))
    # theta_2 = 0.1 exactly is excluded even though 0.1 has no exact binary form
    assert not s.contains(1.0, 0.1)
    assert s.contains(1.0, 0.0999999999)


def test_records_roundtrip():
    s = intersect([sign_restriction_set(SignRestriction(1, 1, 0.69)),
                   sign_restriction_set(SignRestriction(1, -1, 0.37))])
    recs = s.to_records()
    assert all(r["op"] == "<" for r in recs)
    regions = {}
    for r in recs:
        regions.setdefault((r["region"], r["branch"]), []).append(
            HalfPlane.of(r["a"], r["b"], r["c"]))
    rebuilt = IdentifiedSet(tuple(Region(tuple(p), b) for (_, b), p in regions.items()))
    assert np.array_equal(rebuilt.contains_grid(T1, T2), s.contains_grid(T1, T2))


def test_region_interval_unbounded():
    s = sign_restriction_set(SignRestriction(1, 1, 0.0))
    below = [iv for iv in s.intervals() if iv["branch"] == BELOW][0]
    assert below["theta2"] == (0.0, float("inf"))


# --- covariance line --------------------------------------------------------

def test_line_point_identified_when_c2_zero():
    line = case2_line(1.5, 0.5, 0.0)
    assert line.w1 == 1.0
    assert counterfactual_theta1(line, 123.0) == 3.0


def test_symmetric_line():
    line = case2_line(1.0, 0.5, 0.5)
    assert line.w1 == 0.5
    assert counterfactual_theta1(line, 0.68) == pytest.approx(1.32, abs=1e-15)
    assert counterfactual_theta1(line, line.c_y / 0.5) == 0.0


def test_line_errors():
    with pytest.raises(DegenerateLineError):
        case2_line(1.0, 0.0, 0.0)
    with pytest.raises(NonIdentificationError):
        counterfactual_theta1(case2_line(1.0, 0.0, 1.0), 0.3)
    with pytest.raises(RelevanceError):
        _ = case2_line(1.0, 1.0, -1.0).weights


def test_sweep_satisfies_line(rng):
    line = case2_line(*rng.uniform(0.2, 2.0, 3))
    theta2 = np.linspace(-3, 3, 301)
    theta1 = counterfactual_theta1(line, theta2)
    resid = line.c_y - line.coefficients[0] * theta1 - line.coefficients[1] * theta2
    assert np.max(np.abs(resid)) < 1e-12


def test_hyperplane_for_three_sectors():
    line = case2_line(2.0, 0.5, 0.3, 0.2)
    np.testing.assert_allclose(line.weights, [0.5, 0.3, 0.2])
    assert line.residual([1.0, 2.0, 4.5]) == pytest.approx(0.0, abs=1e-15)


def test_population_line_contains_truth(augmented):
    for spec in two_iv_specs():
        for h in range(4):
            line = population_line(augmented, spec, h)
            assert abs(line.residual(sectoral_targets(augmented, h))) < 1e-12


def test_true_point_in_population_sign_sets(augmented):
    for spec in two_iv_specs():
        for h in range(4):
            line = population_line(augmented, spec, h)
            w1 = line.w1
            beta = line.c_y / sum(line.coefficients)
            truth = sectoral_targets(augmented, h)
            if np.isclose(truth[0], truth[1]):
                continue
            for weight, w in ((1, w1), (2, 1 - w1)):
                s = sign_restriction_set(SignRestriction(weight, 1 if w > 0 else -1, beta))
                assert s.contains(*truth)


def test_sample_line_close_to_population(augmented):
    spec = two_iv_specs()[0]
    panel = simulate(augmented, [spec], T=20_000, seed=1)
    line = sample_line(panel, 0, 0)
    pop = population_line(augmented, spec, 0)
    np.testing.assert_allclose(line.coefficients, pop.coefficients, atol=0.05)
    assert line.w1 == pytest.approx(pop.w1, abs=0.05)
    # population weights agree with alpha-based weights for a no-intersectoral model
    a = alpha(augmented, spec).values
    assert pop.w1 == pytest.approx(a[0] / a.sum(), abs=1e-14)
