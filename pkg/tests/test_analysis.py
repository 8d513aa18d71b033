import math
import random
from fractions import Fraction

import numpy as np
import pytest

from lyapsearch.analysis import (BootstrapPreconditionError, DiagonalParameterError,
                                 Eventually, InfeasiblePairError, RateQuery, Window,
                                 analyze_groups, bootstrap_candidates, bootstrap_rate_check,
                                 certified_time, feasible, max_rate, psd_conditions)
from lyapsearch.expr import Expr, GAMMA1, LINEAR, LOG, POWER, parse_expr
from lyapsearch.pq import PQPair, _sym_matrix, apply_sequence, initial_pair
from lyapsearch.systems import CATALOG

HALF = Fraction(1, 2)
LAM = Expr.symbol("lambda")
THETA = Expr.symbol("theta")
G2, G3 = Expr.gamma(2), Expr.gamma(3)
A, B, R = Expr.symbol("a"), Expr.symbol("b"), Expr.symbol("r")
T_INV = Expr.t_power(-1)


def build(system, ops, bindings=None):
    pair = apply_sequence(initial_pair(CATALOG[system]), ops)
    if not bindings:
        return pair
    sub = lambda e: e.subs_params(bindings)
    return PQPair(tuple(tuple(sub(e) for e in row) for row in pair.P),
                  tuple(tuple(sub(e) for e in row) for row in pair.Q),
                  pair.provenance, pair.has_gap)


# Certified winners, reconstructed from their operation sequences.  The entries
# below are the published closed forms; matching them entry-wise pins down the
# whole operation pipeline.
def damped_newton_winner():
    return build("damped-newton", ("A1", "E1", "F1"))


def gradient_flow_winner():
    return build("first-order-hessian", ("A1",), {"b": 0})


def first_order_winner():
    return build("first-order-hessian", ("A1", "B3", "E1", "F1"))


def sc_nag_winner():
    return build("second-order-hessian", ("A1", "B1", "B2", "B3"), {"b": 0})


def second_order_winner():
    return build("second-order-hessian", ("A1", "B1", "B2", "E1", "F1"))


def nag_winner():
    return build("nag", ("A1", "B1", "B2", "B3"))


def nag_bootstrap_pair():
    return build("nag", ("A1", "B1", "B3", "B2"))


def generalized_nag_winner():
    return build("generalized-nag", ("A1", "B1", "B3", "B2"))


def test_winning_pairs_match_published_matrices():
    g = GAMMA1
    cases = [
        (damped_newton_winner(),
         {(1, 1): HALF * LAM * g},
         {(1, 1): HALF * LAM * (g - g ** 2 - G2), (3, 3): THETA}),
        (gradient_flow_winner(),
         {},
         {(1, 1): HALF * LAM * g, (1, 3): HALF * g, (3, 3): Expr.number(1)}),
        (first_order_winner(),
         {(1, 1): HALF * (1 + B * LAM) * g},
         {(1, 1): HALF * (LAM * g - (1 + B * LAM) * (g ** 2 + G2)),
          (3, 3): 1 + B * THETA}),
        (sc_nag_winner(),
         {(1, 1): HALF * (A * g - g ** 2 - G2), (1, 3): HALF * g, (3, 3): HALF},
         {(1, 1): HALF * (-A * g ** 2 + g ** 3 - A * G2 + LAM * g + 3 * g * G2 + G3),
          (3, 3): A - Fraction(3, 2) * g}),
        (second_order_winner(),
         {(1, 1): HALF * B * LAM * g, (1, 3): HALF * g, (3, 3): HALF},
         {(1, 1): HALF * LAM * (g - B * g ** 2 - B * G2),
          (1, 3): HALF * (A * g - g ** 2 - G2),
          (3, 3): A + B * THETA - Fraction(3, 2) * g}),
        (nag_winner(),
         {(1, 1): HALF * (R * g * T_INV - g ** 2 - G2), (1, 3): HALF * g, (3, 3): HALF},
         {(3, 3): R * T_INV - Fraction(3, 2) * g}),
        (nag_bootstrap_pair(),
         {(1, 1): HALF * R * g * T_INV, (1, 3): HALF * g, (3, 3): HALF},
         {(1, 3): HALF * (-1 * g ** 2 - G2), (3, 3): R * T_INV - Fraction(3, 2) * g}),
        (generalized_nag_winner(),
         {(1, 1): HALF * R * g * Expr.t_power(0, -1), (1, 3): HALF * g, (3, 3): HALF},
         {(1, 3): HALF * (-1 * g ** 2 - G2),
          (3, 3): R * Expr.t_power(0, -1) - Fraction(3, 2) * g}),
    ]
    for pair, p_expect, q_expect in cases:
        label = ">".join(pair.provenance)
        for (i, j), value in p_expect.items():
            assert pair.p_entry(i, j) == value, f"P{i}{j} of {label}"
        for (i, j), value in q_expect.items():
            assert pair.q_entry(i, j) == value, f"Q{i}{j} of {label}"


def test_psd_conditions_damped_newton_minors():
    conds = psd_conditions(damped_newton_winner(), LINEAR, corners=[(1.0, 1.0)])
    minors = set(conds.minors_by_corner[0])
    k = Expr.symbol("k")
    assert HALF * k in minors                 # P11 with lambda at the corner
    assert HALF * (k - k ** 2) in minors      # Q11
    assert Expr.number(1) in minors           # Q33 = theta at the corner


def test_psd_conditions_sc_nag_cross_minor():
    pair = build("second-order-hessian", ("A1", "B1", "B2", "B3"), {"b": 0, "a": 2})
    conds = psd_conditions(pair, LINEAR, corners=[(1.0, 1.0)])
    minors = set(conds.minors_by_corner[0])
    # The 2x2 determinant of P at a = 2 sqrt(mu), mu = 1: (2k - k^2)/4 - k^2/4.
    assert parse_expr("1/2*k - 1/2*k^2") in minors


def test_psd_conditions_zero_p_gives_no_p_minors():
    pair = gradient_flow_winner()
    conds = psd_conditions(pair, LINEAR, corners=[(1.0, 1.0)])
    # P is the zero matrix; every minor comes from Q.
    assert all(not e for row in pair.P for e in row)
    assert all(m.free_symbols() <= {"k"} for m in conds.minors)


def test_psd_conditions_reject_offdiagonal_lambda():
    bad = PQPair(P=_sym_matrix(3, {}),
                 Q=_sym_matrix(5, {(1, 2): LAM}), has_gap=True)
    with pytest.raises(DiagonalParameterError):
        psd_conditions(bad, LINEAR, corners=[(1.0, 1.0)])


def test_psd_conditions_require_gap_term():
    from lyapsearch.analysis import AnalysisError

    fresh = initial_pair(CATALOG["damped-newton"])
    with pytest.raises(AnalysisError):
        psd_conditions(fresh, LINEAR, corners=[(1.0, 1.0)])


def test_feasible_damped_newton_boundary():
    query = RateQuery(LINEAR, mu=1.0, convex=True)
    conds = psd_conditions(damped_newton_winner(), LINEAR, query.corners())
    assert feasible(conds, 1.0, query)
    assert not feasible(conds, 1.01, query)


def test_feasible_gradient_flow_boundary():
    query = RateQuery(LINEAR, mu=1.0, params={"b": 0.0})
    conds = psd_conditions(gradient_flow_winner(), LINEAR, query.corners())
    assert feasible(conds, 2.0, query)
    assert not feasible(conds, 2.01, query)


def test_feasible_at_zero_rate_for_ranked_pairs():
    # gamma constant: certified pairs must accept k = 0.
    cases = [
        (damped_newton_winner(), RateQuery(LINEAR, mu=1.0, convex=True)),
        (gradient_flow_winner(), RateQuery(LINEAR, mu=1.0, params={"b": 0.0})),
        (build("second-order-hessian", ("A1", "B1", "B2", "B3"), {"b": 0, "a": 2}),
         RateQuery(LINEAR, mu=1.0)),
        (nag_winner(), RateQuery(LOG, mu=1.0, convex=True, params={"r": 3.0})),
    ]
    for pair, query in cases:
        conds = psd_conditions(pair, query.gamma, query.corners())
        assert feasible(conds, 0.0, query, bindings=query.params)


def test_max_rate_first_order_smoothness_assisted():
    result = max_rate(first_order_winner(),
                      RateQuery(LINEAR, mu=1.0, L=4.0, params={"b": -0.25}))
    assert result.k_max == pytest.approx(4.0 / 3.0, rel=1e-4)


def test_max_rate_sc_nag():
    query = RateQuery(LINEAR, mu=1.0, params={"a": 2.0, "b": 0.0})
    result = max_rate(sc_nag_winner(), query)
    assert result.k_max == pytest.approx(1.0, rel=1e-4)
    # The returned rate is itself certified: re-checking feasibility passes.
    conds = psd_conditions(sc_nag_winner(), LINEAR, query.corners())
    assert feasible(conds, result.k_max, query, bindings=query.params)


def test_max_rate_nag_log_convex():
    result = max_rate(nag_winner(), RateQuery(LOG, mu=1.0, convex=True, params={"r": 3.0}))
    assert result.k_max == pytest.approx(2.0, rel=1e-4)


def test_max_rate_picks_best_grid_point():
    query = RateQuery(LINEAR, mu=1.0, L=4.0, grid={"b": (-0.25, 0.0)})
    result = max_rate(first_order_winner(), query)
    assert result.k_max == pytest.approx(4.0 / 3.0, rel=1e-4)
    assert result.params["b"] == -0.25


def test_max_rate_rejects_pair_infeasible_at_zero():
    pair = build("damped-newton", ("A1",))  # keeps Q34 = 1/2 with zero diagonal
    with pytest.raises(InfeasiblePairError):
        max_rate(pair, RateQuery(LINEAR, mu=1.0, convex=True))


def test_max_rate_flags_unbounded_rate():
    # A pair with no constraints at all is feasible for every k; the search
    # stops at the cap and says so instead of reporting a certified rate.
    trivial = PQPair(P=_sym_matrix(3, {}), Q=_sym_matrix(5, {}), has_gap=True)
    result = max_rate(trivial, RateQuery(LINEAR, mu=1.0))
    assert result.status == "cap"
    assert result.k_max >= 2 ** 16
    assert not result.certified()


def test_monotone_feasibility_prefix():
    query = RateQuery(LINEAR, mu=1.0, convex=True)
    conds = psd_conditions(damped_newton_winner(), LINEAR, query.corners())
    flags = [feasible(conds, k, query) for k in np.linspace(0.0, 2.0, 41)]
    first_bad = flags.index(False)
    assert all(flags[:first_bad]) and not any(flags[first_bad:])


def test_scaling_invariance():
    # Scaling the ODE scales the starting matrices; scaling a pair scales every
    # minor by a positive power of the factor, so the certified rate is unchanged.
    base = CATALOG["first-order-hessian"]
    scaled = base.scaled(Expr.number(3))
    q0 = initial_pair(base).Q
    q0_scaled = initial_pair(scaled).Q
    assert all(3 * q0[i][j] == q0_scaled[i][j] for i in range(5) for j in range(5))

    query = RateQuery(LINEAR, mu=1.0, L=4.0, params={"b": -0.25})
    winner = first_order_winner()
    k_base = max_rate(winner, query).k_max
    tripled = PQPair(tuple(tuple(3 * e for e in row) for row in winner.P),
                     tuple(tuple(3 * e for e in row) for row in winner.Q),
                     winner.provenance, winner.has_gap)
    k_scaled = max_rate(tripled, query).k_max
    assert abs(k_base - k_scaled) <= 1e-6 * max(k_base, 1.0)


def test_eventually_domain_supremum_flag():
    result = max_rate(generalized_nag_winner(),
                      RateQuery(LINEAR, mu=1.0, params={"r": 1.0, "alpha": 0.5},
                                t_domain=Eventually(1e4)))
    assert result.supremum
    # The certified range at the returned rate starts at the searched tail.
    assert result.validity[0] == pytest.approx(1e4, rel=1e-9)
    assert result.validity[1] == math.inf


def test_nag_window_certified_time():
    # r tuned for unit rate: PSD holds exactly up to T = 2(k^2 + mu)/k^3 = 4.
    query = RateQuery(LINEAR, mu=1.0, params={"r": 8.0}, t_domain=Window(1e-2, 64.0))
    observed = certified_time(nag_winner(), query, 1.0)
    assert observed == pytest.approx(4.0, rel=0.025)


def test_positive_rate_group_counts(enumerations):
    """How many groups certify a strictly positive rate, per published result."""

    def positive(groups, query):
        rates = analyze_groups(groups, query)
        return sum(1 for r in rates if r.result is not None and r.result.k_max > 1e-5)

    assert positive(enumerations("damped-newton"),
                    RateQuery(LINEAR, mu=1.0, convex=True)) == 1
    assert positive(enumerations("nag"),
                    RateQuery(LOG, mu=1.0, convex=True, grid={"r": (3.0,)})) == 2
    assert positive(enumerations("generalized-nag"),
                    RateQuery(POWER, mu=1.0, params={"alpha": 0.5}, grid={"r": (1.0,)},
                              t_domain=Eventually(1e4))) == 2


def test_second_order_rate_breakdown(enumerations):
    groups = enumerations("second-order-hessian")
    query = RateQuery(LINEAR, mu=1.0, grid={"a": (2.0, 1.0), "b": (0.0, 1.0)})
    rates = analyze_groups(groups, query)
    ks = [r.result.k_max for r in rates if r.result is not None and r.result.k_max > 1e-5]
    assert len(ks) == 43
    top = [k for k in ks if abs(k - 1.0) < 1e-3]
    assert len(top) == 22
    # The remaining 21 peak at (2 - sqrt(2)) sqrt(mu) once the damping is tuned.
    third = [r.group_id for r in rates
             if r.result is not None and 1e-5 < r.result.k_max < 0.9]
    assert len(third) == 21
    fine = RateQuery(LINEAR, mu=1.0,
                     grid={"a": tuple(np.linspace(0.2, 4.0, 77)), "b": (0.0,)})
    best = max_rate(groups[third[0]].representative, fine)
    assert best.k_max == pytest.approx(2.0 - math.sqrt(2.0), rel=1e-3)


def numeric_matrices(pair, gamma, t, bindings):
    def mat(entries, dim):
        return np.array([[entries[i][j].subs_gamma(gamma).eval(t, bindings)
                          for j in range(dim)] for i in range(dim)])

    return mat(pair.P, 3), mat(pair.Q, 5)


def test_corner_psd_implies_interior_psd(enumerations):
    rng = random.Random(77)
    pool = enumerations("second-order-hessian") + enumerations("nag")
    mu, L = 1.0, 4.0
    checked = 0
    while checked < 20:
        group = rng.choice(pool)
        pair = group.representative
        t = 10 ** rng.uniform(-1, 2)
        bindings = {"k": rng.uniform(0.0, 2.0), "a": rng.uniform(0.0, 3.0),
                    "b": rng.uniform(-0.5, 1.0), "r": rng.uniform(0.0, 6.0)}
        corner_mats = [numeric_matrices(pair, LINEAR, t, {**bindings, "lambda": lam, "theta": th})
                       for lam in (mu, L) for th in (mu, L)]
        tol = 1e-9 * max(1.0, max(np.abs(m).max() for pm in corner_mats for m in pm))
        if not all(np.linalg.eigvalsh(m).min() >= -tol for pm in corner_mats for m in pm):
            continue
        for _ in range(20):
            lam, th = rng.uniform(mu, L), rng.uniform(mu, L)
            pm, qm = numeric_matrices(pair, LINEAR, t, {**bindings, "lambda": lam, "theta": th})
            assert np.linalg.eigvalsh(pm).min() >= -tol
            assert np.linalg.eigvalsh(qm).min() >= -tol
        checked += 1


def test_analyze_groups_matches_serial(enumerations):
    groups = enumerations("nag")[:4]
    query = RateQuery(LOG, mu=1.0, convex=True, params={"r": 3.0})
    serial = analyze_groups(groups, query, jobs=1)
    parallel = analyze_groups(groups, query, jobs=2)
    for a, b in zip(serial, parallel):
        assert a.group_id == b.group_id
        assert (a.result is None) == (b.result is None)
        if a.result:
            assert a.result.k_max == pytest.approx(b.result.k_max, abs=1e-12)


def test_bootstrap_candidates_and_preconditions(enumerations):
    groups = enumerations("nag")
    query = RateQuery(LOG, mu=1.0, params={"r": 4.5})
    picks = bootstrap_candidates(groups, query)
    assert len(picks) >= 1
    keys = {g.representative.matrix_key() for g in picks}
    assert nag_bootstrap_pair().matrix_key() in keys

    # The fully reduced winner does not qualify: its Q has no (1,3) coupling.
    with pytest.raises(BootstrapPreconditionError):
        bootstrap_rate_check(CATALOG["nag"], nag_winner(), 2.0, query)
    # At r = 3 the claimed rate collapses onto the certified log rate.
    with pytest.raises(BootstrapPreconditionError):
        bootstrap_rate_check(CATALOG["nag"], nag_bootstrap_pair(), 2.0,
                             RateQuery(LOG, mu=1.0, params={"r": 3.0}))
    # ... and past the single-step range the known decay no longer bounds E.
    with pytest.raises(BootstrapPreconditionError):
        bootstrap_rate_check(CATALOG["nag"], nag_bootstrap_pair(), 2.0,
                             RateQuery(LOG, mu=1.0, params={"r": 6.5}))


def test_bootstrap_bounded_at_range_edge():
    # r = 6 is the edge of the single-step range for a known quadratic decay.
    ok = bootstrap_rate_check(CATALOG["nag"], nag_bootstrap_pair(), 2.0,
                              RateQuery(LOG, mu=1.0, params={"r": 6.0}), dt=1e-2)
    assert ok
