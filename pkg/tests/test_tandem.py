"""Tandem detection costs checked against brute-force threshold searches."""

import numpy as np
import pytest

from pmf_sasv.labels import Gender
from pmf_sasv.metrics.costs import TandemCostModel
from pmf_sasv.metrics.scores import MissingSpoofTrialsError, TandemScoreSet
from pmf_sasv.metrics.tandem import (
    AsvRates,
    NegativeC1Error,
    adcf,
    asv_rates_at,
    asv_rates_at_eer,
    asv_rates_with_thresholds,
    asv_spoof_aware_dcf,
    attack_breakdown,
    limit_thresholds,
    min_adcf,
    min_tdcf_asv_constrained,
    min_tdcf_unconstrained,
    tandem_constants,
    tdcf_asv_constrained,
    tdcf_surface,
    tdcf_unconstrained,
    tdcf_unconstrained_normalized,
)

from helpers import tandem_set

COST = TandemCostModel()


@pytest.fixture
def small(rng):
    return tandem_set(rng, n_tar=10, n_non=8, n_spoof=9)


def candidates(values):
    return np.append(np.unique(values), np.inf)


def test_default_cost():
    assert COST.default_cost == pytest.approx(min(10 * 0.0095 + 10 * 0.05, 0.9405))


def test_unconstrained_minimum_matches_brute_force(small):
    cm, asv = small.cm_set(), small.asv_set()
    expected = min(
        tdcf_unconstrained(cm, asv, a, b, COST)
        for a in candidates(small.cm) for b in candidates(small.asv)
    )
    found = min_tdcf_unconstrained(cm, asv, COST, normalized=False)
    assert found.value == pytest.approx(expected)
    assert tdcf_unconstrained(cm, asv, found.tau_cm, found.tau_asv, COST) == pytest.approx(found.value)


def test_normalized_surface_divides_by_default_cost(small):
    cm, asv = small.cm_set(), small.asv_set()
    raw = tdcf_surface(cm, asv, COST, normalized=False)[2]
    norm = tdcf_surface(cm, asv, COST, normalized=True)[2]
    np.testing.assert_allclose(norm, raw / COST.default_cost)
    assert tdcf_unconstrained_normalized(cm, asv, 0.0, 0.0, COST) == pytest.approx(
        tdcf_unconstrained(cm, asv, 0.0, 0.0, COST) / COST.default_cost)


def test_accept_all_cm_reduces_to_asv_cost(small):
    cm, asv = small.cm_set(), small.asv_set()
    rates = asv_rates_at(asv, 1.0)
    expected = (COST.pi_tar * rates.p_miss + COST.c_fa * COST.pi_non * rates.p_fa
                + COST.c_fa_spoof * COST.pi_spoof * rates.p_fa_spoof)
    assert tdcf_unconstrained(cm, asv, -np.inf, 1.0, COST) == pytest.approx(expected)
    assert tdcf_unconstrained(cm, asv, np.inf, 1.0, COST) == pytest.approx(COST.pi_tar)


def test_constrained_form_agrees_with_unconstrained(small):
    cm, asv = small.cm_set(), small.asv_set()
    rates, tau_asv = asv_rates_at_eer(asv)
    for tau_cm in candidates(small.cm)[::3]:
        assert tdcf_asv_constrained(cm, rates, tau_cm, COST) == pytest.approx(
            tdcf_unconstrained(cm, asv, tau_cm, tau_asv, COST))


def test_constrained_minimum_is_not_below_joint_minimum(small):
    cm, asv = small.cm_set(), small.asv_set()
    rates, _ = asv_rates_at_eer(asv)
    constrained, _ = min_tdcf_asv_constrained(cm, rates, COST, normalized=False)
    assert constrained >= min_tdcf_unconstrained(cm, asv, COST, normalized=False).value - 1e-12


def test_constrained_normalized_lies_in_unit_interval(rng):
    t = tandem_set(rng, cm_sep=3.0, asv_sep=3.0)
    rates, _ = asv_rates_at_eer(t.asv_set())
    value, _ = min_tdcf_asv_constrained(t.cm_set(), rates, COST)
    assert 0.0 <= value <= 1.0 + 1e-12


def test_constants():
    rates = AsvRates(p_miss=0.1, p_fa=0.2, p_fa_spoof=0.5)
    c = tandem_constants(rates, COST)
    assert c.c0 == pytest.approx(0.9405 * 0.1 + 0.0095 * 10 * 0.2)
    assert c.c1 == pytest.approx(0.9405 - c.c0)
    assert c.c2 == pytest.approx(10 * 0.05 * 0.5)


def test_negative_c1(small):
    with pytest.raises(NegativeC1Error):
        min_tdcf_asv_constrained(small.cm_set(), AsvRates(p_miss=1.0, p_fa=1.0, p_fa_spoof=1.0), COST)


def test_adcf_minimum_matches_brute_force(small):
    expected = min(
        adcf(small, a, b, COST)
        for a in candidates(small.cm) for b in candidates(small.asv)
    )
    found = min_adcf(small, COST, normalized=False)
    assert found.value == pytest.approx(expected)
    assert adcf(small, found.tau_cm, found.tau_asv, COST) == pytest.approx(found.value)


def test_open_gate_is_spoof_aware_asv_cost(small):
    for tau in candidates(small.asv):
        assert adcf(small, -np.inf, tau, COST) == pytest.approx(asv_spoof_aware_dcf(small.asv_set(), tau, COST))


def test_limited_grid_keeps_ends():
    grid = np.concatenate([[-np.inf], np.arange(100.0), [np.inf]])
    limited = limit_thresholds(grid, 10)
    assert limited.size <= 10
    assert limited[0] == -np.inf and limited[-1] == np.inf


def test_limited_grid_bounds_minimum_from_above(rng):
    t = tandem_set(rng)
    full = min_tdcf_unconstrained(t.cm_set(), t.asv_set(), COST)
    coarse = min_tdcf_unconstrained(t.cm_set(), t.asv_set(), COST, max_thresholds=20)
    assert coarse.value >= full.value - 1e-12


def test_gender_thresholds():
    t = TandemScoreSet(
        cm=np.zeros(6),
        asv=[1.0, 0.0, 0.5, 3.0, 2.0, 2.5],
        classes=["target", "nontarget", "spoof"] * 2,
        genders=["male"] * 3 + ["female"] * 3,
        trial_ids=[f"t{i}" for i in range(6)],
    )
    rates = asv_rates_with_thresholds(t.asv_set(), {Gender.MALE: 0.5, Gender.FEMALE: 2.5})
    assert rates == AsvRates(p_miss=0.0, p_fa=0.0, p_fa_spoof=1.0)


def test_spoof_trials_required(rng):
    t = tandem_set(rng, n_spoof=0)
    with pytest.raises(MissingSpoofTrialsError):
        min_tdcf_unconstrained(t.cm_set(), t.asv_set(), COST)


def test_attack_breakdown(rng):
    t = tandem_set(rng, n_spoof=20)
    spoof_ids = [tid for tid, c in zip(t.trial_ids, t.classes) if c == "spoof"]
    attacks = {tid: ("A01" if i % 2 else "A02") for i, tid in enumerate(spoof_ids)}
    rows = attack_breakdown(t.cm_set(), attacks, t.asv_set(), asv_threshold=0.0)
    assert [r.attack_id for r in rows] == ["A01", "A02"]
    assert sum(r.n_trials for r in rows) == 20
    assert all(0.0 <= r.cm_eer <= 1.0 and 0.0 <= r.asv_spoof_fa <= 1.0 for r in rows)
