"""
Tandem - Detection costs of a CM gate followed by an ASV system.

Three families are implemented:

* unconstrained t-DCF over both thresholds (tau_cm, tau_asv)
* ASV-constrained t-DCF with the ASV threshold fixed, written as
  C0 + C1 * P_miss_cm + C2 * P_fa_cm
* a-DCF on gated scores (s = s_asv if s_cm >= tau_cm else -inf)

CM rates use bona fide (target and nontarget) against spoof CM scores. ASV
rates use target, nontarget and spoof ASV scores; the spoof false-accept rate
is computed on every spoof trial.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..errors import NumericError
from ..labels import BONAFIDE_CLASSES, Gender, TrialClass
from .costs import TandemCostModel
from .rates import (
    NONTARGET,
    SPOOF,
    TARGET,
    eer_from_arrays,
    false_alarm_rates,
    miss_rates,
    split_classes,
    sweep_thresholds,
)
from .scores import EmptyClassError, MissingSpoofTrialsError, TandemScoreSet, TrialScoreSet

logger = logging.getLogger(__name__)

DISCREPANCY_TOLERANCE = 1e-12


class ZeroDefaultCostError(NumericError):
    """Normalization denominator is not positive."""


class NegativeC1Error(NumericError):
    """C1 < 0: the ASV operating point is degenerate (worse than chance)."""


@dataclass(frozen=True)
class TandemTerms:
    """Error probabilities of the unconstrained t-DCF at one threshold pair."""
    p_a: float
    p_b: float
    p_c: float
    p_d: float
    value: float


@dataclass(frozen=True)
class AsvRates:
    p_miss: float
    p_fa: float
    p_fa_spoof: float


@dataclass(frozen=True)
class TandemConstants:
    c0: float
    c1: float
    c2: float
    c1_printed: float

    @property
    def default_cost(self) -> float:
        return self.c0 + min(self.c1, self.c2)


@dataclass(frozen=True)
class TdcfMinimum:
    value: float
    tau_cm: float
    tau_asv: float


def limit_thresholds(thresholds: np.ndarray, max_count: Optional[int]) -> np.ndarray:
    """Evenly subsample a sorted threshold grid to at most ``max_count`` points, keeping both ends."""
    if max_count is None or thresholds.size <= max_count:
        return thresholds
    idx = np.unique(np.round(np.linspace(0, thresholds.size - 1, max(max_count, 2))).astype(np.int64))
    return thresholds[idx]


def _cm_arrays(cm: TrialScoreSet) -> Tuple[np.ndarray, np.ndarray]:
    bonafide = cm.class_scores(BONAFIDE_CLASSES)
    spoof = cm.class_scores(SPOOF)
    if bonafide.size == 0:
        raise EmptyClassError("CM scores contain no bona fide trials")
    if spoof.size == 0:
        raise MissingSpoofTrialsError("CM scores contain no spoof trials")
    return bonafide, spoof


def _asv_arrays(asv: TrialScoreSet) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    targets, nontargets = split_classes(asv, TARGET, NONTARGET)
    spoofs = asv.class_scores(SPOOF)
    if spoofs.size == 0:
        raise MissingSpoofTrialsError("ASV scores contain no spoof trials")
    return targets, nontargets, spoofs


def _normalizer(cost: TandemCostModel) -> float:
    default = cost.default_cost
    if default <= 0:
        raise ZeroDefaultCostError(f"Default-system cost is {default}; cannot normalize")
    return default


# Unconstrained t-DCF

def tandem_terms(cm: TrialScoreSet, asv: TrialScoreSet, tau_cm: float, tau_asv: float,
                 cost: TandemCostModel) -> TandemTerms:
    bonafide, spoof = _cm_arrays(cm)
    targets, nontargets, spoofs = _asv_arrays(asv)

    p_miss_cm = float(miss_rates(bonafide, [tau_cm])[0])
    p_fa_cm = float(false_alarm_rates(spoof, [tau_cm])[0])
    p_miss_asv = float(miss_rates(targets, [tau_asv])[0])
    p_fa_asv = float(false_alarm_rates(nontargets, [tau_asv])[0])
    p_fa_spoof_asv = float(false_alarm_rates(spoofs, [tau_asv])[0])

    p_a = (1.0 - p_miss_cm) * p_miss_asv
    p_b = (1.0 - p_miss_cm) * p_fa_asv
    p_c = p_fa_cm * p_fa_spoof_asv
    p_d = p_miss_cm
    value = (cost.c_miss * cost.pi_tar * (p_a + p_d)
             + cost.c_fa * cost.pi_non * p_b
             + cost.c_fa_spoof * cost.pi_spoof * p_c)
    return TandemTerms(p_a=p_a, p_b=p_b, p_c=p_c, p_d=p_d, value=value)


def tdcf_unconstrained(cm: TrialScoreSet, asv: TrialScoreSet, tau_cm: float, tau_asv: float,
                       cost: TandemCostModel) -> float:
    """Unconstrained tandem cost at (tau_cm, tau_asv)."""
    return tandem_terms(cm, asv, tau_cm, tau_asv, cost).value


def tdcf_unconstrained_normalized(cm: TrialScoreSet, asv: TrialScoreSet, tau_cm: float, tau_asv: float,
                                  cost: TandemCostModel) -> float:
    """Unconstrained cost divided by min(C_fa pi_non + C_fa,spoof pi_spoof, C_miss pi_tar)."""
    normalizer = _normalizer(cost)
    return tdcf_unconstrained(cm, asv, tau_cm, tau_asv, cost) / normalizer


def tdcf_surface(cm: TrialScoreSet, asv: TrialScoreSet, cost: TandemCostModel,
                 normalized: bool = True, max_thresholds: Optional[int] = None):
    """
    Unconstrained t-DCF over the (tau_cm, tau_asv) grid.

    Returns:
        (cm_thresholds, asv_thresholds, matrix) with matrix[i, j] at
        (cm_thresholds[i], asv_thresholds[j])
    """
    bonafide, spoof = _cm_arrays(cm)
    targets, nontargets, spoofs = _asv_arrays(asv)
    cm_grid = limit_thresholds(sweep_thresholds(bonafide, spoof), max_thresholds)
    asv_grid = limit_thresholds(sweep_thresholds(targets, nontargets, spoofs), max_thresholds)

    p_miss_cm = miss_rates(bonafide, cm_grid)[:, None]
    p_fa_cm = false_alarm_rates(spoof, cm_grid)[:, None]
    p_miss_asv = miss_rates(targets, asv_grid)[None, :]
    p_fa_asv = false_alarm_rates(nontargets, asv_grid)[None, :]
    p_fa_spoof_asv = false_alarm_rates(spoofs, asv_grid)[None, :]

    matrix = (cost.c_miss * cost.pi_tar * ((1.0 - p_miss_cm) * p_miss_asv + p_miss_cm)
              + cost.c_fa * cost.pi_non * (1.0 - p_miss_cm) * p_fa_asv
              + cost.c_fa_spoof * cost.pi_spoof * p_fa_cm * p_fa_spoof_asv)
    if normalized:
        matrix = matrix / _normalizer(cost)
    return cm_grid, asv_grid, matrix


def min_tdcf_unconstrained(cm: TrialScoreSet, asv: TrialScoreSet, cost: TandemCostModel,
                           normalized: bool = True, max_thresholds: Optional[int] = None) -> TdcfMinimum:
    cm_grid, asv_grid, matrix = tdcf_surface(cm, asv, cost, normalized, max_thresholds)
    i, j = np.unravel_index(int(np.argmin(matrix)), matrix.shape)
    return TdcfMinimum(value=float(matrix[i, j]), tau_cm=float(cm_grid[i]), tau_asv=float(asv_grid[j]))


# ASV-constrained t-DCF

def asv_rates_at(asv: TrialScoreSet, tau_asv: float) -> AsvRates:
    targets, nontargets, spoofs = _asv_arrays(asv)
    return AsvRates(
        p_miss=float(miss_rates(targets, [tau_asv])[0]),
        p_fa=float(false_alarm_rates(nontargets, [tau_asv])[0]),
        p_fa_spoof=float(false_alarm_rates(spoofs, [tau_asv])[0]),
    )


def asv_rates_at_eer(asv: TrialScoreSet) -> Tuple[AsvRates, float]:
    """ASV rates at the target/nontarget EER threshold, and that threshold."""
    targets, nontargets, _ = _asv_arrays(asv)
    _, tau = eer_from_arrays(targets, nontargets)
    return asv_rates_at(asv, tau), tau


def asv_rates_with_thresholds(asv: TrialScoreSet, thresholds: Mapping[Gender, float]) -> AsvRates:
    """ASV rates when each trial is judged at its own gender's threshold."""
    _asv_arrays(asv)
    tau = np.array([thresholds[Gender(g)] for g in asv.genders], dtype=np.float64)
    accepted = asv.scores >= tau

    def rate(classes, accept: bool) -> float:
        mask = asv.mask(classes)
        hits = accepted[mask] if accept else ~accepted[mask]
        return float(np.count_nonzero(hits) / np.count_nonzero(mask))

    return AsvRates(p_miss=rate(TARGET, False), p_fa=rate(NONTARGET, True), p_fa_spoof=rate(SPOOF, True))


def tandem_constants(asv_rates: AsvRates, cost: TandemCostModel) -> TandemConstants:
    """
    C0, C1, C2 of the linear constrained form.

    C1 is derived from the unconstrained expansion so both forms agree. The
    variant with the opposite sign on the ASV false-alarm term is kept as
    ``c1_printed`` and a warning is logged when the two differ.
    """
    miss_term = cost.pi_tar * cost.c_miss * asv_rates.p_miss
    fa_term = cost.pi_non * cost.c_fa * asv_rates.p_fa
    c0 = miss_term + fa_term
    c1 = cost.pi_tar * cost.c_miss - (miss_term + fa_term)
    c1_printed = cost.pi_tar * cost.c_miss - (miss_term - fa_term)
    c2 = cost.c_fa_spoof * cost.pi_spoof * asv_rates.p_fa_spoof

    if abs(c1 - c1_printed) > DISCREPANCY_TOLERANCE:
        logger.warning(
            f"C1 from the unconstrained expansion ({c1:.6g}) differs from the alternative "
            f"sign convention ({c1_printed:.6g}); using {c1:.6g}"
        )
    return TandemConstants(c0=c0, c1=c1, c2=c2, c1_printed=c1_printed)


def _checked_constants(asv_rates: AsvRates, cost: TandemCostModel) -> TandemConstants:
    constants = tandem_constants(asv_rates, cost)
    if constants.c1 < 0:
        raise NegativeC1Error(
            f"C1 = {constants.c1:.6g} < 0 (ASV miss {asv_rates.p_miss:.4f}, fa {asv_rates.p_fa:.4f}); "
            "the ASV system is degenerate"
        )
    return constants


def tdcf_asv_constrained(cm: TrialScoreSet, asv_rates: AsvRates, tau_cm: float,
                         cost: TandemCostModel, normalized: bool = False) -> float:
    """C0 + C1 P_miss_cm(tau_cm) + C2 P_fa_cm(tau_cm), optionally over C0 + min(C1, C2)."""
    constants = _checked_constants(asv_rates, cost)
    bonafide, spoof = _cm_arrays(cm)
    p_miss_cm = float(miss_rates(bonafide, [tau_cm])[0])
    p_fa_cm = float(false_alarm_rates(spoof, [tau_cm])[0])
    value = constants.c0 + constants.c1 * p_miss_cm + constants.c2 * p_fa_cm
    if normalized:
        value /= _constrained_normalizer(constants)
    return value


def _constrained_normalizer(constants: TandemConstants) -> float:
    default = constants.default_cost
    if default <= 0:
        raise ZeroDefaultCostError(f"C0 + min(C1, C2) = {default}; cannot normalize")
    return default


def min_tdcf_asv_constrained(cm: TrialScoreSet, asv_rates: AsvRates, cost: TandemCostModel,
                             normalized: bool = True) -> Tuple[float, float]:
    """(min over tau_cm, minimizing tau_cm)."""
    constants = _checked_constants(asv_rates, cost)
    bonafide, spoof = _cm_arrays(cm)
    grid = sweep_thresholds(bonafide, spoof)
    curve = constants.c0 + constants.c1 * miss_rates(bonafide, grid) + constants.c2 * false_alarm_rates(spoof, grid)
    if normalized:
        curve = curve / _constrained_normalizer(constants)
    i = int(np.argmin(curve))
    return float(curve[i]), float(grid[i])


# a-DCF

def gate_scores(tandem: TandemScoreSet, tau_cm: float) -> np.ndarray:
    """s_asv where s_cm >= tau_cm, -inf elsewhere."""
    return np.where(tandem.cm >= tau_cm, tandem.asv, -np.inf)


def _adcf_masks(tandem: TandemScoreSet):
    masks = (tandem.mask(TARGET), tandem.mask(NONTARGET), tandem.mask(SPOOF))
    if not masks[0].any() or not masks[1].any():
        raise EmptyClassError("Tandem scores need target and nontarget trials")
    if not masks[2].any():
        raise MissingSpoofTrialsError("Tandem scores contain no spoof trials")
    return masks


def adcf(tandem: TandemScoreSet, tau_cm: float, tau: float, cost: TandemCostModel,
         normalized: bool = False) -> float:
    """Architecture-agnostic DCF of gated scores at ASV threshold ``tau``."""
    tar, non, spf = _adcf_masks(tandem)
    gated = gate_scores(tandem, tau_cm)
    p_miss = float(np.mean(gated[tar] < tau))
    p_fa_non = float(np.mean(gated[non] >= tau))
    p_fa_spf = float(np.mean(gated[spf] >= tau))
    value = cost.c_miss * cost.pi_tar * p_miss + cost.c_fa * cost.pi_non * p_fa_non \
        + cost.c_fa_spoof * cost.pi_spoof * p_fa_spf
    if normalized:
        value /= _normalizer(cost)
    return value


def asv_spoof_aware_dcf(asv: TrialScoreSet, tau: float, cost: TandemCostModel) -> float:
    """Ungated three-class ASV cost at ``tau``."""
    targets, nontargets, spoofs = _asv_arrays(asv)
    return (cost.c_miss * cost.pi_tar * float(miss_rates(targets, [tau])[0])
            + cost.c_fa * cost.pi_non * float(false_alarm_rates(nontargets, [tau])[0])
            + cost.c_fa_spoof * cost.pi_spoof * float(false_alarm_rates(spoofs, [tau])[0]))


def adcf_thresholds(tandem: TandemScoreSet) -> np.ndarray:
    """ASV-axis thresholds: the minimum score, midpoints, +inf (never -inf, which would accept gated trials)."""
    grid = sweep_thresholds(tandem.asv)
    grid[0] = float(np.min(tandem.asv))
    return grid


def min_adcf(tandem: TandemScoreSet, cost: TandemCostModel, normalized: bool = True,
             max_thresholds: Optional[int] = None) -> TdcfMinimum:
    """Joint minimum over (tau_cm, tau)."""
    tar, non, spf = _adcf_masks(tandem)
    counts = [int(m.sum()) for m in (tar, non, spf)]
    cm_grid = limit_thresholds(sweep_thresholds(tandem.cm), max_thresholds)
    asv_grid = limit_thresholds(adcf_thresholds(tandem), max_thresholds)

    best = TdcfMinimum(value=np.inf, tau_cm=np.nan, tau_asv=np.nan)
    for tau_cm in cm_grid:
        passed = tandem.cm >= tau_cm
        accepted = []
        for mask in (tar, non, spf):
            kept = np.sort(tandem.asv[mask & passed])
            accepted.append(kept.size - np.searchsorted(kept, asv_grid, side="left"))
        curve = (cost.c_miss * cost.pi_tar * (counts[0] - accepted[0]) / counts[0]
                 + cost.c_fa * cost.pi_non * accepted[1] / counts[1]
                 + cost.c_fa_spoof * cost.pi_spoof * accepted[2] / counts[2])
        j = int(np.argmin(curve))
        if curve[j] < best.value:
            best = TdcfMinimum(value=float(curve[j]), tau_cm=float(tau_cm), tau_asv=float(asv_grid[j]))

    if normalized:
        best = TdcfMinimum(value=best.value / _normalizer(cost), tau_cm=best.tau_cm, tau_asv=best.tau_asv)
    return best


# Per-attack breakdown

@dataclass(frozen=True)
class AttackRow:
    attack_id: str
    n_trials: int
    cm_eer: float
    asv_spoof_fa: float


def attack_breakdown(cm: TrialScoreSet, attacks: Mapping[str, str],
                     asv: Optional[TrialScoreSet] = None,
                     asv_threshold: Optional[float] = None) -> List[AttackRow]:
    """
    CM EER of bona fide against each attack, and the ASV spoof false-accept
    rate of that attack at ``asv_threshold``.
    """
    bonafide = cm.class_scores(BONAFIDE_CLASSES)
    if bonafide.size == 0:
        raise EmptyClassError("CM scores contain no bona fide trials")
    spoof_idx = np.flatnonzero(cm.mask(SPOOF))
    by_attack: Dict[str, List[int]] = {}
    for i in spoof_idx:
        by_attack.setdefault(attacks.get(cm.trial_ids[i], "-"), []).append(int(i))

    asv_lookup = asv.index_of() if asv is not None else {}
    rows = []
    for attack_id in sorted(by_attack):
        idx = by_attack[attack_id]
        value, _ = eer_from_arrays(bonafide, cm.scores[idx])
        spoof_fa = float("nan")
        if asv is not None and asv_threshold is not None:
            asv_scores = np.array([asv.scores[asv_lookup[t]] for t in cm.trial_ids[idx] if t in asv_lookup])
            if asv_scores.size:
                spoof_fa = float(np.mean(asv_scores >= asv_threshold))
        rows.append(AttackRow(attack_id=attack_id, n_trials=len(idx), cm_eer=value, asv_spoof_fa=spoof_fa))
    return rows

