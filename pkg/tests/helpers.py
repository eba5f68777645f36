"""Builders shared by the test modules."""

import numpy as np

from pmf_sasv.audio_io import AudioBuffer
from pmf_sasv.labels import Gender, TrialClass
from pmf_sasv.metrics.scores import TandemScoreSet, TrialScoreSet
from pmf_sasv.pmf import Pmf

SAMPLE_RATE = 16000
SMALL_BINS = 256


def random_pmf(rng, bins=SMALL_BINS, zeros=0.0):
    """Random normalized PMF; ``zeros`` is the fraction of bins forced empty."""
    weights = rng.random(bins)
    if zeros:
        weights[rng.random(bins) < zeros] = 0.0
        if weights.sum() == 0:
            weights[0] = 1.0
    return Pmf(bins=weights / weights.sum())


def noise_audio(rng, seconds=0.25, scale=0.2, source_id="noise"):
    samples = np.clip(scale * rng.standard_normal(int(SAMPLE_RATE * seconds)), -1, 1)
    return AudioBuffer(samples=samples, sample_rate_hz=SAMPLE_RATE, source_id=source_id)


def gaussian_scores(rng, n_pos, n_neg, separation, positive=TrialClass.BONAFIDE, negative=TrialClass.SPOOF):
    scores = np.concatenate([rng.normal(separation, 1.0, n_pos), rng.normal(0.0, 1.0, n_neg)])
    classes = [positive.value] * n_pos + [negative.value] * n_neg
    return TrialScoreSet.from_arrays(scores, classes)


def tandem_set(rng, n_tar=60, n_non=40, n_spoof=60, cm_sep=2.0, asv_sep=2.0, genders=None):
    """Gaussian CM and ASV scores; spoofs sit between targets and nontargets on the ASV axis."""
    n = n_tar + n_non + n_spoof
    classes = ([TrialClass.TARGET.value] * n_tar + [TrialClass.NONTARGET.value] * n_non
               + [TrialClass.SPOOF.value] * n_spoof)
    cm = np.concatenate([rng.normal(cm_sep, 1.0, n_tar + n_non), rng.normal(0.0, 1.0, n_spoof)])
    asv = np.concatenate([rng.normal(asv_sep, 1.0, n_tar), rng.normal(0.0, 1.0, n_non),
                          rng.normal(asv_sep / 2, 1.0, n_spoof)])
    if genders is None:
        genders = [Gender.MALE.value if i % 2 == 0 else Gender.FEMALE.value for i in range(n)]
    return TandemScoreSet(cm=cm, asv=asv, classes=classes, genders=genders,
                          trial_ids=[f"T{i:05d}" for i in range(n)])
