"""
Synth - Seeded synthetic speech-like corpus with a manifest and ASV scores.

Utterances are built from a glottal-like pulse train at a gender-specific f0
passed through a one-pole spectral tilt, plus an excitation noise:

- genuine: strong pulses and light Laplacian noise
- spoof: weaker pulses buried in Gaussian noise with a flatter tilt, then an
  attack-specific distortion (A01 soft clipping, A02 coarse quantization,
  A03 moving-average smoothing)

With ``overlapping = true`` spoofs use the genuine recipe and carry no
distortion, so countermeasures cannot separate the classes.

Every utterance draws from ``default_rng([seed, index])`` so the corpus is
identical for a given seed and counts.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.signal import lfilter

from .audio_io import write_wav
from .labels import Gender, TrialClass
from .manifest import Manifest, ManifestRow, write_manifest
from .metrics.scores import TrialScoreSet, write_score_file

logger = logging.getLogger(__name__)

# f0 in Hz and tilt pole per gender
VOICE = {
    Gender.MALE: (120.0, 0.9),
    Gender.FEMALE: (220.0, 0.6),
}
SPOOF_TILT = 0.3
GENUINE_NOISE = 0.3
SPOOF_PULSE_GAIN = 0.5
TARGET_RMS = 0.1
PEAK_LIMIT = 0.99

# ASV score distributions (mean, std) per class
ASV_SCORE_MODEL = {
    TrialClass.TARGET: (0.7, 0.1),
    TrialClass.NONTARGET: (0.1, 0.1),
    TrialClass.SPOOF: (0.5, 0.15),
}


class SynthConfig(BaseModel):
    """``[synth]`` config section; counts are per gender and subset."""
    seed: Optional[int] = None
    sample_rate_hz: int = Field(16000, ge=8000)
    subsets: List[str] = Field(default_factory=lambda: ["train", "dev", "eval"])
    n_target: int = Field(30, ge=0)
    n_nontarget: int = Field(15, ge=0)
    n_spoof: int = Field(30, ge=0)
    attacks: List[str] = Field(default_factory=lambda: ["A01", "A02", "A03"])
    min_duration_s: float = Field(0.8, gt=0)
    max_duration_s: float = Field(1.2, gt=0)
    overlapping: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.min_duration_s > self.max_duration_s:
            raise ValueError("min_duration_s must not exceed max_duration_s")
        if self.n_spoof and not self.attacks:
            raise ValueError("spoof utterances need at least one attack id")
        return self


@dataclass(frozen=True)
class SynthResult:
    manifest: Manifest
    manifest_path: Path
    asv_scores_path: Path


def pulse_train(n: int, f0: float, sample_rate_hz: int, rng: np.random.Generator) -> np.ndarray:
    """Unit impulses every 1/f0 seconds with 2% period jitter."""
    out = np.zeros(n)
    period = sample_rate_hz / f0
    t = rng.uniform(0.0, period)
    while t < n:
        out[int(t)] = 1.0
        t += period * (1.0 + 0.02 * rng.standard_normal())
    return out


def apply_attack(x: np.ndarray, attack_id: str) -> np.ndarray:
    """Attack-specific distortion; unknown ids (beyond A03) cycle through the three."""
    kind = (int(attack_id[1:]) - 1) % 3 if attack_id[1:].isdigit() else 0
    if kind == 0:
        return np.tanh(3.0 * x) / np.tanh(3.0)
    if kind == 1:
        step = 2.0 / 64
        return np.round(x / step) * step
    return np.convolve(x, np.ones(3) / 3.0, mode="same")


def _normalize(x: np.ndarray) -> np.ndarray:
    rms = float(np.sqrt(np.mean(x * x)))
    if rms > 0:
        x = x * (TARGET_RMS / rms)
    return np.clip(x, -PEAK_LIMIT, PEAK_LIMIT)


def synth_utterance(
    gender: Gender,
    spoof: bool,
    attack_id: str,
    config: SynthConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    fs = config.sample_rate_hz
    n = int(round(rng.uniform(config.min_duration_s, config.max_duration_s) * fs))
    f0, pole = VOICE[gender]
    f0 *= rng.uniform(0.9, 1.1)
    pulses = pulse_train(n, f0, fs, rng)

    if spoof and not config.overlapping:
        voiced = lfilter([1.0], [1.0, -pole], SPOOF_PULSE_GAIN * pulses)
        noise = lfilter([1.0], [1.0, -SPOOF_TILT], rng.standard_normal(n))
        scale = float(np.sqrt(np.mean(voiced * voiced))) or 1.0
        x = _normalize(voiced + scale * noise)
        return apply_attack(x, attack_id)

    voiced = lfilter([1.0], [1.0, -pole], pulses)
    scale = float(np.sqrt(np.mean(voiced * voiced))) or 1.0
    noise = GENUINE_NOISE * scale * rng.laplace(0.0, 1.0 / np.sqrt(2.0), n)
    return _normalize(voiced + noise)


def _plan(config: SynthConfig):
    """(subset, gender, class, attack_id) for every utterance in generation order."""
    plan = []
    for subset in config.subsets:
        for gender in (Gender.MALE, Gender.FEMALE):
            plan += [(subset, gender, TrialClass.TARGET, "-")] * config.n_target
            plan += [(subset, gender, TrialClass.NONTARGET, "-")] * config.n_nontarget
            plan += [(subset, gender, TrialClass.SPOOF, config.attacks[i % len(config.attacks)])
                     for i in range(config.n_spoof)]
    return plan


def generate_corpus(out_dir, config: Optional[SynthConfig] = None) -> SynthResult:
    """
    Write ``wav/*.wav``, ``manifest.txt`` and ``asv_scores.txt`` under ``out_dir``.

    Args:
        out_dir: Output directory (created if missing)
        config: Corpus settings

    Returns:
        SynthResult with the manifest and the written paths
    """
    config = config or SynthConfig()
    out_dir = Path(out_dir)
    wav_dir = out_dir / "wav"
    wav_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    asv_scores = []
    counts: Dict[str, int] = {}
    for index, (subset, gender, trial_class, attack_id) in enumerate(_plan(config)):
        rng = np.random.default_rng([config.seed or 0, index])
        spoof = trial_class is TrialClass.SPOOF
        samples = synth_utterance(gender, spoof, attack_id, config, rng)
        trial_id = f"SYN_{subset.upper()}_{index:06d}"
        path = write_wav(wav_dir / f"{trial_id}.wav", samples, config.sample_rate_hz)
        rows.append(ManifestRow(trial_id=trial_id, gender=gender, trial_class=trial_class,
                                attack_id=attack_id, subset=subset, path=path.resolve()))
        mean, std = ASV_SCORE_MODEL[trial_class]
        asv_scores.append(mean + std * rng.standard_normal())
        counts[trial_class.value] = counts.get(trial_class.value, 0) + 1

    manifest = Manifest(rows=rows, base_dir=out_dir.resolve())
    manifest_path = write_manifest(manifest, out_dir / "manifest.txt")
    asv = TrialScoreSet(
        scores=np.array(asv_scores),
        classes=[r.trial_class.value for r in rows],
        genders=[r.gender.value for r in rows],
        trial_ids=[r.trial_id for r in rows],
    )
    asv_path = write_score_file(asv, out_dir / "asv_scores.txt")

    summary = ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    mode = "overlapping" if config.overlapping else "separated"
    logger.info(f"Synthesized {len(rows)} {mode} utterances in {out_dir} ({summary})")
    return SynthResult(manifest=manifest, manifest_path=manifest_path, asv_scores_path=asv_path)
