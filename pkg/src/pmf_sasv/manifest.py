"""
Manifest - Labeled utterance lists and group selectors.

A manifest is a whitespace-separated text file, one utterance (or ASV trial)
per line:

    trial_id gender class attack_id subset path

``gender`` is m/f/-, ``class`` is target/nontarget/bonafide/spoof, ``attack_id``
is ``-`` for bona fide rows, and ``path`` is relative to the manifest's
directory unless absolute. Lines starting with ``#`` are comments.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .errors import ConfigError, DataError
from .labels import BONAFIDE_CLASSES, Gender, TrialClass

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ("trial_id", "gender", "class", "attack_id", "subset", "path")
SELECTOR_COLUMNS = ("class", "gender", "attack_id", "subset")


class ManifestParseError(DataError):
    """Manifest line cannot be parsed."""

    def __init__(self, path, line_no: int, reason: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {reason}")


class SelectorError(ConfigError):
    """Group selector string is malformed."""


@dataclass(frozen=True)
class ManifestRow:
    trial_id: str
    gender: Gender
    trial_class: TrialClass
    attack_id: str
    subset: str
    path: Path

    @property
    def is_bonafide(self) -> bool:
        return self.trial_class.is_bonafide

    def column(self, name: str) -> str:
        if name == "class":
            return self.trial_class.value
        if name == "gender":
            return self.gender.value
        if name == "attack_id":
            return self.attack_id
        if name == "subset":
            return self.subset
        raise SelectorError(f"Unknown manifest column {name!r}")

    def to_line(self, base_dir: Optional[Path] = None) -> str:
        path = self.path
        if base_dir is not None:
            try:
                path = path.relative_to(base_dir)
            except ValueError:
                pass
        return f"{self.trial_id} {self.gender.code} {self.trial_class.value} {self.attack_id} {self.subset} {path.as_posix()}"


@dataclass(frozen=True)
class GroupSelector:
    """
    Named group of manifest rows, e.g. ``genuine_male=class:bonafide,gender:m``.

    ``class:bonafide`` matches target, nontarget and bonafide rows.
    """
    name: str
    conditions: Tuple[Tuple[str, str], ...]

    @classmethod
    def parse(cls, text: str) -> "GroupSelector":
        if "=" not in text:
            raise SelectorError(f"Group selector {text!r} must look like name=column:value[,column:value]")
        name, _, body = text.partition("=")
        name = name.strip()
        if not name:
            raise SelectorError(f"Group selector {text!r} has an empty name")

        conditions = []
        for part in body.split(","):
            column, sep, value = part.partition(":")
            column = column.strip()
            value = value.strip()
            if not sep or not value:
                raise SelectorError(f"Condition {part!r} in {text!r} must look like column:value")
            if column not in SELECTOR_COLUMNS:
                raise SelectorError(f"Unknown column {column!r} in {text!r}; use one of {', '.join(SELECTOR_COLUMNS)}")
            conditions.append((column, _normalize(column, value)))
        return cls(name=name, conditions=tuple(conditions))

    def matches(self, row: ManifestRow) -> bool:
        for column, value in self.conditions:
            if column == "class" and value == TrialClass.BONAFIDE.value:
                if row.trial_class not in BONAFIDE_CLASSES:
                    return False
            elif row.column(column) != value:
                return False
        return True

    def __str__(self) -> str:
        return f"{self.name}=" + ",".join(f"{c}:{v}" for c, v in self.conditions)


def _normalize(column: str, value: str) -> str:
    try:
        if column == "gender":
            return Gender.from_code(value).value
        if column == "class":
            if value.lower() in ("genuine", "bona_fide", "bona-fide"):
                return TrialClass.BONAFIDE.value
            return TrialClass.parse(value).value
    except ValueError as e:
        raise SelectorError(str(e)) from e
    return value


# Named selectors for the usual groups
DEFAULT_GROUPS = {
    "genuine": "genuine=class:bonafide",
    "spoof": "spoof=class:spoof",
    "male": "male=gender:m",
    "female": "female=gender:f",
    "genuine_male": "genuine_male=class:bonafide,gender:m",
    "genuine_female": "genuine_female=class:bonafide,gender:f",
    "spoof_male": "spoof_male=class:spoof,gender:m",
    "spoof_female": "spoof_female=class:spoof,gender:f",
}


def parse_selector(text: str) -> GroupSelector:
    """Parse a selector; a bare name like ``genuine`` resolves to its default definition."""
    if "=" not in text:
        if text in DEFAULT_GROUPS:
            return GroupSelector.parse(DEFAULT_GROUPS[text])
        if text.upper().startswith("A") and text[1:].isdigit():
            return GroupSelector.parse(f"{text}=attack_id:{text.upper()}")
    return GroupSelector.parse(text)


@dataclass
class Manifest:
    rows: List[ManifestRow] = field(default_factory=list)
    base_dir: Path = Path(".")

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def select(self, selector: GroupSelector) -> "Manifest":
        return Manifest(rows=[r for r in self.rows if selector.matches(r)], base_dir=self.base_dir)

    def subset(self, name: str) -> "Manifest":
        return Manifest(rows=[r for r in self.rows if r.subset == name], base_dir=self.base_dir)

    def subsets(self) -> List[str]:
        return sorted({r.subset for r in self.rows})

    def by_trial_id(self) -> Dict[str, ManifestRow]:
        return {r.trial_id: r for r in self.rows}

    def unique_paths(self) -> List[Path]:
        """Audio paths in first-appearance order."""
        return list(dict.fromkeys(r.path for r in self.rows))

    def counts(self) -> Dict[Tuple[str, str, str], int]:
        """Row counts per (subset, gender, class)."""
        out: Dict[Tuple[str, str, str], int] = {}
        for r in self.rows:
            key = (r.subset, r.gender.value, r.trial_class.value)
            out[key] = out.get(key, 0) + 1
        return out


def read_manifest(path) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Manifest {path} does not exist")
    base_dir = path.parent.resolve()
    rows = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != len(MANIFEST_COLUMNS):
                raise ManifestParseError(path, line_no, f"expected {len(MANIFEST_COLUMNS)} columns, found {len(parts)}")
            trial_id, gender, trial_class, attack_id, subset, audio = parts
            if trial_id in seen:
                raise ManifestParseError(path, line_no, f"duplicate trial_id {trial_id!r}")
            seen.add(trial_id)
            try:
                row = ManifestRow(
                    trial_id=trial_id,
                    gender=Gender.from_code(gender),
                    trial_class=TrialClass.parse(trial_class),
                    attack_id=attack_id,
                    subset=subset,
                    path=Path(audio) if Path(audio).is_absolute() else base_dir / audio,
                )
            except ValueError as e:
                raise ManifestParseError(path, line_no, str(e)) from e
            rows.append(row)
    logger.debug(f"Read {len(rows)} manifest rows from {path}")
    return Manifest(rows=rows, base_dir=base_dir)


def write_manifest(manifest: Manifest, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base = path.parent.resolve()
    lines = ["# " + " ".join(MANIFEST_COLUMNS)]
    lines.extend(r.to_line(base) for r in manifest.rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# ASVspoof 2019 LA layout

def read_speaker_genders(path) -> Dict[str, Gender]:
    """Two-column ``speaker m|f`` file."""
    genders = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != 2:
                raise ManifestParseError(path, line_no, "expected 'speaker gender'")
            try:
                genders[parts[0]] = Gender.from_code(parts[1])
            except ValueError as e:
                raise ManifestParseError(path, line_no, str(e)) from e
    return genders


def _audio_path(audio_dir: Path, utterance: str) -> Path:
    wav = audio_dir / f"{utterance}.wav"
    if wav.exists() or not (audio_dir / f"{utterance}.flac").exists():
        return wav
    raise DataError(
        f"{utterance}: only .flac audio found in {audio_dir}; convert to 16-bit PCM WAV first"
    )


def from_asvspoof2019(
    cm_protocol,
    audio_dir,
    subset: str,
    asv_trials=None,
    speaker_genders: Optional[Dict[str, Gender]] = None,
    default_gender: Gender = Gender.UNKNOWN,
) -> Manifest:
    """
    Build a manifest from ASVspoof 2019 LA protocol files.

    Args:
        cm_protocol: CM protocol (``speaker utterance - attack key``)
        audio_dir: Directory holding ``<utterance>.wav``
        subset: Subset name written to every row (train/dev/eval)
        asv_trials: Optional ASV trial list (``speaker utterance source key``);
            when given, one row per ASV trial with trial_id ``speaker-utterance``
        speaker_genders: Optional speaker -> gender map
        default_gender: Gender of speakers missing from the map (the ASV
            lists are split per gender, so callers pass the list's gender)
    """
    audio_dir = Path(audio_dir)
    speaker_genders = speaker_genders or {}
    attacks: Dict[str, Tuple[str, str]] = {}

    rows = []
    with open(cm_protocol, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 5:
                raise ManifestParseError(cm_protocol, line_no, "expected 5 CM protocol columns")
            speaker, utterance, _, attack, key = parts
            attacks[utterance] = (speaker, attack)
            if asv_trials is None:
                trial_class = TrialClass.BONAFIDE if key == "bonafide" else TrialClass.SPOOF
                rows.append(ManifestRow(
                    trial_id=utterance,
                    gender=speaker_genders.get(speaker, default_gender),
                    trial_class=trial_class,
                    attack_id="-" if trial_class is TrialClass.BONAFIDE else attack,
                    subset=subset,
                    path=_audio_path(audio_dir, utterance),
                ))

    if asv_trials is not None:
        with open(asv_trials, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 4:
                    raise ManifestParseError(asv_trials, line_no, "expected 4 ASV trial columns")
                speaker, utterance, source, key = parts
                try:
                    trial_class = TrialClass.parse(key)
                except ValueError as e:
                    raise ManifestParseError(asv_trials, line_no, str(e)) from e
                attack = source if trial_class is TrialClass.SPOOF else "-"
                if utterance in attacks and trial_class is TrialClass.SPOOF:
                    attack = attacks[utterance][1]
                rows.append(ManifestRow(
                    trial_id=f"{speaker}-{utterance}",
                    gender=speaker_genders.get(speaker, default_gender),
                    trial_class=trial_class,
                    attack_id=attack,
                    subset=subset,
                    path=_audio_path(audio_dir, utterance),
                ))

    logger.info(f"ASVspoof 2019 {subset}: {len(rows)} rows from {cm_protocol}")
    return Manifest(rows=rows, base_dir=audio_dir)

