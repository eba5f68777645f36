"""
Labels - Trial classes and speaker genders shared across manifests and score files.

Text codes follow the score-file format: gender ``m``/``f``/``-`` and class
``target``/``nontarget``/``bonafide``/``spoof``.
"""

from enum import Enum


class Gender(str, Enum):
    MALE = "male"
    FEMALE = "female"
    UNKNOWN = "unknown"

    @property
    def code(self) -> str:
        return {"male": "m", "female": "f", "unknown": "-"}[self.value]

    @classmethod
    def from_code(cls, text: str) -> "Gender":
        """Parse ``m``/``f``/``-`` or a full gender name."""
        key = text.strip().lower()
        mapping = {
            "m": cls.MALE, "male": cls.MALE,
            "f": cls.FEMALE, "female": cls.FEMALE,
            "-": cls.UNKNOWN, "u": cls.UNKNOWN, "unknown": cls.UNKNOWN,
        }
        if key not in mapping:
            raise ValueError(f"Unknown gender code: {text!r}")
        return mapping[key]


class TrialClass(str, Enum):
    """
    Trial class of an utterance.

    ``target`` and ``nontarget`` are bona fide ASV trials; ``bonafide`` marks
    genuine speech whose ASV role is unknown (CM-only protocols).
    """
    TARGET = "target"
    NONTARGET = "nontarget"
    BONAFIDE = "bonafide"
    SPOOF = "spoof"

    @property
    def is_bonafide(self) -> bool:
        return self is not TrialClass.SPOOF

    @classmethod
    def parse(cls, text: str) -> "TrialClass":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"Unknown trial class: {text!r}") from None


BONAFIDE_CLASSES = frozenset({TrialClass.TARGET, TrialClass.NONTARGET, TrialClass.BONAFIDE})
