"""
Settings - Run configuration using Pydantic Settings.

Sources, highest priority first: explicit overrides (CLI flags), environment
variables (``PMF_SASV_`` prefix, ``__`` between section and key, e.g.
``PMF_SASV_COSTS__C_FA=5``), a ``.env`` file, the TOML file given with
``--config``, then the defaults below.
"""

import zlib
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Type

from pydantic import BaseModel, Field, ValidationError, field_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from .classifiers.gbdt import GbdtConfig
from .classifiers.grouped_mlp import GroupedMlpSpec, Variant, preset_fields
from .classifiers.logreg import LogRegConfig
from .classifiers.losses import OcSoftmaxConfig
from .classifiers.models import ModelKind
from .classifiers.smote import SmoteConfig
from .errors import ConfigError
from .filterbank import FilterBankConfig
from .fusion import FusionConfig
from .metrics.bootstrap import BootstrapConfig
from .metrics.costs import TandemCostModel
from .pmf import PmfConfig
from .similarity import SimilarityConfig
from .synth import SynthConfig


class GenderMode(str, Enum):
    GENDER_DEPENDENT = "gender_dependent"
    GENDER_INDEPENDENT = "gender_independent"
    ORACLE_LABELS = "oracle_labels"


class GenderConfig(BaseModel):
    """``[gender]`` gender recogniser section."""
    kind: ModelKind = ModelKind.GBDT
    grid_gbdt: List[Dict[str, Any]] = Field(
        default_factory=lambda: [
            {"n_trees": 100, "max_depth": 3},
            {"n_trees": 50, "max_depth": 2},
            {"n_trees": 200, "max_depth": 4},
        ]
    )
    grid_logistic_regression: List[Dict[str, Any]] = Field(
        default_factory=lambda: [{"l2": 1e-3}, {"l2": 1e-2}, {"l2": 1e-1}]
    )
    tune_on: str = Field("dev", pattern="^(dev|eval)$")
    seed: Optional[int] = None

    @field_validator("kind")
    @classmethod
    def _flat_kind(cls, v: ModelKind) -> ModelKind:
        if v is ModelKind.GROUPED_MLP:
            raise ValueError("gender recogniser must be gbdt or logistic_regression")
        return v

    def grid(self) -> List[Dict[str, Any]]:
        return self.grid_gbdt if self.kind is ModelKind.GBDT else self.grid_logistic_regression


class PathsConfig(BaseModel):
    """``[paths]`` section; every artifact lives under ``work_dir`` unless a flag says otherwise."""
    work_dir: Path = Path("work")

    @property
    def models_dir(self) -> Path:
        return self.work_dir / "models"

    @property
    def embeddings_dir(self) -> Path:
        return self.work_dir / "embeddings"

    @property
    def classifiers_dir(self) -> Path:
        return self.work_dir / "classifiers"

    @property
    def scores_dir(self) -> Path:
        return self.work_dir / "scores"

    @property
    def reports_dir(self) -> Path:
        return self.work_dir / "reports"


class EvalConfig(BaseModel):
    """``[eval]`` section."""
    tdcf_max_thresholds: int = Field(2000, ge=10)
    # unset: resamples use tdcf_max_thresholds too
    ci_max_thresholds: Optional[int] = Field(None, ge=10)
    score_pmf_bins: int = Field(50, ge=2)
    with_ci: bool = True


_SECTION_VARIANTS = {
    "mlp_male": Variant.MALE,
    "mlp_female": Variant.FEMALE,
    "mlp_gi": Variant.GENDER_INDEPENDENT,
}


class Settings(BaseSettings):
    seed: int = 0
    threads: int = Field(1, ge=1)
    gender_mode: GenderMode = GenderMode.GENDER_DEPENDENT

    filterbank: FilterBankConfig = Field(default_factory=FilterBankConfig)
    pmf: PmfConfig = Field(default_factory=PmfConfig)
    similarity: SimilarityConfig = Field(default_factory=SimilarityConfig)
    gender: GenderConfig = Field(default_factory=GenderConfig)
    logreg: LogRegConfig = Field(default_factory=LogRegConfig)
    gbdt: GbdtConfig = Field(default_factory=GbdtConfig)
    smote: SmoteConfig = Field(default_factory=SmoteConfig)
    mlp_male: GroupedMlpSpec = Field(default_factory=lambda: GroupedMlpSpec.preset(Variant.MALE))
    mlp_female: GroupedMlpSpec = Field(default_factory=lambda: GroupedMlpSpec.preset(Variant.FEMALE))
    mlp_gi: GroupedMlpSpec = Field(default_factory=lambda: GroupedMlpSpec.preset(Variant.GENDER_INDEPENDENT))
    ocsoftmax: OcSoftmaxConfig = Field(default_factory=OcSoftmaxConfig)
    costs: TandemCostModel = Field(default_factory=TandemCostModel)
    asv_costs: TandemCostModel = Field(default_factory=TandemCostModel.asv_only)
    bootstrap: BootstrapConfig = Field(default_factory=BootstrapConfig)
    fusion: FusionConfig = Field(default_factory=FusionConfig)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @field_validator("mlp_male", "mlp_female", "mlp_gi", mode="before")
    @classmethod
    def _fill_preset(cls, v, info):
        # a partial section keeps the other preset values of its variant
        if isinstance(v, dict):
            variant = v.get("variant", _SECTION_VARIANTS[info.field_name])
            return preset_fields(variant, v)
        return v

    model_config = SettingsConfigDict(
        env_prefix="PMF_SASV_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (
            init_settings,
            env_settings,
            dotenv_settings,
            TomlConfigSettingsSource(settings_cls),
            file_secret_settings,
        )

    def section_seed(self, section: str) -> int:
        """The section's own seed, or one derived from the global seed and the section name."""
        own = getattr(getattr(self, section), "seed", None)
        if own is not None:
            return int(own)
        return (self.seed + zlib.crc32(section.encode("ascii"))) % 2 ** 32

    def classifier_section(self, kind: ModelKind) -> BaseModel:
        """The ``[gbdt]`` or ``[logreg]`` section grid entries are merged over."""
        return self.gbdt if ModelKind(kind) is ModelKind.GBDT else self.logreg

    def mlp_spec(self, variant: Variant) -> GroupedMlpSpec:
        """The variant's network spec with its seed resolved."""
        section = next(k for k, v in _SECTION_VARIANTS.items() if v is Variant(variant))
        return getattr(self, section).model_copy(update={"seed": self.section_seed(section)})


def load_settings(config_path=None, **overrides) -> Settings:
    """
    Build settings from all sources.

    Args:
        config_path: Optional TOML file
        **overrides: Top-level values that beat every other source; None values are ignored

    Raises:
        ConfigError: Missing file or invalid values
    """
    cls = Settings
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"Config file {path} does not exist")
        cls = type("FileSettings", (Settings,), {
            "model_config": SettingsConfigDict(**{**Settings.model_config, "toml_file": str(path)}),
        })
    try:
        return cls(**{k: v for k, v in overrides.items() if v is not None})
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e
    except ValueError as e:
        # TOML syntax errors surface as ValueError subclasses
        raise ConfigError(f"Cannot read configuration: {e}") from e


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value) if isinstance(value, float) else str(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{ " + ", ".join(f"{k} = {_toml_value(v)}" for k, v in value.items()) + " }"
    raise TypeError(f"Cannot write {type(value).__name__} as TOML")


def dump_toml(settings: Settings) -> str:
    """Every setting as TOML; unset optional values appear commented out."""
    data = settings.model_dump(mode="json")
    lines = []
    sections = []
    for key, value in data.items():
        if isinstance(value, dict):
            sections.append((key, value))
        else:
            lines.append(f"{key} = {_toml_value(value)}")
    for name, body in sections:
        lines.append("")
        lines.append(f"[{name}]")
        for key, value in body.items():
            if value is None:
                lines.append(f"# {key} =")
            else:
                lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"
