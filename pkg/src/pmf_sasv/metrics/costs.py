"""
Costs - Priors and detection costs for the DCF family of metrics.
"""

from pydantic import BaseModel, Field, model_validator

PRIOR_TOLERANCE = 1e-12


class TandemCostModel(BaseModel):
    """
    Class priors and costs.

    Defaults are the ASVspoof 2019 tandem protocol values; ASV-only DCF uses
    :meth:`asv_only` (pi_tar 0.99, pi_non 0.01, no spoofs).
    """
    pi_tar: float = Field(0.9405, ge=0)
    pi_non: float = Field(0.0095, ge=0)
    pi_spoof: float = Field(0.05, ge=0)
    c_miss: float = Field(1.0, ge=0)
    c_fa: float = Field(10.0, ge=0)
    c_fa_spoof: float = Field(10.0, ge=0)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check(self):
        total = self.pi_tar + self.pi_non + self.pi_spoof
        if abs(total - 1.0) > PRIOR_TOLERANCE:
            raise ValueError(f"priors must sum to 1, got {total!r}")
        if max(self.c_miss, self.c_fa, self.c_fa_spoof) <= 0:
            raise ValueError("at least one cost must be positive")
        return self

    @classmethod
    def asv_only(cls, pi_tar: float = 0.99, c_miss: float = 1.0, c_fa: float = 1.0) -> "TandemCostModel":
        return cls(pi_tar=pi_tar, pi_non=1.0 - pi_tar, pi_spoof=0.0,
                   c_miss=c_miss, c_fa=c_fa, c_fa_spoof=0.0)

    @property
    def default_cost(self) -> float:
        """Cost of the better of the accept-all and reject-all systems."""
        return min(self.c_fa * self.pi_non + self.c_fa_spoof * self.pi_spoof, self.c_miss * self.pi_tar)
