from __future__ import annotations
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field


class _ReportModel(BaseModel):
    # +inf bounds are legitimate values; keep them as JSON Infinity rather than null
    model_config = ConfigDict(ser_json_inf_nan="constants")


class TrialRecord(_ReportModel):
    trial: int
    seed: int
    check: str
    instance: Dict[str, Any] = Field(default_factory=dict)
    lhs: float
    rhs: float
    margin: float
    passed: bool
    notes: List[str] = Field(default_factory=list)
    extra: Dict[str, float] = Field(default_factory=dict)


class ReportSummary(_ReportModel):
    trials: int
    records: int
    failures: int
    min_margin: float


class VerificationReport(_ReportModel):
    """
    One verification suite run. Everything except `created_at` and `hash` is a
    deterministic function of (suite, seed, config).
    """

    suite: str
    seed: int
    tool_version: str
    config: Dict[str, Any] = Field(default_factory=dict)
    records: List[TrialRecord] = Field(default_factory=list)
    summary: ReportSummary
    created_at: Optional[str] = None
    hash: Optional[str] = None

    @computed_field
    @property
    def all_passed(self) -> bool:
        return self.summary.failures == 0
