"""
Pydantic models of the run artifacts: manifest, evaluation report and result rows.
"""

from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from config import SOFTWARE_VERSION


class ArtifactRecord(BaseModel):
    """One file read or written by a stage."""
    path: str
    sha256: str


class StageRecord(BaseModel):
    stage: str
    started_at: datetime
    completed_at: datetime
    inputs: List[ArtifactRecord] = Field(default_factory=list)
    outputs: List[ArtifactRecord] = Field(default_factory=list)


class Manifest(BaseModel):
    """Config snapshot plus every stage's inputs and outputs with their hashes."""
    software_version: str = SOFTWARE_VERSION
    config: Dict[str, Any]
    stages: Dict[str, StageRecord] = Field(default_factory=dict)

    def record(self, entry: StageRecord) -> None:
        self.stages[entry.stage] = entry


class TaskScore(BaseModel):
    mean_return: float
    normalized: float


class EvalReport(BaseModel):
    scenario: str
    seed: int
    method: str = "full"
    mean_return: float
    normalized: float
    reference_expert: float
    reference_random: float
    per_task: Dict[str, TaskScore]
    diagnostics: Dict[str, Optional[float]] = Field(default_factory=dict)


class AblationRow(BaseModel):
    scenario: str
    method: str
    seed: int
    normalized_score: float
