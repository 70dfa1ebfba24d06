"""
Exception hierarchy shared by every xdio module.

Library code raises these; only the command-line entry point catches them and
turns them into a one-line error report.
"""

from typing import Iterable, Optional


class XdioError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(XdioError, ValueError):
    """Array shapes or state dimensionalities disagree."""


class NonFiniteError(DimensionError):
    """A batch handed to a network holds NaN or infinite entries."""


class CorpusFormatError(XdioError):
    """A trajectory corpus file could not be parsed or is inconsistent."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ScenarioError(XdioError):
    """Unknown scenario name or malformed task definition."""


class UnreachableGoalError(XdioError):
    """Inverse kinematics was asked for a goal outside the arm's workspace."""


class ExpertValidationError(XdioError):
    """The scripted expert fails the task too often to produce demonstrations."""


class UntrainedModelError(XdioError):
    """A model was used in a loss or prediction before being trained."""


class EvaluationReferenceError(XdioError):
    """Expert and random reference returns cannot anchor a normalized score."""


class TrainingDivergedError(XdioError):
    """A loss term became non-finite during training."""

    def __init__(self, term: str, iteration: int, task: str):
        self.term = term
        self.iteration = iteration
        self.task = task
        super().__init__(f"non-finite value in {term} at iteration {iteration} (task {task})")


class EstimatorMismatchError(XdioError):
    """Frozen position estimators were modified during alignment training."""


class StageOrderError(XdioError):
    """A pipeline stage was started before the artifacts it reads exist."""

    def __init__(self, stage: str, missing: Iterable[str]):
        self.stage = stage
        self.missing = sorted(missing)
        super().__init__(f"stage {stage} is missing inputs: {', '.join(self.missing)}")


class GradientGraphError(XdioError):
    """Backward was requested without a matching recorded forward pass."""


class InvalidActionError(XdioError, ValueError):
    """An action vector has the wrong length or non-finite entries."""
