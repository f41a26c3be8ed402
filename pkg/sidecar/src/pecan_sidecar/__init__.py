"""Attention-exposing inference service speaking the pecan provider protocol."""

from .engine import (
    AnswerResult,
    DecideResult,
    EngineConfig,
    EngineError,
    InferenceEngine,
    SummarizeResult,
    UnknownSessionError,
    WindowExceeded,
)
from .service import create_app

__all__ = [
    "AnswerResult",
    "DecideResult",
    "EngineConfig",
    "EngineError",
    "InferenceEngine",
    "SummarizeResult",
    "UnknownSessionError",
    "WindowExceeded",
    "create_app",
]
