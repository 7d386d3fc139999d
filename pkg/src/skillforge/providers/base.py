"""Contracts for the three model capabilities the engine depends on.

Providers are duck-typed: anything with the right method shape works. The
engine ships seeded mocks (``skillforge.providers.mock``) and an
OpenAI-compatible HTTP adapter (``skillforge.providers.http``).
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from skillforge.errors import InputError

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 16394


@dataclass(frozen=True)
class ChatRequest:
    system: str
    user: str
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise InputError("max_tokens must be at least 1")
        if not math.isfinite(self.temperature) or self.temperature < 0:
            raise InputError("temperature must be finite and non-negative")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    tokens_in: int = 0
    tokens_out: int = 0

    def __post_init__(self) -> None:
        if self.tokens_in < 0 or self.tokens_out < 0:
            raise InputError("token counts must be non-negative")


@dataclass(frozen=True)
class LikelihoodResult:
    """Sum of token log-probabilities of a continuation, plus its token count."""

    sum_logprob: float
    token_count: int

    def __post_init__(self) -> None:
        if self.token_count < 1:
            raise InputError("token_count must be at least 1")
        if not math.isfinite(self.sum_logprob):
            raise InputError("sum_logprob must be finite")


@runtime_checkable
class ChatProvider(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


@runtime_checkable
class EmbeddingProvider(Protocol):
    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


@runtime_checkable
class LikelihoodProvider(Protocol):
    def score_likelihood(self, condition: str, continuation: str) -> LikelihoodResult: ...


def validate_embed_inputs(texts: Sequence[str]) -> list[str]:
    texts = list(texts)
    for text in texts:
        if not text:
            raise InputError("cannot embed an empty text")
    return texts


def validate_continuation(continuation: str) -> None:
    if not continuation:
        raise InputError("continuation must be non-empty")
