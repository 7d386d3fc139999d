"""Provider contracts, deterministic mocks, and the HTTP adapter."""

from skillforge.providers.base import (
    ChatProvider,
    ChatRequest,
    ChatResponse,
    EmbeddingProvider,
    LikelihoodProvider,
    LikelihoodResult,
)
from skillforge.providers.http import (
    HttpChatProvider,
    HttpConfig,
    HttpEmbeddingProvider,
    HttpLikelihoodProvider,
)
from skillforge.providers.mock import MockChatProvider, MockEmbedder, MockLikelihoodScorer

__all__ = [
    "ChatProvider",
    "ChatRequest",
    "ChatResponse",
    "EmbeddingProvider",
    "HttpChatProvider",
    "HttpConfig",
    "HttpEmbeddingProvider",
    "HttpLikelihoodProvider",
    "LikelihoodProvider",
    "LikelihoodResult",
    "MockChatProvider",
    "MockEmbedder",
    "MockLikelihoodScorer",
]
