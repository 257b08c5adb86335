"""Joint word/API embeddings learned from comment and API-call corpora."""

__version__ = "0.1.0"
