"""Span-ranking pronoun resolution."""

from .corpus_io import Document, PronounType, Span, Token, parse_conll, read_conll, serialize_conll, write_conll
from .encoder import EmbeddingMatrix, load_precomputed, write_precomputed
from .evaluator import EvalReport, f1_score, score_links
from .model import ModelParams
from .resolver import ResolutionResult, decode, predict_document
from .scorer import AntecedentTable, ScoringSettings, score_document
from .config import RunConfig, TrainConfig

__all__ = [
    "AntecedentTable",
    "Document",
    "EmbeddingMatrix",
    "EvalReport",
    "ModelParams",
    "PronounType",
    "ResolutionResult",
    "RunConfig",
    "ScoringSettings",
    "Span",
    "Token",
    "TrainConfig",
    "decode",
    "f1_score",
    "load_precomputed",
    "parse_conll",
    "predict_document",
    "read_conll",
    "score_document",
    "score_links",
    "serialize_conll",
    "write_conll",
    "write_precomputed",
]
__version__ = "0.1.0"
