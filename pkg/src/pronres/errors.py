"""Exception hierarchy shared by every pronres module."""


class PronresError(Exception):
    """Base class for all errors raised by pronres."""


class InvalidParam(PronresError, ValueError):
    pass


# -- corpus format ---------------------------------------------------------


class CorpusFormatError(PronresError):
    """A document in a CoNLL stream could not be parsed.

    ``line_no`` is 1-based and points at the offending line when known.
    """

    def __init__(self, message, line_no=None, doc_id=None):
        self.line_no = line_no
        self.doc_id = doc_id
        where = []
        if doc_id is not None:
            where.append(f"document {doc_id!r}")
        if line_no is not None:
            where.append(f"line {line_no}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class MalformedLine(CorpusFormatError):
    pass


class UnbalancedCorefBracket(CorpusFormatError):
    def __init__(self, doc_id, chain_id, line_no=None):
        self.chain_id = chain_id
        super().__init__(f"unbalanced bracket for chain {chain_id}", line_no=line_no, doc_id=doc_id)


class OverlappingSameChainSpan(CorpusFormatError):
    pass


class InvalidDocument(PronresError, ValueError):
    """A Document violates one of its structural invariants."""


# -- embeddings ------------------------------------------------------------


class EmbeddingError(PronresError):
    pass


class BadMagic(EmbeddingError):
    pass


class DimMismatch(EmbeddingError):
    def __init__(self, doc_id, expected, got):
        self.doc_id = doc_id
        super().__init__(f"{doc_id!r}: expected dimension {expected}, got {got}")


class TokenCountMismatch(EmbeddingError):
    def __init__(self, doc_id, expected, got):
        self.doc_id = doc_id
        super().__init__(f"{doc_id!r}: corpus has {expected} tokens, embeddings have {got}")


class ShapeMismatch(EmbeddingError, ValueError):
    pass


# -- model / training ------------------------------------------------------


class OrderViolation(PronresError, ValueError):
    pass


class Diverged(PronresError, ArithmeticError):
    pass


class NonFiniteGradient(PronresError, ArithmeticError):
    pass


class EmptyCorpus(PronresError, ValueError):
    pass


class CheckpointError(PronresError):
    pass


class SpanOutOfRange(PronresError, IndexError):
    pass


class ConfigError(PronresError, ValueError):
    pass
