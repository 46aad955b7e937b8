"""Exception hierarchy shared by all patentforge modules."""


class ForgeError(Exception):
    """Base class for all library errors."""


class ConfigError(ForgeError):
    """Invalid or inconsistent configuration."""


# --- corpus ---------------------------------------------------------------

class MalformedCode(ForgeError):
    """Raw IPC string does not match the section/class/subclass/group shape."""


class ParseError(ForgeError):
    """Malformed corpus line; carries the 1-based line number."""

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class DuplicateId(ForgeError):
    """Two records share the same patent id."""


class EmptyCorpus(ForgeError):
    """Operation requires at least one record."""


# --- null model -----------------------------------------------------------

class UnknownCode(ForgeError):
    """Code absent from the window's degree map."""


class DegenerateSigma(ForgeError):
    """Null-model standard deviation is zero; z-score undefined."""


class InsufficientCandidates(ForgeError):
    """Fewer rankable candidates than requested positives."""


# --- model ----------------------------------------------------------------

class TooManyCodes(ForgeError):
    """Technology tokens alone exceed the sequence budget."""


class ShapeMismatch(ForgeError):
    """Input shapes inconsistent with the model configuration."""


class NoMaskedPositions(ForgeError):
    """Masking produced no targets, even after one resample."""


class DivergenceDetected(ForgeError):
    """Training loss became non-finite."""


class CorruptCheckpoint(ForgeError):
    """Checkpoint file fails magic, header, or size validation."""


# --- similarity -----------------------------------------------------------

class ZeroVector(ForgeError):
    """Cosine undefined for a zero-norm vector."""


class DimMismatch(ForgeError):
    """Vectors have different dimensions."""


class NoEmbeddings(ForgeError):
    """No stored embeddings for the requested code."""


class SelfPair(ForgeError):
    """Similarity of a code with itself was requested."""


class InsufficientCodes(ForgeError):
    """Fewer than two codes available for pair sampling."""


# --- evaluation -----------------------------------------------------------

class SingleClass(ForgeError):
    """Both classes required; scores contain only one label."""


class KeyMismatch(ForgeError):
    """Predicted and gold label maps cover different patents."""


class NoRelevant(ForgeError):
    """A retrieval query has no relevant candidate."""


class CountMismatch(ForgeError):
    """Paired vector collections differ in length."""


class EmptyStore(ForgeError):
    """Embedding store holds no records."""


class CorruptStore(ForgeError):
    """Embedding store file fails header or size validation."""


class InfeasibleSpec(ForgeError):
    """Synthetic corpus specification cannot be realized."""


# --- pipeline -------------------------------------------------------------

class MissingResults(ForgeError):
    """Results directory holds no readable results."""
