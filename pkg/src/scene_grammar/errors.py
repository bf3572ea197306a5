"""Exception hierarchy shared across the package."""


class SceneGrammarError(Exception):
    """Base class for all errors raised by this package."""


class LexiconError(SceneGrammarError):
    """Malformed or inconsistent lexicon data."""


class UnknownTermError(LexiconError):
    """A motion/emotion name could not be resolved against the lexicon."""


class GrammarError(SceneGrammarError):
    """Invalid grammar configuration or dangling pool reference."""


class ConsistencyError(SceneGrammarError):
    """A parse graph does not match the grammar it claims to come from."""


class ContractError(SceneGrammarError):
    """An operation was called with arguments violating its contract."""


class FitError(SceneGrammarError):
    """A model fit could not be performed on the given data."""


class TrainError(SceneGrammarError):
    """Training could not proceed (no expert data, divergence, ...)."""


class SceneFormatError(SceneGrammarError):
    """A scene/params/track file failed to parse or validate."""
