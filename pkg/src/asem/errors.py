"""Exception hierarchy shared by all pipeline stages."""


class AsemError(Exception):
    pass


class ConfigError(AsemError):
    pass


class DataError(AsemError):
    pass


class EmptyCorpus(DataError):
    pass


class UnknownBackend(ConfigError):
    pass


class EmptyVocabulary(DataError):
    pass


class UnknownAspect(AsemError):
    pass


class EmptyPriorKnowledge(DataError):
    pass


class EmptyBank(DataError):
    pass


class EmptySentence(AsemError):
    pass


class Diverged(AsemError):
    pass


class LengthMismatch(AsemError):
    pass


class NoTerms(AsemError):
    pass


class StageError(AsemError):
    """Wraps a failure inside one pipeline stage, keeping the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
