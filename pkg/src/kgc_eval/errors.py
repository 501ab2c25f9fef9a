"""Exception types shared across the toolkit."""


class KgcEvalError(Exception):
    """Base class for all toolkit errors."""


class DataFormatError(KgcEvalError):
    """A file does not conform to its documented line format."""


class EvaluationError(KgcEvalError):
    """An evaluation cannot be carried out under the given inputs."""


class CampaignError(KgcEvalError):
    """An annotation-campaign rule was violated."""
