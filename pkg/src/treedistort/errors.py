"""Exception hierarchy shared by all modules."""


class TreeDistortError(Exception):
    """Base class for every error raised by this package."""


class DomainError(TreeDistortError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class TreeSizeError(DomainError):
    pass


class DegenerateEmbedding(TreeDistortError):
    """Two distinct vertices share an image point."""


class NoPairs(TreeDistortError):
    """Distortion is undefined for a single-vertex tree."""


class SelectionError(TreeDistortError):
    pass


class Unsupported(TreeDistortError):
    pass


class ConvergenceError(TreeDistortError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InfeasibleMargin(DomainError):
    pass


class DepthError(DomainError):
    pass


class HypothesisError(TreeDistortError):
    """Inputs violate the hypotheses of the fork lemma.

    ``trace`` carries the partial audit record when one was built.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class LemmaViolation(TreeDistortError):
    """A certified inequality failed on inputs that satisfy its hypotheses.

    This never happens for a valid convexity profile; it signals a bug.
    """
