class CapExceededError(ValueError):
    """An exhaustive routine was asked to run above its configured size cap."""


class DegenerateBranchError(ValueError):
    """A forced measurement outcome has (numerically) zero probability."""


class MalformedSequenceError(ValueError):
    """A contraction sequence does not describe a valid pairwise merge order."""


class ExtractionStallError(RuntimeError):
    """Pair extraction could not isolate a maximally entangled pair."""
