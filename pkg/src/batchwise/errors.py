"""Exception types raised across the toolkit.

Three families matter to callers: :class:`SchemaError` for malformed or
inconsistent inputs, :class:`InfeasibleError` for well-formed problems with
no admissible solution, and plain :class:`BatchwiseError` for everything
else. The CLI maps these onto exit codes 2, 3, and 4 respectively.
"""


class BatchwiseError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(BatchwiseError):
    """Input data violates a structural or statistical precondition."""


class InfeasibleError(BatchwiseError):
    """No admissible solution exists under the requested constraints."""


# --- ingest -----------------------------------------------------------------

class MissingColumn(SchemaError):
    pass


class NonMonotoneTimestamps(SchemaError):
    def __init__(self, batch_id, tag):
        super().__init__(f"timestamps not strictly increasing for batch {batch_id!r}, tag {tag!r}")
        self.batch_id = batch_id
        self.tag = tag


class DuplicateSample(SchemaError):
    def __init__(self, batch_id, tag, time):
        super().__init__(f"duplicate sample for batch {batch_id!r}, tag {tag!r} at t={time}")
        self.batch_id = batch_id
        self.tag = tag
        self.time = time


class OverlappingPhases(SchemaError):
    def __init__(self, batch_id, detail=""):
        super().__init__(f"phases of batch {batch_id!r} overlap or leave gaps{': ' + detail if detail else ''}")
        self.batch_id = batch_id


class UnknownBatchInEvents(SchemaError):
    def __init__(self, batch_id):
        super().__init__(f"events reference batch {batch_id!r} which has no trajectory data")
        self.batch_id = batch_id


class EmptySeries(SchemaError):
    pass


class SinglePointSeries(SchemaError):
    pass


class HeterogeneousGrids(SchemaError):
    pass


# --- align ------------------------------------------------------------------

class InconsistentPhaseSequence(SchemaError):
    def __init__(self, batch_id, detail=""):
        super().__init__(f"batch {batch_id!r} has a different phase sequence{': ' + detail if detail else ''}")
        self.batch_id = batch_id


class PhaseMissing(SchemaError):
    def __init__(self, batch_id, phase):
        super().__init__(f"batch {batch_id!r} is missing phase {phase!r}")
        self.batch_id = batch_id
        self.phase = phase


class NonMonotoneIndicator(SchemaError):
    def __init__(self, batch_id, reversal):
        super().__init__(
            f"indicator not monotone for batch {batch_id!r} (worst reversal {reversal:.4g} of range)"
        )
        self.batch_id = batch_id
        self.reversal = reversal


class IncompatibleEndpoints(SchemaError):
    def __init__(self, batch_id, detail=""):
        super().__init__(f"indicator endpoints of batch {batch_id!r} differ from the cohort{': ' + detail if detail else ''}")
        self.batch_id = batch_id


class NoEligibleBatch(SchemaError):
    pass


class ZeroVarianceTag(SchemaError):
    def __init__(self, tag):
        super().__init__(f"tag {tag!r} has zero variance in the reference; cannot standardize")
        self.tag = tag


class EmptyTagSet(SchemaError):
    pass


class SeriesTooShort(SchemaError):
    pass


class NoFeasiblePath(InfeasibleError):
    pass


class AllCandidatesInfeasible(InfeasibleError):
    pass


class EmptyPathSet(SchemaError):
    pass


# --- screen / fpca / spc ------------------------------------------------------

class TooFewRows(SchemaError):
    pass


class ConstantTarget(SchemaError):
    """Marker for a constant regression target.

    Fitting a forest on a constant target is not an error: every tree
    degenerates to a stump and all contributions come out zero. The class
    exists so callers can name the condition when they want to treat it as
    one; the library itself never raises it.
    """


class DegenerateData(SchemaError):
    pass


class TooFewPoints(SchemaError):
    pass


class TooFewPointsForBasis(SchemaError):
    pass


class GridMismatch(SchemaError):
    pass


class MissingFeature(SchemaError):
    pass


class NonFiniteValue(SchemaError):
    pass


class AllFeaturesConstant(SchemaError):
    pass
