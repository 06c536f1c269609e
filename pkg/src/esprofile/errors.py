"""Exception hierarchy shared by every module of the package."""


class ESPError(Exception):
    """Base class for all errors raised by esprofile."""


# tabular
class MissingTarget(ESPError, LookupError):
    pass


class NonBinaryTarget(ESPError, ValueError):
    pass


class MalformedCsv(ESPError, ValueError):
    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col

    def __str__(self):
        base = super().__str__()
        if self.row is None:
            return base
        return f"{base} (row {self.row}, col {self.col})"


class EmptyDataset(ESPError, ValueError):
    pass


class InsufficientNumericColumns(ESPError, ValueError):
    pass


class ClassTooSmall(ESPError, ValueError):
    pass


class SchemaError(ESPError, ValueError):
    """A Dataset or schema hint violates a structural invariant."""


# corrupt
class FeatureNotFound(ESPError, LookupError):
    pass


class OutlierOnCategorical(ESPError, ValueError):
    pass


class PredicateSelectsNoRows(ESPError, ValueError):
    pass


class LevelNotInSchedule(ESPError, ValueError):
    pass


class EmptyFeatureList(ESPError, ValueError):
    pass


class InvalidCorruptionSpec(ESPError, ValueError):
    pass


# learn
class DegenerateTraining(ESPError, ValueError):
    pass


class SingularCovariance(ESPError, ArithmeticError):
    pass


class SchemaMismatch(ESPError, ValueError):
    pass


class EmptyTest(ESPError, ValueError):
    pass


# esp
class TooFewPoints(ESPError, ValueError):
    pass


class ZeroBaseline(ESPError, ValueError):
    pass


class MixedSchedules(ESPError, ValueError):
    pass


class TooFewRuns(ESPError, ValueError):
    pass


class SchemaViolation(ESPError, ValueError):
    pass


# stats
class TooFewPairs(ESPError, ValueError):
    pass


class EmptyInput(ESPError, ValueError):
    pass


class PValueOutOfRange(ESPError, ValueError):
    pass


# runner / cli
class ScenarioNotFound(ESPError, LookupError):
    pass


class IntegrityError(ESPError, RuntimeError):
    """The clean test partition changed between split time and evaluation."""


class ValidationFailure(ESPError, ValueError):
    def __init__(self, message, path=""):
        super().__init__(message)
        self.path = path

    def __str__(self):
        base = super().__str__()
        return f"{self.path}: {base}" if self.path else base


class EmptyStore(ESPError, ValueError):
    pass
