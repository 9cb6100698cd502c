"""Exception hierarchy shared across the toolkit.

Every error carries a stable ``code`` used by the CLI to name the failure in
JSON reports.
"""


class EquilibraError(Exception):
    code = "EquilibraError"


class DimensionMismatch(EquilibraError, ValueError):
    code = "DimensionMismatch"


class NotSkew(EquilibraError, ValueError):
    code = "NotSkew"


class DegenerateRotation(EquilibraError, ValueError):
    code = "DegenerateRotation"


class NonPositiveDistance(EquilibraError, ValueError):
    code = "NonPositiveDistance"


class AdmissibilityFailure(EquilibraError):
    code = "AdmissibilityFailure"

    def __init__(self, condition, message=""):
        self.condition = condition
        super().__init__(f"{condition}: {message}" if message else condition)


class InvalidConfiguration(EquilibraError, ValueError):
    code = "InvalidConfiguration"


class CollisionSingularity(EquilibraError):
    code = "CollisionSingularity"


class AntipodalOrCoincidentSingularity(EquilibraError):
    code = "AntipodalOrCoincidentSingularity"


class OffManifold(EquilibraError):
    code = "OffManifold"


class SingularityEncountered(EquilibraError):
    code = "SingularityEncountered"


class ToleranceUnachievable(EquilibraError):
    code = "ToleranceUnachievable"


class NoConvergence(EquilibraError):
    code = "NoConvergence"


class SingularJacobian(EquilibraError):
    code = "SingularJacobian"


class GaugeConflict(EquilibraError):
    code = "GaugeConflict"


class BranchLost(EquilibraError):
    code = "BranchLost"

    def __init__(self, message, family=None):
        super().__init__(message)
        self.family = family


class UnverifiedMember(EquilibraError):
    code = "UnverifiedMember"


class HypothesisNotMet(EquilibraError):
    code = "HypothesisNotMet"


class PathViolation(EquilibraError):
    code = "PathViolation"


class AntipodalGuardViolation(EquilibraError):
    code = "AntipodalGuardViolation"
