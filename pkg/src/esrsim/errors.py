"""Exception hierarchy shared by all esrsim modules.

Each family maps to one CLI exit code: validation/parse errors -> 2,
solver errors -> 3, I/O errors -> 4.
"""


class EsrSimError(Exception):
    exit_code = 1

    def __init__(self, message, entity=None):
        super().__init__(message)
        self.entity = entity

    def to_dict(self):
        out = {"error": type(self).__name__, "message": str(self)}
        if self.entity is not None:
            out["entity"] = self.entity
        return out


class ValidationError(EsrSimError):
    exit_code = 2


class OverlappingConductors(ValidationError):
    pass


class DanglingNet(ValidationError):
    pass


class ProbeInsideConductor(ValidationError):
    pass


class LayerGap(ValidationError):
    pass


class ConfigDoesNotFitLayer(ValidationError):
    pass


class EmptyRegion(ValidationError):
    pass


class NotAConductor(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None, column=None, entity=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message, entity)
        self.line = line
        self.column = column

    def to_dict(self):
        out = super().to_dict()
        if self.line is not None:
            out["line"] = self.line
            out["column"] = self.column
        return out


class UnknownUnit(ValidationError):
    pass


class EmptyProbes(ValidationError):
    pass


class MismatchedProbeSets(ValidationError):
    pass


class SolverError(EsrSimError):
    exit_code = 3


class NoPortNets(SolverError):
    pass


class OverlappingDistinctFilaments(SolverError):
    pass


class ZeroConductivity(SolverError):
    pass


class SingularSystem(SolverError):
    pass


class ConvergenceFailure(SolverError):
    pass


class PointInsideConductor(SolverError):
    pass


class CoincidentDistinctPanels(SolverError):
    pass


class ActiveLoad(SolverError):
    pass


class SingularAccess(SolverError):
    pass


class IoError(EsrSimError):
    exit_code = 4
