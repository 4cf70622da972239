"""Exception hierarchy.

Two families: ``ValidationError`` for bad inputs (CLI exit code 2) and
``NumericalEvent`` for things that happened while computing (exit code 3).
"""


class GasflowError(Exception):
    pass


class ValidationError(GasflowError, ValueError):
    pass


class OutsideDomainError(ValidationError):
    pass


class NumericalEvent(GasflowError, ArithmeticError):
    pass


class SingularChartError(NumericalEvent):
    pass


class ShockRegionError(NumericalEvent):
    def __init__(self, msg, critical_x1=None):
        super().__init__(msg)
        self.critical_x1 = critical_x1


class StepSizeUnderflow(NumericalEvent):
    def __init__(self, msg, t=None, h=None):
        super().__init__(msg)
        self.t = t
        self.h = h


class DegenerateFlowMap(NumericalEvent):
    pass


class BlowUp(NumericalEvent):
    def __init__(self, msg, t=None):
        super().__init__(msg)
        self.t = t


class InconclusiveQuadrature(NumericalEvent):
    def __init__(self, msg, suggested_radius=None):
        super().__init__(msg)
        self.suggested_radius = suggested_radius
