"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class DevshellError(Exception):
    exit_code = 4


class ConfigError(DevshellError, ValueError):
    exit_code = 2


class NonAdmissibleCurve(DevshellError, ValueError):
    exit_code = 3


class ChartDegenerate(DevshellError):
    exit_code = 3


class MeanCurvatureVanishes(DevshellError):
    exit_code = 3


class StepTooCoarse(DevshellError):
    exit_code = 4


class WidthTooLarge(DevshellError, ValueError):
    exit_code = 2


class IncompatibleRHS(DevshellError):
    exit_code = 4


class NotAnIsometry(DevshellError):
    exit_code = 4


class BelowFloor(DevshellError):
    exit_code = 4


class DegenerateModel(DevshellError, ValueError):
    exit_code = 2


class ScalingViolation(DevshellError, ValueError):
    exit_code = 5


class ThicknessTooLarge(DevshellError):
    exit_code = 5
