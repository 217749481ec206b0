# Purpose: exception hierarchy shared by the lab modules. Every error
# carries the process exit code the command line front end reports.
#

EXIT_PASS = 0
EXIT_NUMERIC_FAILURE = 1
EXIT_AMBIGUOUS = 2
EXIT_CONFIG = 3


class LabError(Exception):
    exit_code = EXIT_NUMERIC_FAILURE
    init_args = None

    def __reduce__(self):
        # picklable across worker processes
        return type(self), self.init_args if self.init_args is not None else self.args


class ConfigError(LabError):
    exit_code = EXIT_CONFIG

    def __init__(self, field_path, message):
        self.init_args = (field_path, message)
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


class ClassificationAmbiguousError(LabError):
    exit_code = EXIT_AMBIGUOUS


class NumericalFailure(LabError):
    exit_code = EXIT_NUMERIC_FAILURE


class DimensionMismatchError(ValueError):
    pass


class ScheduleError(NumericalFailure, ValueError):
    pass


class NotSymplecticError(NumericalFailure):
    def __init__(self, defect, tol):
        self.init_args = (defect, tol)
        self.defect = defect
        self.tol = tol
        super().__init__(f"matrix is not symplectic: defect {defect:.3e} exceeds tolerance {tol:.1e}")


class UnsupportedSpectrumError(NumericalFailure):
    pass


class NyquistError(NumericalFailure):
    def __init__(self, max_xi, support, required_n):
        self.init_args = (max_xi, support, required_n)
        self.required_n = required_n
        super().__init__(
            f"grid momentum cover {max_xi:.4g} is below 4 x symbol support {support:.4g}; "
            f"use N >= {required_n}")


class AliasingError(NumericalFailure):
    pass


class OperatorOverflowError(NumericalFailure):
    def __init__(self, norm, limit):
        self.init_args = (norm, limit)
        self.norm = norm
        super().__init__(f"exponent norm {norm:.4g} exceeds the safe limit {limit:.4g}")


class NonHermitianError(NumericalFailure):
    pass


class ContractionFailure(NumericalFailure):
    def __init__(self, r, h, hbar_tilde, s):
        self.init_args = (r, h, hbar_tilde, s)
        self.r = r
        super().__init__(f"conjugated monodromy does not contract: r = {r:.12f} at (h, hbar_tilde, s) = ({h}, {hbar_tilde}, {s})")


class PositivityViolation(NumericalFailure):
    def __init__(self, report):
        self.init_args = (report,)
        self.report = report
        super().__init__(f"nonpositive ratio {report.min_ratio:.6e} at point {list(report.argmin_point)}")


class SeriesDivergenceError(NumericalFailure):
    pass


class UnderResolvedError(NumericalFailure):
    pass


class IntegrationError(NumericalFailure):
    pass


class NonClosedOrbitError(NumericalFailure):
    pass


class CriticalPointError(NumericalFailure):
    pass
