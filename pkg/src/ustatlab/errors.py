"""Exception hierarchy shared by all modules."""


class UstatlabError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(UstatlabError):
    pass


class InvalidDomain(UstatlabError):
    pass


class ArityError(UstatlabError):
    pass


class ComplexityRefusal(UstatlabError):
    pass


class GridError(UstatlabError):
    pass


class DomainError(UstatlabError):
    pass


class CoverageError(UstatlabError):
    def __init__(self, escaped_fraction):
        self.escaped_fraction = float(escaped_fraction)
        super().__init__(
            f"grid misses {self.escaped_fraction:.3%} of the samples (limit 0.1%)"
        )


class ConfigError(UstatlabError):
    pass


class FailedRun(UstatlabError):
    """Numerical failure of a simulation or flow; carries a serializable diagnostic."""

    def diagnostic(self):
        return {"error": type(self).__name__, "message": str(self)}


class BlowUp(FailedRun):
    def __init__(self, dt, t):
        self.dt = float(dt)
        self.t = float(t)
        super().__init__(
            f"non-finite state at t={self.t:g} with dt={self.dt:g}; retry with a smaller dt"
        )

    def diagnostic(self):
        return {**super().diagnostic(), "dt": self.dt, "t": self.t}


class StabilityError(FailedRun):
    def __init__(self, dt, admissible_dt, what="step"):
        self.dt = float(dt)
        self.admissible_dt = float(admissible_dt)
        super().__init__(
            f"{what}: dt={self.dt:g} exceeds the admissible dt={self.admissible_dt:.6g}"
        )

    def diagnostic(self):
        return {**super().diagnostic(), "dt": self.dt, "admissible_dt": self.admissible_dt}


class NoContraction(FailedRun):
    def __init__(self, report):
        self.report = report
        super().__init__(
            "Picard iteration did not contract "
            f"(iterations={report['iterations']}, last residual={report['final_residual']:.3e}); "
            "possible phase transition or failure of the contraction hypothesis"
        )

    def diagnostic(self):
        return {**super().diagnostic(), "report": self.report}
