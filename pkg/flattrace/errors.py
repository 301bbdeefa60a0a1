"""Error hierarchy.

Every error renders as a small machine-readable dict so the CLI can print it verbatim.
"""

__all__ = (
    "FlatTraceError", "ConfigError", "ComputationError",
    "NotUnimodular", "NotHyperbolic", "PeriodTooLarge", "Degenerate",
    "BandBudgetExceeded", "ScheduleTooFlat", "TooFewSamples",
)


class FlatTraceError(Exception):
    exit_code: int = 3

    @property
    def code(self) -> str:
        return type(self).__name__

    def as_dict(self) -> dict[str, str]:
        return {"error": self.code, "message": str(self)}


class ConfigError(FlatTraceError, ValueError):
    exit_code = 2


class ComputationError(FlatTraceError):
    exit_code = 3


class NotUnimodular(ComputationError, ValueError):
    pass


class NotHyperbolic(ComputationError, ValueError):
    pass


class PeriodTooLarge(ComputationError):
    pass


class Degenerate(ComputationError):
    pass


class BandBudgetExceeded(ComputationError):
    pass


class ScheduleTooFlat(ComputationError, ValueError):
    pass


class TooFewSamples(ComputationError, ValueError):
    pass
