"""Exception hierarchy shared by the library and the CLI.

Every error carries an ``exit_code`` that the CLI uses verbatim:
0 pass, 1 audit failure, 2 schema, 3 regime.
"""


class AchamError(Exception):
    exit_code = 1


class SchemaError(AchamError, ValueError):
    exit_code = 2


class DimensionError(AchamError, ValueError):
    exit_code = 2


class HermiticityError(AchamError, ValueError):
    exit_code = 2


class RegimeError(AchamError, ValueError):
    exit_code = 3


class NormViolationError(RegimeError):
    def __init__(self, support, norm):
        self.support = tuple(support)
        self.norm = float(norm)
        super().__init__(f"Term on qubits {list(self.support)} has operator norm {self.norm:.12g} > 1")


class GapCollapseError(RegimeError):
    def __init__(self, message, eps_ceiling):
        self.eps_ceiling = float(eps_ceiling)
        super().__init__(f"{message} (promise gap stays open only for eps < {self.eps_ceiling:.6g})")


class DegeneratePivotError(AchamError, ArithmeticError):
    exit_code = 1


class InvariantViolationError(AchamError, RuntimeError):
    exit_code = 1


class ContractError(AchamError, ValueError):
    exit_code = 1


class AuditFailure(AchamError):
    exit_code = 1

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("Audit failed: " + "; ".join(self.violations))
