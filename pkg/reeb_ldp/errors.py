class ReebLdpError(Exception):
    """Base class; ``context`` carries the structured details of the failure."""

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def __str__(self):
        base = super().__str__()
        if not self.context:
            return base
        details = ", ".join(f"{k}={v}" for k, v in sorted(self.context.items()))
        return f"{base} ({details})"


class ConfigError(ReebLdpError):
    pass


# hamiltonian_field

class DegenerateCritical(ReebLdpError):
    pass


class NonConvergence(ReebLdpError):
    pass


class BadKind(ReebLdpError):
    pass


# reeb_graph

class AmbiguousWiring(ReebLdpError):
    pass


class EqualSaddleLevels(ReebLdpError):
    pass


class OutsideBox(ReebLdpError):
    pass


class ContinuityBreak(ReebLdpError):
    pass


class GridMismatch(ReebLdpError):
    pass


# averaged_coeffs

class GuardBand(ReebLdpError):
    pass


class NoClosure(ReebLdpError):
    pass


class DegenerateCurve(ReebLdpError):
    pass


class OutOfSpan(ReebLdpError):
    pass


# sde_sim

class BoxExit(ReebLdpError):
    pass


class StepTooLarge(ReebLdpError):
    pass


class ChartFail(ReebLdpError):
    pass


class OutsideChart(ReebLdpError):
    pass


# action_functional / ldp_verify

class UncoveredEdge(ReebLdpError):
    pass


class Unreachable(ReebLdpError):
    pass


class AllMisses(ReebLdpError):
    pass
