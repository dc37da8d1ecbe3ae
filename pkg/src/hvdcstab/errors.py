"""Exception hierarchy.

Three rough families, mirrored by the CLI exit codes: validation errors
(bad input, inconsistent model, exit 3), convergence errors (an iterative
solver gave up, exit 2) and physics faults raised while a simulation is
running (also exit 2, the run aborts with a labelled reason).
"""


class HvdcStabError(Exception):
    """Base class for everything raised on purpose by this package."""


# ---------------------------------------------------------------- validation

class ValidationError(HvdcStabError):
    """Model or scenario input is malformed or self-contradictory."""


class ZeroImpedanceBranch(ValidationError):
    """In-service branch with r = x = 0 cannot be stamped."""


class TargetNotFound(ValidationError):
    """An event or plan references a device that does not exist."""


class AlreadyOut(ValidationError):
    """An event targets a device that is already out of service."""


class IslandedMachine(ValidationError):
    """A branch trip would leave a machine bus with no connection."""


class EmptyRegion(ValidationError):
    """A region tag with no machines behind it."""


class MissingCoi(ValidationError):
    """A controller needs a centre-of-inertia signal that is unavailable."""


class NotASeparator(ValidationError):
    """Branch set slated for replacement does not split the declared regions."""


class RatingExceeded(ValidationError):
    """Converter rating below the AC flow it must carry."""


class InfeasibleInit(ValidationError):
    """Steady-state construction needs a value outside device limits."""


class InitResidualTooLarge(ValidationError):
    """Assembled initial state is not an equilibrium."""

    def __init__(self, residual: float, worst: str = ""):
        self.residual = residual
        self.worst = worst
        msg = f"initial state residual {residual:.3e} exceeds bound"
        if worst:
            msg += f" (worst state: {worst})"
        super().__init__(msg)


class ExcessivePhaseRequirement(ValidationError):
    """Per-stage compensation angle too close to 90 degrees."""


class ZeroGainStep(ValidationError):
    """Sensitivity probe with delta_k = 0 is undefined."""


# --------------------------------------------------------------- convergence

class ConvergenceError(HvdcStabError):
    """An iterative solver failed to meet its tolerance."""


class NoConvergence(ConvergenceError):
    """Power-flow iteration exhausted without meeting tolerance."""

    def __init__(self, iterations: int, final_mismatch: float):
        self.iterations = iterations
        self.final_mismatch = final_mismatch
        super().__init__(
            f"no convergence after {iterations} iterations, "
            f"final mismatch {final_mismatch:.3e}"
        )


class SingularJacobian(ConvergenceError):
    """Jacobian factorisation failed."""


class AlgebraicSolveFailed(ConvergenceError):
    """Network algebraic equations did not converge."""


class StepNonConvergence(ConvergenceError):
    """Implicit integration step failed to converge."""

    def __init__(self, t: float, residual: float):
        self.t = t
        self.residual = residual
        super().__init__(f"step at t={t:.6g} s stalled, residual {residual:.3e}")


class ZeroEigenvalue(ConvergenceError):
    """Damping ratio of a zero eigenvalue is undefined."""


class DefectiveMode(ConvergenceError):
    """Left/right eigenvector pair numerically defective."""


class ModeMatchAmbiguous(ConvergenceError):
    """Two candidate modes correlate almost equally with the target."""


class ZeroSensitivity(ConvergenceError):
    """Estimated gain sensitivity is numerically zero; station has no leverage."""


# ---------------------------------------------------------------- run faults

class SimulationFault(HvdcStabError):
    """Simulation aborted on a monitored physical bound."""

    def __init__(self, t: float | None, msg: str):
        self.t = t
        at = f" at t={t:.6g} s" if t is not None else ""
        super().__init__(msg + at)


class VoltageCollapse(SimulationFault):
    """AC voltage at a converter bus below the operating floor."""


class DcOvervoltage(SimulationFault):
    """DC voltage above the guard band."""


class DcUndervoltage(SimulationFault):
    """DC voltage below the guard band."""
