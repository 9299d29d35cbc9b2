"""Exception types shared across the simulator."""


class SimError(Exception):
    """Base class for all simulator errors."""


class InvalidGeometry(SimError):
    """Chip geometry violates a structural invariant (message names it)."""


class IllegalOp(SimError):
    """A core issued an operation it is not allowed to issue."""


class BoundaryWrite(IllegalOp):
    """Systolic write toward a mesh edge with no neighbor."""


class BoundaryRead(IllegalOp):
    """Systolic read from a mesh edge with no neighbor."""


class ModeViolation(SimError):
    """Memory operation is illegal under the active crossbar mode."""


class OutOfRange(SimError):
    """Address or offset falls outside the targeted storage."""


class DirtyDrop(SimError):
    """Mode transition would discard dirty cache lines (strict mode)."""


class TransitionBusy(SimError):
    """Mode transition issued while a slice has an outstanding miss."""


class TargetMismatch(SimError):
    """Barrier participants never all arrived (some halted or missing)."""


class UnknownClass(SimError):
    """Energy ledger charge against an unknown event class."""


class InvalidPoint(SimError):
    """DVFS operating point is inconsistent or out of table range."""


class PlanUnsupported(SimError):
    """Requested kernel x mode-plan combination is not implemented."""


class ConfigError(SimError):
    """Run configuration failed to parse or validate."""


class Deadlock(SimError):
    """All live cores are stalled in a cyclic wait.

    Carries ``cycle_cores`` (core ids forming the cycle, if one was found)
    and ``wait_graph`` (core -> cores it waits on).
    """

    def __init__(self, message, cycle_cores=None, wait_graph=None):
        super().__init__(message)
        self.cycle_cores = cycle_cores or []
        self.wait_graph = wait_graph or {}


class CycleLimitExceeded(SimError):
    """Simulation hit the cycle limit.

    Carries ``stall_graph``: per-core stall reason and wait target at the
    final cycle, for deadlock diagnosis.
    """

    def __init__(self, message, stall_graph=None):
        super().__init__(message)
        self.stall_graph = stall_graph or {}
