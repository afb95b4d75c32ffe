"""Exception hierarchy shared by the model builders, solver layer and CLI."""

from __future__ import annotations


class FleetClusterError(Exception):
    """Base class for all package errors."""


class ScenarioError(FleetClusterError):
    """Invalid or inconsistent scenario input."""


class BlockOutOfDay(ScenarioError):
    pass


class DegenerateBlock(ScenarioError):
    pass


class MissingTemperature(ScenarioError):
    pass


class BigMTooSmall(ScenarioError):
    pass


class MissingCoupling(FleetClusterError):
    """A subsystem was emitted before the handles it depends on."""


class UnregisteredVariable(FleetClusterError):
    pass


class ModelError(FleetClusterError):
    """Malformed model construction (duplicate names, bad bounds, ...)."""


class NameTooLong(ModelError):
    pass


class BackendUnavailable(FleetClusterError):
    pass


class Infeasible(FleetClusterError):
    def __init__(self, message: str, hint: dict | None = None):
        super().__init__(message)
        self.hint = hint or {}


class TooLarge(FleetClusterError):
    pass


class RecoveryFailed(FleetClusterError):
    """Disaggregation could not realise the cluster solution per vehicle."""

    def __init__(self, message: str, certificate: dict):
        super().__init__(message)
        self.certificate = certificate


class ValidationFailed(ScenarioError):
    def __init__(self, report):
        super().__init__("; ".join(str(e) for e in report.errors))
        self.report = report


class InfeasibleBlockWarning(UserWarning):
    """No vehicle type can cover a block's energy even at full capacity."""


class EmptyDeliveryWindow(UserWarning):
    pass
