from .compare import BoundReport, build_individual_model, oracle_compare
from .disaggregate import (
    DisaggregatedSchedule,
    VehicleSchedule,
    aggregation_residual,
    disaggregate,
    schedule_violations,
)
from .individual import DEFAULT_BUDGET, build_individual_fleet, individual_size, vehicle_slots
