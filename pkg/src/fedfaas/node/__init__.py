from fedfaas.node.containers import (
    ColdStartProfile,
    ContainerSpec,
    ReconcileAction,
    SlotState,
    WorkerSlot,
    allocate_containers,
    expire_idle,
    reconcile_slots,
)

__all__ = [
    "ColdStartProfile",
    "ContainerSpec",
    "ReconcileAction",
    "SlotState",
    "WorkerSlot",
    "allocate_containers",
    "expire_idle",
    "reconcile_slots",
]
