from fedfaas.agent.routing import (
    ManagerAdvertisement,
    NoManagers,
    RouteReason,
    RoutingDecision,
    dispatch_budget,
    route_task,
)
from fedfaas.agent.strategy import (
    ProviderConfig,
    ScaleAction,
    StrategySnapshot,
    strategy_tick,
)

__all__ = [
    "ManagerAdvertisement",
    "NoManagers",
    "RouteReason",
    "RoutingDecision",
    "dispatch_budget",
    "route_task",
    "ProviderConfig",
    "ScaleAction",
    "StrategySnapshot",
    "strategy_tick",
]
