"""Federated function-as-a-service platform.

A central control service brokers task requests to user-deployed endpoint
agents.  Agents provision per-node managers through a provider interface,
route tasks to warm execution containers, and return results over
intermittent connections.
"""

__version__ = "0.1.0"
