"""Benchmark harness and operator CLI."""
