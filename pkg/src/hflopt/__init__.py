"""Latency-minimising schedules and UE-to-edge association for cloud-edge-device federated learning."""

__version__ = "0.1.0"
