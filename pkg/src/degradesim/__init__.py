"""Event-driven simulator of QoS-assured degraded provisioning in multi-layer
elastic optical networks."""

__version__ = "0.1.0"
