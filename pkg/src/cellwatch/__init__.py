"""Cell-level telemetry analytics: detection, fingerprinting, fog simulation."""

__version__ = "0.1.0"
