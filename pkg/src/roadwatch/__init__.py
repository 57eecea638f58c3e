"""Vehicle telemetry pipeline: crash/pothole detection, ingestion, dispatch, analytics."""

__version__ = "0.1.0"
