"""Speaker anonymization and privacy/utility evaluation for pathological speech."""

__version__ = "0.1.0"
