"""Pose normalization of long-sleeve garment images."""

__version__ = "0.1.0"
