"""Command-line surface and configuration models."""
