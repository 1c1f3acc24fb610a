"""Core utilities (config/errors)."""
