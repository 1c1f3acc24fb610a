"""Pydantic models for the simulator."""
