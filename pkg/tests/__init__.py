"""Test helpers for bamlab."""
