"""Acceptance suite: revenue guarantees and checker soundness."""
