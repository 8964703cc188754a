"""Bundled example programs and worlds."""
