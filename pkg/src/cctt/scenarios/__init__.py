"""Bundled scenario documents (``*.scn``, JSON)."""
