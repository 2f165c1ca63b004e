"""Bundled data files (see tools/make_bundled_dataset.py for provenance)."""
