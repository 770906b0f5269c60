"""Sidecar generator for noteval corpora.

Reads notes from a corpus directory and writes one embedding sidecar
file per (note, kind).  Talks to the evaluation harness exclusively
through the documented file formats: the corpus layout on the way in,
the sidecar format on the way out.  A deterministic stub backend covers
environments without model weights; neural backends are optional.
"""

__version__ = "0.1.0"
