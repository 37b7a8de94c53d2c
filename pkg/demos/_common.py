"""Shared output location for the demo scripts."""

from pathlib import Path

OUTPUT = Path(__file__).resolve().parent / "_output"
OUTPUT.mkdir(exist_ok=True)
