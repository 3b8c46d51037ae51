"""Rice grain image analysis and grading."""

__version__ = "0.1.0"
