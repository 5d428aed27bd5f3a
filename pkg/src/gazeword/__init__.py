"""Unknown-word detection from gaze streams over laid-out documents."""

__version__ = "0.1.0"
