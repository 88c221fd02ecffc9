"""Growing regulatory networks and conditioning-state-variable learners."""

__version__ = "0.1.0"
