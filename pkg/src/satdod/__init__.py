"""Pattern-aware online energy scheduling for an Earth-observation LEO satellite."""

__version__ = "0.1.0"
