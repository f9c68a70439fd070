"""Link-level model of beamformed base-station discovery with a GLRT detector."""

__version__ = "0.1.0"
