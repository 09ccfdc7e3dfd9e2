"""Open-ended co-evolution of walking agents and procedurally generated terrains."""

__version__ = "0.1.0"
