"""redstates - reduced states, decoherence and collapse-free measurement chains."""

__version__ = "0.1.0"
