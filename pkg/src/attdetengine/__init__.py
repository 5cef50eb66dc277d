"""AttDetEngine: detecção MIMO por atenção, detectores clássicos e curvas de BER."""

__version__ = "0.1.0"
