"""Second-order effective Hamiltonians for atoms coupled to the quantized field."""

__version__ = "0.1.0"
