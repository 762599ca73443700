"""Neural jump SDE option pricing with Gumbel-Softmax jumps."""

__version__ = "0.1.0"
