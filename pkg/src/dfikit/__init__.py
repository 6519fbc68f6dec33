"""Multi-level integrity calculus: interpreter, flow monitor and type checkers."""

__version__ = "0.1.0"
