"""sctest: hybrid smart-contract testing engine.

Coverage-guided fuzzing over an EVM-subset interpreter, with plateau
escalation to a concolic execution engine or a model-driven fuzz-target
generator hardened by an iterative repair loop.
"""

__version__ = "0.1.0"
