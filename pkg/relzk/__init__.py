"""
Relativistic zero-knowledge proof of graph 3-colourability.
Instance generation, shared-randomness expansion, the two-prover round protocol,
cheating-strategy analysis and light-cone transcript auditing.
"""

__version__ = "0.1.0"
