"""Generic attacks on iterated ideal ciphers: classical ledgers, quantum cost models,
small exact simulations and adversary-matrix numerics."""

__version__ = "0.1.0"
