"""Pauli-path spoofing of benchmarks for minimal QSVT circuits."""

__version__ = "0.1.0"
