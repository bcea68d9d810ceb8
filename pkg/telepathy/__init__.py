"""
Telepathy: nonlocal and latency-constrained games, their classical and quantum values,
and a referee harness that enforces non-communication through latency.
"""

__version__ = "0.1.0"
