"""Cyber-insurance pricing for smart-home vulnerability graphs.

Simulates per-business-line losses from a directed vulnerability graph with
noisy-OR exploitation, prices policies under four actuarial premium
principles, and searches for deductibles and premiums that keep portfolio
loss ratios inside a permissible target.
"""

__version__ = "0.1.0"
