"""Decentralized service-workflow orchestration.

Compiles a dataflow coordination language into an invocation DAG,
partitions it across peer workflow engines chosen by network QoS, runs
it on a dataflow engine runtime, and reproduces centralized-versus-
distributed orchestration experiments on a simulated multi-region
network.
"""

__version__ = "0.1.0"
