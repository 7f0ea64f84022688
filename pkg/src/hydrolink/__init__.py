"""Simulator for a dynamic water-air optical wireless link.

Subpackages cover the wind-wave spectrum, harmonic sea-surface synthesis,
interface optics, receiver-screen ray tracing, an episodic alignment
environment, a DDPG learner, and the benchmark/CLI layer.
"""

__version__ = "0.1.0"
