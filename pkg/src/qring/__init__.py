"""Simulator for a ring of attractively coupled particles acting as a
collective meter for a single triggered quantum particle.

The package's modules follow the pipeline: ``grid`` (discretization),
``model`` (potentials, order variable, energy), ``init`` (seeded initial
states), ``integrator`` (split-step evolution), ``measurement`` (regime
checks and outcome classification), ``ensemble`` (repeated-trial
statistics), ``cli`` (reproducible runs).
"""

__version__ = "0.1.0"
