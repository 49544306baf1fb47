"""Simulation of momentum-conserving position measurements.

Two measurement models (``ozawa``: pointer commutes with total momentum;
``alt``: it does not), their inaccuracy densities, repeatability widths and
the error/apparatus-momentum trade-off bounds.
"""
__version__ = "0.1.0"
