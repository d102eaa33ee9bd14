"""Hybrid ensembles of a Bayesian neural network with RF, GB and SVM learners."""

__version__ = "0.1.0"
