"""Nelson-Siegel yield-curve factors with frequentist and Bayesian VAR
forecasting, structural identification and out-of-sample evaluation."""

__version__ = "0.1.0"
