"""
Transfer Attack Toolkit: desk-scale transferable adversarial examples.

Crafts adversarial examples with the FGSM family and the sampling-based
gradient rescaling method, optionally through input transformations and
logit ensembles, and measures how well they transfer between classifiers.
"""

__version__ = "0.1.0"
