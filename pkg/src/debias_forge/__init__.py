"""debias-forge: a desk-scale lab for self-debiasing classifiers.

Pipeline: generate a synthetically biased classification task, train a
shallow model to flag biased examples, train a main model under debiased
objectives (reweighting, product-of-experts, confidence regularization)
with optional annealing, and analyze the resulting training dynamics.
"""

__version__ = "0.1.0"
