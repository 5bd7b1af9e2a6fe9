"""Comparison methods evaluated against the discriminative SVM."""
