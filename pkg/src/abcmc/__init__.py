"""Likelihood-free model choice and summary-statistic validation."""
