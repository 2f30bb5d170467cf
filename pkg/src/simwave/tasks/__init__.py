"""Experiment families: operator targets, SIM-LIA classification and the digital baseline."""
