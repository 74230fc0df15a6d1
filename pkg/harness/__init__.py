"""Experiment harness: CLI, experiment specs and result persistence."""

from .pipeline import ber_campaign, run

__all__ = ['ber_campaign', 'run']
