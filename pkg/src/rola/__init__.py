"""Multi-agent actor-critic with local critics trained from a centralized
joint-action critic, plus IA2C, Central-V, COMA and ECA baselines."""

__version__ = "0.1.0"
