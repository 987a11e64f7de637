"""Self-similar expander profiles and shrinker energy audits."""
__version__ = "0.1.0"
