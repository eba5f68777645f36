"""
pmf-sasv - Time-domain PMF embeddings for spoofing-robust speaker verification.
"""

__version__ = "1.0.0"
