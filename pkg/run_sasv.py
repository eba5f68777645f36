#!/usr/bin/env python3
"""
Convenience script to run the pmf-sasv toolkit from a checkout.

Usage:
    python run_sasv.py config --dump > config.toml
    python run_sasv.py --config config.toml synth --out work/corpus
    python run_sasv.py --config config.toml eval --asv work/corpus/asv_scores.txt
"""

import sys

from pmf_sasv.run import main

if __name__ == '__main__':
    sys.exit(main())
