"""Shared fixtures: seeded generators and small filter banks."""

import numpy as np
import pytest

from pmf_sasv.filterbank import FilterBankConfig, design_bank

from helpers import SAMPLE_RATE


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_bank():
    """Two filter pairs with short inverse filters."""
    return design_bank(SAMPLE_RATE, FilterBankConfig(n_pairs=2, inverse_taps=64))


@pytest.fixture(scope="session")
def full_bank():
    return design_bank(SAMPLE_RATE)
