"""Shared density fixtures."""

from __future__ import annotations

import pytest

from epilab import GaussianDensity, correlated_gaussian, quartic_coupling, uniform_box


@pytest.fixture(scope="session")
def quartic():
    return quartic_coupling(0.5)


@pytest.fixture(scope="session")
def quartic_anti():
    return quartic_coupling(-0.5)


@pytest.fixture(scope="session")
def uniform2():
    return uniform_box()


@pytest.fixture(scope="session")
def grid_gauss_pos():
    return correlated_gaussian(0.5)


@pytest.fixture(scope="session")
def grid_gauss_neg():
    return correlated_gaussian(-0.5)


@pytest.fixture(scope="session")
def gauss_pos():
    return GaussianDensity.equicorrelated(0.5)


@pytest.fixture(scope="session")
def gauss_neg():
    return GaussianDensity.equicorrelated(-0.5)
