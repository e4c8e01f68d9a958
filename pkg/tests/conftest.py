import os
import sys
from fractions import Fraction

import pytest

# Add the project root to the Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.history import ActionSymbol, PerceptSymbol
from core.plugin_manager import PluginManager

A0, A1 = ActionSymbol(0), ActionSymbol(1)
X0, X1 = PerceptSymbol(0), PerceptSymbol(1)

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config")


def percepts(*bits):
    return tuple(PerceptSymbol(b) for b in bits)


def actions(*indices):
    return tuple(ActionSymbol(i) for i in indices)


@pytest.fixture
def manager():
    return PluginManager(validation_depth=2)


@pytest.fixture
def quarter():
    return Fraction(1, 4)
