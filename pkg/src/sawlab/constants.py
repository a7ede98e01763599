"""Physical constants and unit shorthands (SI throughout)."""

import numpy as np
from scipy.constants import e as E_CHARGE, h as H_PLANCK, hbar as HBAR

# Superconducting flux quantum h/2e
PHI0 = H_PLANCK / (2.0 * E_CHARGE)

TWO_PI = 2.0 * np.pi

GHz = 1e9
MHz = 1e6
kHz = 1e3
ns = 1e-9
us = 1e-6
pH = 1e-12
nH = 1e-9
fF = 1e-15
pF = 1e-12
