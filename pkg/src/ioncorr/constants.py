"""Physical constants and experiment defaults for 40Ca+ chains."""

import math

from scipy import constants as _c

TWO_PI = 2.0 * math.pi

#: Coulomb constant times e^2, J m.
COULOMB_E2 = _c.e**2 / (4.0 * math.pi * _c.epsilon_0)

#: 40Ca+ mass (neutral 40Ca minus one electron), kg.
CA40_MASS = 39.962590863 * _c.atomic_mass - _c.m_e
ELEMENTARY_CHARGE = _c.e

#: S1/2 <-> P1/2 natural linewidth, rad/s.
LINEWIDTH = TWO_PI * 21.2e6
WAVELENGTH = 397e-9
WAVENUMBER = TWO_PI / WAVELENGTH

#: Highest axial frequency reachable (U_tip = 1200 V), rad/s.
AXIAL_FREQUENCY_MAX = TWO_PI * 1.1e6
#: Lowest axial frequency of the tip-voltage range (U_tip = 50 V); omega_z ~ sqrt(U_tip).
AXIAL_FREQUENCY_MIN = AXIAL_FREQUENCY_MAX * math.sqrt(50.0 / 1200.0)

#: Cooling-laser detuning (red), rad/s.
DETUNING = -TWO_PI * 12e6
NUMERICAL_APERTURE = 0.07

#: Angle between the drive wavevector and the chain (detection) axis.
#: Not stated for the experiment; 45 degrees keeps the ion phases sensitive
#: to the axial spacing while 70 nm jitter leaves usable fringe contrast.
DRIVE_ANGLE = math.pi / 4

JITTER_RMS = 70e-9
DARK_PROBABILITY = 0.4
N_REALIZATIONS = 1000
