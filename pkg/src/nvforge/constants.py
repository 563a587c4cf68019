"""Physical constants and calibration tables shared across the package.

Energies are in nJ, lengths in nm unless a suffix says otherwise, temperatures
in kelvin once converted, times in the unit named by each signature.
"""

# CODATA value, eV/K
BOLTZMANN_EV_PER_K = 8.617333262e-5

CELSIUS_OFFSET = 273.15

# Fraction of the pulse energy transmitted by the writing objective.
OBJECTIVE_TRANSMISSION = 0.7

NM2_PER_CM2 = 1e14
PS_PER_S = 1e12
PS_PER_NS = 1000.0

# Waveplate calibration of the writing apparatus: (before objective, after
# objective) pulse energies in nJ. The first entry is the high-energy marker
# row written to graphitize deliberately; the remaining 25 are the fabrication
# rows in write order (decreasing energy).
PULSE_ENERGY_TABLE_NJ = [
    (118.0, 82.6),
    (61.8, 43.2),
    (55.2, 38.6),
    (49.0, 34.3),
    (43.2, 30.2),
    (37.7, 26.4),
    (36.4, 25.5),
    (35.1, 24.6),
    (33.9, 23.7),
    (32.6, 22.8),
    (31.4, 22.0),
    (30.2, 21.1),
    (29.0, 20.3),
    (27.9, 19.5),
    (26.8, 18.7),
    (25.7, 18.0),
    (24.6, 17.2),
    (23.6, 16.5),
    (22.5, 15.8),
    (21.5, 15.1),
    (20.5, 14.4),
    (19.6, 13.7),
    (18.7, 13.1),
    (17.7, 12.4),
    (16.9, 11.8),
    (16.0, 11.2),
]

MARKER_ROW_ENERGY_NJ = PULSE_ENERGY_TABLE_NJ[0][0]

# Default 25-row fabrication ladder (marker row excluded), highest energy first.
FABRICATION_ENERGIES_NJ = [before for before, _ in PULSE_ENERGY_TABLE_NJ[1:]]

# Damage thresholds in before-objective nJ: minimum writing energy, onset of
# pre-anneal visible fluorescence, onset of graphitization.
DEFAULT_E_TH_NJ = 16.0
DEFAULT_E1_NJ = 31.0
DEFAULT_E2_NJ = 36.4

# g2(0) class boundaries: one < 0.32 <= two < 0.65 <= three < 0.9.
DEFAULT_CLASS_BOUNDARIES = (0.32, 0.65, 0.9)
