"""Flat array encodings shared by both kernel backends.

Domains are lowered to a float64 table with one row per boundary component,
profiles to a second table; kernels never see Python objects.
"""

import numpy as np

# component types
OUTER_SPHERE = 0  # exterior of a ball: absorbed when |p - c| >= radius
BALL = 1
THORN = 2
CYLSEG = 3  # solid finite cylinder with flat ends
CYL_INNER = 4  # solid infinite cylinder about an axis line
CYL_OUTER = 5  # exterior of an infinite cylinder
HALFSPACE = 6  # {p : n.p >= h}

# component row layout
C_TYPE = 0
C_A = 1  # 3 slots: centre / axis / normal / segment start
C_B = 4  # 3 slots: segment end
C_RADIUS = 7  # radius, thorn inner radius, halfspace offset
C_CLIP = 8
C_TWO_SIDED = 9
C_PROF = 10
C_ZA = 11  # thorn: z of the inner-sphere corner
C_PHIA = 12
C_ZB = 13  # thorn: z of the clip-sphere corner
C_PHIB = 14
C_F0 = 15  # thorn: f(0) (frozen value)
C_SEGLEN = 16
C_TERMINAL = 17
ROW_WIDTH = 18

# profile families / layout
FAM_POWER = 0
FAM_SUBEXP = 1
FAM_TABLE = 2
P_FAMILY = 0
P_ZFLOOR = 1
P_A1 = 2
P_A2 = 3
P_NTAB = 4
P_ZMONO = 5  # f is nonincreasing below this z and nondecreasing above it
P_TAB = 6  # log z values, then log f values

# probe kinds for occupation kernels
PROBE_NONE = 0
PROBE_BALL = 1
PROBE_BAND = 2
PROBE_WIDTH = 7

# termination codes (non-negative codes are component indices)
TERM_EXHAUSTED = -1
TERM_MAX_STEPS = -2
TERM_HORIZON = -3

# random stream tags; distinct tags give independent streams for the same seed
TAG_WOS = 1
TAG_EM = 2
TAG_WL = 3
TAG_AUX = 4
TAG_AUX2 = 5
TAG_GREEN = 6


def empty_row() -> np.ndarray:
    row = np.zeros(ROW_WIDTH)
    row[C_CLIP] = np.inf
    row[C_TERMINAL] = 1.0
    return row
