# Dickey-Fuller tau distribution tables for a single unit root.
#
# Finite-sample critical values follow the MacKinnon (2010) response surface
#   cv(T) = b0 + b1/T + b2/T**2 + b3/T**3
# with rows for the 1%, 5% and 10% levels.  Approximate p-values follow the
# MacKinnon (1994) normal-CDF polynomial fits.

CRITICAL_SURFACE = {
    "n": {
        0.01: (-2.56574, -2.2358, -3.627, 0.0),
        0.05: (-1.94100, -0.2686, -3.365, 31.223),
        0.10: (-1.61682, 0.2656, -2.714, 25.364),
    },
    "c": {
        0.01: (-3.43035, -6.5393, -16.786, -79.433),
        0.05: (-2.86154, -2.8903, -4.234, -40.040),
        0.10: (-2.56677, -1.5384, -2.809, 0.0),
    },
    "ct": {
        0.01: (-3.95877, -9.0531, -28.428, -134.155),
        0.05: (-3.41049, -4.3904, -9.036, -45.374),
        0.10: (-3.12705, -2.5856, -3.925, -22.380),
    },
}

TAU_MAX = {"n": float("inf"), "c": 2.74, "ct": 0.7}
TAU_MIN = {"n": -19.04, "c": -18.83, "ct": -16.18}
TAU_STAR = {"n": -1.04, "c": -1.61, "ct": -2.89}

# Polynomial coefficients in increasing powers of the statistic.
TAU_SMALLP = {
    "n": (0.6344, 1.2378, 0.032496),
    "c": (2.1659, 1.4412, 0.038269),
    "ct": (3.2512, 1.6047, 0.049588),
}
TAU_LARGEP = {
    "n": (0.4797, 0.93557, -0.06999, 0.033066),
    "c": (1.7339, 0.93202, -0.12745, -0.010368),
    "ct": (2.5261, 0.61654, -0.37956, -0.060285),
}
