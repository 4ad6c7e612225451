"""Calibrated thresholds used by the experiments and their acceptance checks.

The asymptotic statements these experiments probe carry no constants, so
every number below was fixed either by an exact computation or by a pilot run
before the checks were written.  Provenance is given next to each value.
Changing any of them changes what the acceptance suite asserts.
"""

CALIBRATION_VERSION = "1"

# Star graph: proof threshold on the leaf product n1*n2*n3, as a fraction of n^3.
STAR_DIP_FACTOR = 0.037025

# RPS absorption-time scaling on K_n, log-log slope of the median.
# Pilot (exact pairing, thirds, n = 125..1000): slope 1.99.
RPS_SLOPE_WINDOW = (1.6, 2.4)

# RPS coin-flip consensus at n = 1000: tolerated frequency window per winner.
RPS_FREQ_WINDOW = (0.30, 0.3667)

# Wolves-and-sheep at n = 20000, eps = 0.1: required all-X fraction.  Taken as
# given.  A pilot estimate of the mean wolf share at sheep exhaustion puts the
# attainable value near 0.58, so this check is expected to fail at this n.
WS_ALL_X_MIN = 0.75

# Counterexample protocol: minimum ratio of successive mean absorption times
# for n = 9, 12, 15, 18.  Exact chain solve gives ratios 2.89, 2.68, 2.61.
COUNTEREXAMPLE_RATIO_MIN = 1.5

# Star contrast: median absorption steps of the same composition on K_150.
# Pilot median about 1.3e4.
COMPLETE_MEDIAN_MAX = 10**6

# Share of dipping star trials that must show a recovery of the product.
STAR_RECOVERY_SHARE = 0.9

# RK4 order check: error ratio when halving h, at h = 0.1 vs 0.05 over one
# period (measured 15.996).  At h = 1e-3 the return error is at roundoff, so
# the ratio is only measurable at coarse steps.
RK4_RATIO_WINDOW = (14.0, 18.0)
RK4_ORDER_STEPS = (0.1, 0.05)
