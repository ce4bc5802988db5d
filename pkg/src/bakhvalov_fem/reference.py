"""Published energy-norm errors ||u^I - u^N||_eps for the benchmark problem.

Keys are exponents k (eps = 10^-k); values are errors for N = 8 .. 256 and
the log2 rates between consecutive N.
"""

REFERENCE_NS = (8, 16, 32, 64, 128, 256)

REFERENCE_ERRORS = {
    2: (0.132e-01, 0.167e-02, 0.209e-03, 0.264e-04, 0.334e-05, 0.426e-06),
    3: (0.223e-01, 0.336e-02, 0.386e-03, 0.439e-04, 0.525e-05, 0.647e-06),
    4: (0.281e-01, 0.295e-02, 0.353e-03, 0.498e-04, 0.801e-05, 0.117e-05),
    5: (0.235e-01, 0.266e-02, 0.339e-03, 0.508e-04, 0.941e-05, 0.199e-05),
    6: (0.208e-01, 0.249e-02, 0.329e-03, 0.504e-04, 0.952e-05, 0.212e-05),
    7: (0.195e-01, 0.241e-02, 0.324e-03, 0.501e-04, 0.952e-05, 0.213e-05),
    8: (0.191e-01, 0.239e-02, 0.323e-03, 0.501e-04, 0.953e-05, 0.213e-05),
}

REFERENCE_RATES = {
    2: (2.99, 2.99, 2.99, 2.98, 2.97),
    3: (2.73, 3.12, 3.14, 3.06, 3.02),
    4: (3.25, 3.07, 2.82, 2.64, 2.77),
    5: (3.14, 2.98, 2.74, 2.43, 2.24),
    6: (3.06, 2.92, 2.71, 2.40, 2.17),
    7: (3.02, 2.90, 2.69, 2.40, 2.16),
    8: (3.00, 2.89, 2.69, 2.39, 2.16),
}

# relative error tolerance per eps exponent; the two largest eps are looser
ERROR_TOLERANCE = {2: 0.20, 3: 0.20, 4: 0.10, 5: 0.10, 6: 0.10, 7: 0.10, 8: 0.10}
RATE_TOLERANCE = 0.1


def exponent_of(epsilon: float) -> int | None:
    import math

    k = -math.log10(epsilon)
    return int(round(k)) if abs(k - round(k)) < 1e-9 else None
