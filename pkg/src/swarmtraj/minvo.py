"""Minimum-volume enclosing-simplex polynomial bases for degrees 1-3.

For each degree n, the basis (lambda_0 .. lambda_n) is nonnegative on the
segment and sums to one, so a polynomial curve written in this basis lies in
the convex hull of its control points, and the enclosing simplex has minimum
volume among all such bases.

Degrees 1 and 2 have closed forms. For degree 2 the optimal triangle around
the parabola arc has its slanted sides tangent at t = +-1/sqrt(3), giving

    lambda_0 = (3t^2 - 2*sqrt(3)*t + 1)/8,   lambda_1 = 3(1 - t^2)/4,
    lambda_2 = (3t^2 + 2*sqrt(3)*t + 1)/8          on t in [-1, 1].

For degree 3 the optimum has the tangency structure

    lambda_0(t) = -a (t - 1)(t - r)^2,   lambda_1(t) = b (t + 1)(t - s)^2,
    lambda_2(t) = lambda_1(-t),          lambda_3(t) = lambda_0(-t),

with a, b > 0 fixed by partition of unity and (r, s) maximizing |det A|
(equivalently minimizing simplex volume). The root values below were obtained
by solving the stationarity conditions at 50-digit precision (see
scripts/derive_minvo_basis.py); they reproduce the published 4-digit matrix.
Keeping the factored form makes nonnegativity exact up to rounding.
"""

from functools import lru_cache

import numpy as np

# Interior tangency roots of the optimal degree-3 basis on [-1, 1].
CUBIC_ROOT_R = 0.030882544899137773
CUBIC_ROOT_S = 0.7735485873462159


def _cubic_rows():
    r, s = CUBIC_ROOT_R, CUBIC_ROOT_S
    b = 1.0 / (2.0 * (r * r * (2 * s - 1) / (2 * r + 1) + s * s))
    a = b * (2 * s - 1) / (2 * r + 1)
    l0 = np.array([-a, a * (2 * r + 1), -a * (r * r + 2 * r), a * r * r])
    l1 = np.array([b, b * (1 - 2 * s), b * (s * s - 2 * s), b * s * s])
    flip = np.array([-1.0, 1.0, -1.0, 1.0])
    return np.array([l0, l1, l1 * flip, l0 * flip])


def _rows_on_minus1_1(degree: int) -> np.ndarray:
    """Row i = descending power coefficients of lambda_i on t in [-1, 1]."""
    if degree == 1:
        return np.array([[-0.5, 0.5], [0.5, 0.5]])
    if degree == 2:
        c = np.sqrt(3.0) / 4.0
        return np.array(
            [
                [3.0 / 8.0, -c, 1.0 / 8.0],
                [-3.0 / 4.0, 0.0, 3.0 / 4.0],
                [3.0 / 8.0, c, 1.0 / 8.0],
            ]
        )
    if degree == 3:
        return _cubic_rows()
    raise ValueError(f"no basis tabulated for degree {degree}")


def _reparam_to_unit(rows: np.ndarray) -> np.ndarray:
    """Substitute t = 2*tau - 1 so the basis lives on tau in [0, 1]."""
    degree = rows.shape[1] - 1
    sub = np.polynomial.Polynomial([-1.0, 2.0])
    out = np.zeros_like(rows)
    for i, row in enumerate(rows):
        composed = np.polynomial.Polynomial(row[::-1].copy())(sub)
        coef = np.zeros(degree + 1)
        coef[: len(composed.coef)] = composed.coef
        out[i] = coef[::-1]
    return out


@lru_cache(maxsize=None)
def basis_matrix(degree: int) -> np.ndarray:
    """(degree+1, degree+1) matrix M with M[k, i] = coeff of tau^(degree-k)
    in lambda_i on tau in [0, 1]; curve coeffs C = M @ vertices."""
    return _reparam_to_unit(_rows_on_minus1_1(degree)).T.copy()


@lru_cache(maxsize=None)
def basis_matrix_inv(degree: int) -> np.ndarray:
    return np.linalg.inv(basis_matrix(degree))


def evaluate_basis(degree: int, tau: np.ndarray) -> np.ndarray:
    """Basis values, shape (len(tau), degree+1)."""
    tau = np.asarray(tau, dtype=float)
    mono = np.vander(tau, degree + 1)  # descending powers
    return mono @ basis_matrix(degree)
