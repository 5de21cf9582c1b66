"""Convergence-order estimation for grid and step refinement studies."""

import numpy as np


def fit_order(resolutions, errors):
    """Least-squares slope of log(error) against log(1/resolution).

    A method of order p on a ladder of resolutions n gives errors
    proportional to n^-p; the returned value is the fitted p.
    """
    resolutions = np.asarray(resolutions, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if resolutions.shape != errors.shape or resolutions.size < 2:
        raise ValueError("need matching ladders with at least two entries")
    if np.any(errors <= 0.0):
        raise ValueError("errors must be positive for a log-log fit")
    slope, _ = np.polyfit(np.log(resolutions), np.log(errors), 1)
    return -float(slope)


def l1_error(approx, exact, mask=None):
    """Mean absolute difference over all stated values.

    ``mask`` selects which entries participate (e.g. to skip locations
    where the exact solution is undefined).
    """
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    diff = np.abs(approx - exact)
    if mask is not None:
        diff = diff[np.asarray(mask, dtype=bool)]
    if diff.size == 0:
        raise ValueError("no values selected for the error norm")
    return float(np.mean(diff))
