"""Self-consistent Stieltjes transform of the preconditioned sample Gram.

In the proportional regime (n, d -> infinity, d/n -> gamma > 1) the
spectrum of (1/n) X P X^T converges, and its companion Stieltjes
transform m(z) evaluated at z = -lambda <= 0 solves

    1/m = lambda + gamma * E[tau / (1 + tau*m)],    tau ~ F_XP,

where F_XP is the limiting spectrum of Sigma_X * P.  For gamma > 1 the
ridgeless limit lambda -> 0+ can be taken directly: m(0) is the unique
positive root of

    1 = gamma * E[tau*m / (1 + tau*m)],

because the left side grows strictly from 0 to gamma > 1.  The
derivative has a closed form in terms of m itself,

    m'(-lambda) = 1 / (1/m^2 - gamma * E[tau^2 / (1 + tau*m)^2]),

whose denominator is strictly positive at lambda = 0 for gamma > 1 by
Jensen's inequality.  The asymptotic variance and bias of the
preconditioned interpolant are simple functionals of m and m'; see
``risk_theory``.

The solver uses bracketed bisection (guaranteed for any atom list,
however ill-conditioned) followed by Newton refinement to drive the
fixed-point defect to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateSpectrumError, NumericalError,
                     OutOfRegimeError)
from .spectra import SpectralMeasure

__all__ = ["StieltjesSolution", "solve_m", "m_derivative",
           "finite_diff_check"]

# Bisection target on the fixed-point defect; Newton then polishes.
_BISECT_TOL = 1e-13
_ITERATION_BUDGET = 10_000


@dataclass(frozen=True)
class StieltjesSolution:
    """The root m(-lambda) together with its derivative and diagnostics.

    ``residual`` is the fixed-point defect
    ``m - 1/(lambda + gamma*E[tau/(1+tau*m)])`` at the returned root.
    """

    m0: float
    m_prime: float
    lam: float
    gamma: float
    residual: float

    @property
    def ratio(self) -> float:
        """m'/m^2, the quantity entering both risk formulas."""
        return self.m_prime / self.m0**2


def _defect(m, taus, ws, gamma, lam):
    """phi(m) = m*(lambda + gamma*E[tau/(1+tau*m)]) - 1, increasing in m."""
    return lam * m + gamma * np.sum(ws * taus * m / (1.0 + taus * m)) - 1.0


def _defect_slope(m, taus, ws, gamma, lam):
    return lam + gamma * np.sum(ws * taus / (1.0 + taus * m) ** 2)


def solve_m(f_xp: SpectralMeasure, gamma: float, lam: float = 0.0
            ) -> StieltjesSolution:
    """Solve the self-consistent equation at z = -lam (lam >= 0).

    Parameters
    ----------
    f_xp
        Limiting spectrum of Sigma_X * P (from ``precondition_spectrum``).
    gamma
        Overparameterization ratio d/n; must exceed 1.
    lam
        Ridge offset; ``lam = 0`` solves the ridgeless equation directly,
        which is exactly the lambda -> 0+ limit when gamma > 1.

    Returns
    -------
    StieltjesSolution with the root, its derivative, and the residual.
    """
    if gamma <= 1.0:
        raise OutOfRegimeError(
            f"gamma must be > 1 (overparameterized regime); got {gamma!r}")
    if lam < 0:
        raise OutOfRegimeError(f"lam must be >= 0; got {lam!r}")
    taus = f_xp.values
    ws = f_xp.weights
    if not np.any(taus > 0):
        raise DegenerateSpectrumError(
            "the preconditioned spectrum has no strictly positive atom")

    mean_tau = float(np.sum(ws * taus))
    lo, hi = 1e-16 / mean_tau, 1e16 / mean_tau
    f_lo = _defect(lo, taus, ws, gamma, lam)
    f_hi = _defect(hi, taus, ws, gamma, lam)
    if not (f_lo < 0 < f_hi):
        raise NumericalError(
            "stieltjes", "solve_m",
            f"initial bracket [{lo:.3e}, {hi:.3e}] does not straddle the "
            f"root (phi(lo)={f_lo:.3e}, phi(hi)={f_hi:.3e})")

    iterations = 0
    m = 0.5 * (lo + hi)
    # Bisection: halve the bracket until the defect is at bisection
    # tolerance (or the bracket degenerates to adjacent floats).
    while iterations < _ITERATION_BUDGET:
        m = 0.5 * (lo + hi)
        fm = _defect(m, taus, ws, gamma, lam)
        iterations += 1
        if abs(fm) <= _BISECT_TOL or (hi - lo) <= np.spacing(lo):
            break
        if fm < 0:
            lo = m
        else:
            hi = m
    else:
        raise NumericalError("stieltjes", "solve_m",
                             "bisection failed to converge",
                             residual=float(_defect(m, taus, ws, gamma, lam)))

    # Newton refinement from inside the final bracket.
    for _ in range(8):
        fm = _defect(m, taus, ws, gamma, lam)
        if fm == 0.0:
            break
        step = fm / _defect_slope(m, taus, ws, gamma, lam)
        m_next = m - step
        if not (lo <= m_next <= hi):
            break
        if m_next == m:
            break
        m = m_next
        iterations += 1

    fm = _defect(m, taus, ws, gamma, lam)
    # Convert the defect to the fixed-point residual in m units.
    residual = m * fm / (fm + 1.0)
    if abs(residual) > 1e-12 * max(1.0, m):
        raise NumericalError("stieltjes", "solve_m",
                             "root not resolved to tolerance",
                             residual=float(residual))

    m_prime = _derivative_from_root(m, taus, ws, gamma)
    return StieltjesSolution(m0=float(m), m_prime=float(m_prime),
                             lam=float(lam), gamma=float(gamma),
                             residual=float(residual))


def _derivative_from_root(m, taus, ws, gamma):
    denom = 1.0 / m**2 - gamma * np.sum(ws * taus**2 / (1.0 + taus * m) ** 2)
    if denom <= 0:
        raise NumericalError(
            "stieltjes", "m_derivative",
            "nonpositive derivative denominator; the evaluation point sits "
            "too close to the spectrum edge (unreachable for gamma > 1 at "
            "lam = 0)", residual=float(denom))
    return 1.0 / denom


def m_derivative(f_xp: SpectralMeasure, gamma: float,
                 sol: StieltjesSolution) -> float:
    """m'(-lambda) from the closed form evaluated at the solved root."""
    return float(_derivative_from_root(sol.m0, f_xp.values, f_xp.weights,
                                       gamma))


def finite_diff_check(f_xp: SpectralMeasure, gamma: float, lam: float,
                      h: float) -> float:
    """Central finite-difference estimate of m'(-lambda); test oracle.

    Requires ``lam >= h > 0`` so both evaluation points stay in
    ``lam >= 0``.  Since m is a function of z = -lambda, the derivative
    in z is ``(m(lam - h) - m(lam + h)) / (2h)``.
    """
    if h <= 0:
        raise OutOfRegimeError("h must be > 0")
    if lam < h:
        raise OutOfRegimeError("need lam >= h for the central difference")
    m_minus = solve_m(f_xp, gamma, lam - h).m0
    m_plus = solve_m(f_xp, gamma, lam + h).m0
    return (m_minus - m_plus) / (2.0 * h)
