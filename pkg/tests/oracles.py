"""Independent oracles for the simulation tests.

Everything here computes expectations by quadrature or dense-grid
enumeration over the hidden polarization axis, never through the simulation
code paths it is used to check.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

PI = math.pi


def uniform_axis_mean(f, n_grid: int | None = None) -> float:
    """Average f(lambda) over lambda uniform on [0, pi).

    Uses adaptive quadrature by default; pass ``n_grid`` to force midpoint
    enumeration (needed for discontinuous integrands).
    """
    if n_grid is None:
        value, _ = quad(f, 0.0, PI, limit=200)
        return value / PI
    lam = (np.arange(n_grid) + 0.5) * (PI / n_grid)
    return float(np.mean(f(lam)))


def malus_pass_fraction() -> float:
    """Both-pass probability of a perpendicular singlet pair at aligned polarizers."""
    return uniform_axis_mean(lambda u: math.cos(u) ** 2 * math.sin(u) ** 2)


def malus_joint_plus_minus() -> float:
    """P(+,-) for a perpendicular singlet pair, Malus splits, equal settings."""
    return uniform_axis_mean(lambda u: math.cos(u) ** 4)


def malus_joint_plus_plus() -> float:
    """P(+,+) for the same configuration."""
    return uniform_axis_mean(lambda u: math.cos(u) ** 2 * math.sin(u) ** 2)


def malus_correlation(phi1: float, phi2: float) -> float:
    """Product-model correlation for perpendicular pairs with Malus splits."""

    def f(lam):
        left = math.cos(lam - phi1) ** 2 - math.sin(lam - phi1) ** 2
        lr = lam + PI / 2
        right = math.cos(lr - phi2) ** 2 - math.sin(lr - phi2) ** 2
        return left * right

    return uniform_axis_mean(f)


def sawtooth_correlation(phi1: float, phi2: float) -> float:
    """Deterministic-sign correlation for perpendicular pairs, closed form."""
    delta = abs(phi1 - phi2) % PI
    w = min(delta, PI - delta)
    return 4.0 * w / PI - 1.0


def sign_product_correlation_grid(phi1: float, phi2: float, n_grid: int = 100_000) -> float:
    """Same quantity by dense-grid enumeration (cross-check of the closed form)."""
    lam = (np.arange(n_grid) + 0.5) * (PI / n_grid)
    sl = np.where(np.cos(2 * (lam - phi1)) >= 0, 1.0, -1.0)
    sr = np.where(np.cos(2 * (lam + PI / 2 - phi2)) >= 0, 1.0, -1.0)
    return float(np.mean(sl * sr))


def threshold_setting(tau: float, phi1: float, phi2: float, n_grid: int = 100_000):
    """(E, joint detection fraction) for the threshold model on perpendicular pairs."""
    lam = (np.arange(n_grid) + 0.5) * (PI / n_grid)
    cl = np.cos(2 * (lam - phi1))
    cr = np.cos(2 * (lam + PI / 2 - phi2))
    det = (np.abs(cl) > tau) & (np.abs(cr) > tau)
    frac = float(np.mean(det))
    if frac == 0.0:
        return math.nan, 0.0
    sl = np.where(cl[det] >= 0, 1.0, -1.0)
    sr = np.where(cr[det] >= 0, 1.0, -1.0)
    return float(np.mean(sl * sr)), frac


def threshold_chsh(tau: float, a: float, a_prime: float, b: float, b_prime: float, n_grid: int = 100_000):
    """CHSH S for the threshold model, by grid integration per setting."""
    es = [threshold_setting(tau, p1, p2, n_grid)[0] for p1, p2 in ((a, b), (a, b_prime), (a_prime, b), (a_prime, b_prime))]
    s = abs(es[0] - es[1]) + abs(es[2] + es[3])
    return s, es


def power_singlet_rate(kappa: float, phi1: float, phi2: float, n_grid: int = 100_000) -> float:
    """Detected fraction for the power model on perpendicular singlet pairs."""
    lam = (np.arange(n_grid) + 0.5) * (PI / n_grid)
    pl = np.abs(np.cos(2 * (lam - phi1))) ** kappa
    pr = np.abs(np.cos(2 * (lam + PI / 2 - phi2))) ** kappa
    return float(np.mean(pl * pr))


def power_prepared_rate(kappa: float, theta: float, phi: float) -> float:
    """Detected fraction for the power model with both photons at theta."""
    return abs(math.cos(2 * (theta - phi))) ** (2 * kappa)


def square_wave_rate(tau: float, theta: float, phi: float) -> float:
    """Threshold-model detected fraction with both photons at theta: 0 or 1."""
    return 1.0 if abs(math.cos(2 * (theta - phi))) > tau else 0.0


def ks_critical_value(n: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sided Kolmogorov-Smirnov critical value."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) / math.sqrt(n)
