"""Closed-form statistics: incomplete gamma, no-fading SNR law, delay and
energy series with their scaling bounds, concentration bounds, diversity order.

The no-fading SNR law is the integer-shape composite of the random path
gain and the misalignment gain; it reduces to finite combinations of
powers, logs and upper incomplete gamma functions of integer order, valid
for either sign of (z - rho) through the finite-series continuation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DegenerateParams, DomainError
from .params import GammaAbsorption, ThzLinkParams

EULER_GAMMA = 0.5772156649015329
Z_RHO_TOL = 1e-6          # reject the removable singularity instead of guessing
_CDF_RAW_TOL = 1e-9       # raw closed-form value must be in [-tol, 1+tol]


# ---------------------------------------------------------------------------
# incomplete gamma
# ---------------------------------------------------------------------------

def gamma_lower_regularized(a: float, t: float) -> float:
    """P(a, t): series for t < a+1, continued fraction otherwise."""
    if a <= 0:
        raise DomainError("shape a must be positive")
    if t < 0:
        raise DomainError("argument t must be >= 0")
    if t == 0.0:
        return 0.0
    if t < a + 1.0:
        return _gser(a, t)
    return 1.0 - _gcf(a, t)


def gamma_upper_regularized(a: float, t: float) -> float:
    """Q(a, t) = Gamma(a, t) / Gamma(a)."""
    if a <= 0:
        raise DomainError("shape a must be positive")
    if t < 0:
        raise DomainError("argument t must be >= 0")
    if t == 0.0:
        return 1.0
    if t < a + 1.0:
        return 1.0 - _gser(a, t)
    return _gcf(a, t)


def gamma_upper_incomplete(a: float, t: float) -> float:
    """Unnormalized upper incomplete gamma; Gamma(a, 0) = Gamma(a)."""
    return gamma_upper_regularized(a, t) * math.gamma(a)


def _gser(a, x, itmax=500, eps=3e-16):
    # lower regularized by power series
    ap = a
    summ = 1.0 / a
    term = summ
    for _ in range(itmax):
        ap += 1.0
        term *= x / ap
        summ += term
        if abs(term) < abs(summ) * eps:
            break
    return summ * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gcf(a, x, itmax=500, eps=3e-16, fpmin=1e-300):
    # upper regularized by modified Lentz continued fraction
    b = x + 1.0 - a
    c = 1.0 / fpmin
    d = 1.0 / b
    h = d
    for i in range(1, itmax + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < fpmin:
            d = fpmin
        c = b + an / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _exp_partial_sum(x: float, m: int) -> float:
    """sum_{j=0..m} x^j / j!  (finite-series building block, any real x)."""
    tot, term = 1.0, 1.0
    for j in range(1, m + 1):
        term *= x / j
        tot += term
    return tot


def gamma_upper_int(n: int, x: float) -> float:
    """Gamma(n, x) = (n-1)! e^{-x} sum_{j<n} x^j/j! for integer n >= 1.

    The finite series is the analytic continuation, valid for x < 0 too
    (needed when z < rho).
    """
    if n < 1:
        raise DomainError("integer order n must be >= 1")
    return math.factorial(n - 1) * math.exp(-x) * _exp_partial_sum(x, n - 1)


# ---------------------------------------------------------------------------
# no-fading SNR law (random path gain x misalignment, impaired front end)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OutageQuery:
    """Threshold/average SNR pair with the derived amplitude threshold.

    gamma_h is the composite-gain value whose impaired SNR equals
    gamma_th; when gamma_th is at or above the hardware ceiling 1/k_h^2
    the outage probability is 1 and `above_ceiling` flags it.
    """

    gamma_th: float
    gamma_bar: float
    k_h: float = 0.0

    def __post_init__(self):
        if self.gamma_th < 0 or self.gamma_bar <= 0:
            raise DomainError("need gamma_th >= 0 and gamma_bar > 0")

    @property
    def above_ceiling(self) -> bool:
        return self.gamma_th * self.k_h ** 2 >= 1.0

    @property
    def gamma_h(self) -> float:
        if self.above_ceiling:
            return math.inf
        return math.sqrt(self.gamma_th
                         / (self.gamma_bar * (1.0 - self.gamma_th * self.k_h ** 2)))


def composite_gain_cdf(y: float, k: int, z: float, rho: float, a_l: float) -> float:
    """CDF of h_l * h_p at y, for integer absorption shape k and z != rho."""
    _check_z_rho(z, rho)
    if y <= 0.0:
        return 0.0
    if y >= a_l:
        return 1.0
    L = math.log(a_l / y)
    s = z - rho
    ezl = math.exp(-z * L)
    erl = math.exp(-rho * L)
    q_k_zl = ezl * _exp_partial_sum(z * L, k - 1)          # Q(k, zL)
    s_km1 = _exp_partial_sum(s * L, k - 1)
    s_k = _exp_partial_sum(s * L, k)
    raw = q_k_zl + (z / s) ** k * (
        (1.0 + rho * L) * (erl - ezl * s_km1)
        - (k * rho / s) * (erl - ezl * s_k))
    if not (-_CDF_RAW_TOL <= raw <= 1.0 + _CDF_RAW_TOL):
        raise ArithmeticError(
            f"closed-form CDF left [0,1] by more than {_CDF_RAW_TOL:g}: {raw!r} "
            f"(y={y:g}, k={k}, z={z:g}, rho={rho:g})")
    return min(1.0, max(0.0, raw))


def composite_gain_pdf(y: float, k: int, z: float, rho: float, a_l: float) -> float:
    """Density of h_l * h_p at y on (0, a_l)."""
    _check_z_rho(z, rho)
    if y <= 0.0 or y >= a_l:
        return 0.0
    L = math.log(a_l / y)
    s = z - rho
    e_r = math.exp(-(rho - 1.0) * L)
    e_z = math.exp(-(z - 1.0) * L)
    s_km1 = _exp_partial_sum(s * L, k - 1)
    s_k = _exp_partial_sum(s * L, k)
    return (rho ** 2 * (z / s) ** k / a_l) * (
        L * (e_r - e_z * s_km1) - (k / s) * (e_r - e_z * s_k))


def _check_z_rho(z, rho):
    if abs(z - rho) < Z_RHO_TOL:
        raise DegenerateParams(z, rho)


def cdf_snr_no_fading(query: OutageQuery, model: GammaAbsorption,
                      rho: float, link: ThzLinkParams) -> float:
    """P(SNR <= gamma_th) with fading disabled (h = h_l * h_p)."""
    k = model.integer_shape()
    z = model.z_for(link)
    _check_z_rho(z, rho)
    if query.above_ceiling:
        return 1.0
    if query.gamma_th == 0.0:
        return 0.0
    return composite_gain_cdf(query.gamma_h, k, z, rho, link.a_l)


def pdf_snr_no_fading(query: OutageQuery, model: GammaAbsorption,
                      rho: float, link: ThzLinkParams) -> float:
    """SNR density with fading disabled; change of variables from the gain law."""
    k = model.integer_shape()
    z = model.z_for(link)
    _check_z_rho(z, rho)
    if query.above_ceiling or query.gamma_th == 0.0:
        return 0.0
    gh = query.gamma_h
    shrink = 1.0 - query.gamma_th * query.k_h ** 2
    jac = 1.0 / (2.0 * query.gamma_bar * gh * shrink ** 2)
    return composite_gain_pdf(gh, k, z, rho, link.a_l) * jac


def outage_probability(query: OutageQuery, model: GammaAbsorption,
                       rho: float, link: ThzLinkParams) -> float:
    """Outage = CDF evaluated at the threshold."""
    return cdf_snr_no_fading(query, model, rho, link)


def snr_support_max(link: ThzLinkParams) -> float:
    """Largest SNR the no-fading composite can reach (h < a_l)."""
    top = link.avg_snr * link.a_l ** 2
    return top / (link.k_h ** 2 * top + 1.0)


@dataclass(frozen=True)
class DiversityOrder:
    exponents: Tuple[float, float, float]   # (alpha*mu/2, rho/2, z/2)
    effective: float


def diversity_order(alpha: float, mu: float, rho: float, z: float) -> DiversityOrder:
    """High-SNR outage exponents and their minimum (the log-log slope)."""
    if min(alpha, mu, rho, z) <= 0:
        raise DomainError("diversity order needs positive parameters")
    exps = (alpha * mu / 2.0, rho / 2.0, z / 2.0)
    return DiversityOrder(exponents=exps, effective=min(exps))


# ---------------------------------------------------------------------------
# delay series and bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DelayEnergyReport:
    """Exact series value with its bracket and the scaling-law reference."""

    exact: float
    lower: float
    upper: float
    scaling_reference: float     # K log K, K e, (e-1) K, or e K at this K

    @property
    def bracketed(self) -> bool:
        return self.lower <= self.exact <= self.upper


def delay_report_ftp(K: int) -> DelayEnergyReport:
    lo, up = delay_bounds_ftp(K)
    return DelayEnergyReport(delay_ftp(K), lo, up, K * math.log(K))


def delay_report_atp(K: int) -> DelayEnergyReport:
    lo, up = delay_bounds_atp(K)
    return DelayEnergyReport(delay_atp(K), lo, up, K * math.e)


def energy_report_ftp(K: int) -> DelayEnergyReport:
    lo, up = energy_bounds_ftp(K)
    return DelayEnergyReport(energy_ftp(K), lo, up, (math.e - 1.0) * K)


def energy_report_atp(K: int) -> DelayEnergyReport:
    lo, up = energy_bounds_atp(K)
    return DelayEnergyReport(energy_atp(K), lo, up, math.e * K)


def expected_delay_exact(K: int, p: float) -> float:
    """Expected slots to collect K packets with fixed per-user probability p.

    Stage with k packets left succeeds per slot w.p. k p (1-p)^(k-1); the
    stage lengths are geometric, so the total is the sum of their means.
    Returns inf for p = 1 with K >= 2 (permanent collision).
    """
    _check_kp(K, p)
    if p == 1.0:
        return 1.0 if K == 1 else math.inf
    k = np.arange(1, K + 1, dtype=float)
    return float(np.sum(1.0 / (k * p * (1.0 - p) ** (k - 1.0))))


def delay_ftp(K: int) -> float:
    """Expected slots under the fixed-probability scheme (p = 1/K throughout)."""
    if K < 1:
        raise DomainError("K >= 1")
    if K == 1:
        return 1.0
    log_r = math.log1p(-1.0 / K)
    k = np.arange(1, K + 1, dtype=float)
    return float((K - 1) * np.sum(1.0 / (k * np.exp(k * log_r))))


def delay_atp(K: int) -> float:
    """Expected slots under the adaptive scheme (p reset to 1/k after success)."""
    if K < 1:
        raise DomainError("K >= 1")
    return float(_atp_terms(K).sum())


def _atp_terms(K: int) -> np.ndarray:
    # (k/(k-1))^(k-1) with the k=1 term defined as 1 (lone user, p=1)
    k = np.arange(2, K + 1, dtype=float)
    terms = np.exp((k - 1.0) * np.log(k / (k - 1.0)))
    return np.concatenate([[1.0], terms])


def delay_atp_prefix(K_max: int) -> np.ndarray:
    """delay_atp(K) for K = 1..K_max in one cumulative pass."""
    return np.cumsum(_atp_terms(K_max))


def delay_bounds_ftp(K: int) -> Tuple[float, float]:
    """Bracket for the fixed-probability delay, valid for K >= 3."""
    if K < 3:
        raise DomainError("FTP delay bounds need K >= 3")
    lower = (K - 1) * (math.log(K) + 1.0 / (1 + 2 * K) + EULER_GAMMA + 1.0)
    upper = (K - 1) * (math.log(K) + 1.0 / (K * (K - 1))
                       + K / (K - 1) * math.e + 1.0)
    return lower, upper


def delay_bounds_atp(K: int) -> Tuple[float, float]:
    """Harmonic-number bracket around the adaptive delay, valid for K >= 2."""
    if K < 2:
        raise DomainError("ATP delay bounds need K >= 2")
    lower = K * math.e - math.e * (EULER_GAMMA + math.log(K) + 0.5 / K)
    return lower, K * math.e


# ---------------------------------------------------------------------------
# energy series and bounds
# ---------------------------------------------------------------------------

def expected_collisions_given_failure(k: int, p: float) -> float:
    """Expected colliding packets per failed slot: k p - k p (1-p)^(k-1)."""
    _check_kp(k, p, allow_zero_p=True)
    return k * p - k * p * (1.0 - p) ** (k - 1)


def expected_attempts_between_successes(k: int, p: float) -> float:
    """Expected slots between consecutive successes, 1/P_s; inf when P_s = 0."""
    _check_kp(k, p, allow_zero_p=True)
    ps = k * p * (1.0 - p) ** (k - 1)
    return math.inf if ps == 0.0 else 1.0 / ps


def energy_exact(K: int, p: float) -> float:
    """Expected transmissions (unit energy) to drain K packets at fixed p."""
    _check_kp(K, p)
    if p == 1.0:
        return 1.0 if K == 1 else math.inf
    k = np.arange(1, K + 1, dtype=float)
    return float(np.sum((1.0 - p) ** (-(k - 1.0))))


def energy_ftp(K: int) -> float:
    """Unit-energy series for the fixed-probability scheme (p = 1/K)."""
    if K < 1:
        raise DomainError("K >= 1")
    if K == 1:
        return 1.0
    r = 1.0 - 1.0 / K
    k = np.arange(1, K + 1, dtype=float)
    return float((K - 1) / K * np.sum(np.exp(-k * math.log(r))))


def energy_ftp_closed(K: int) -> float:
    """Geometric closed form (K-1)(r^{-K} - 1) for cross-checking."""
    if K < 2:
        return 1.0
    r = 1.0 - 1.0 / K
    return (K - 1) * (math.exp(-K * math.log(r)) - 1.0)


def energy_atp(K: int) -> float:
    """Unit-energy series for the adaptive scheme; coincides with delay_atp."""
    return delay_atp(K)


def energy_atp_prefix(K_max: int) -> np.ndarray:
    return delay_atp_prefix(K_max)


def energy_bounds_ftp(K: int) -> Tuple[float, float]:
    """Bracket for the fixed-probability energy, valid for K >= 3.

    The upper bound is the series-consistent form (K-1)(e(K-1)/(K-2) - 1);
    simpler constant-per-user bounds sometimes quoted for this scheme do
    not actually bracket the exact series.
    """
    if K < 3:
        raise DomainError("FTP energy bounds need K >= 3")
    lower = 1.5 * K - 0.5 / K - 1.0
    upper = (K - 1) * (math.e * (K - 1) / (K - 2) - 1.0)
    return lower, upper


def energy_bounds_atp(K: int, per_user: bool = False) -> Tuple[float, float]:
    """Bracket for the adaptive energy, valid for K >= 2.

    Total form by default; per_user=True divides both ends by K.
    """
    if K < 2:
        raise DomainError("ATP energy bounds need K >= 2")
    lower = K * math.e - math.e * (EULER_GAMMA + math.log(K) + 0.5 / K)
    upper = K * math.e
    if per_user:
        return lower / K, upper / K
    return lower, upper


def harmonic(K: int) -> float:
    """K-th harmonic number, exact partial sum."""
    return float(np.sum(1.0 / np.arange(1, K + 1, dtype=float)))


def energy_gap_bounds(K: int) -> Tuple[float, float]:
    """Interval for energy_atp(K) - energy_ftp(K), valid for K >= 3."""
    if K < 3:
        raise DomainError("energy gap bounds need K >= 3")
    h_k = harmonic(K)
    lower = (math.e - 1.0) * h_k + K - math.e * (K - 1) ** 2 / (K - 2) - 1.0
    upper = K * math.e - 1.5 * K + 0.5 / K + 1.0
    return lower, upper


def hoeffding_bound(epsilon: float, n: int, kind: str) -> float:
    """Concentration bound on the n-sample mean deviating by more than epsilon.

    kind='delay':  2 exp(-2 eps^2 / n)
    kind='energy': 2 exp(-2 eps^2 / (n (n-1)^2))
    """
    if epsilon < 0 or n < 1:
        raise DomainError("need epsilon >= 0 and n >= 1")
    if kind == "delay":
        return 2.0 * math.exp(-2.0 * epsilon ** 2 / n)
    if kind == "energy":
        denom = n * max(n - 1, 1) ** 2
        return 2.0 * math.exp(-2.0 * epsilon ** 2 / denom)
    raise DomainError(f"kind must be 'delay' or 'energy', got {kind!r}")


def _check_kp(K, p, allow_zero_p=False):
    if K < 1 or int(K) != K:
        raise DomainError("user count must be a positive integer")
    lo_ok = (p >= 0.0) if allow_zero_p else (p > 0.0)
    if not (lo_ok and p <= 1.0):
        raise DomainError(f"transmission probability out of range: {p!r}")
