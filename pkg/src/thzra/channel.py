"""Channel sampling: absorption, path gain, misalignment, fading, SNR.

Samplers are pure given their Generator and accept an optional `size`
(None -> python float, int -> ndarray).  The composite draw follows
h = h_l * h_f * h_p and the impaired SNR

    gamma = avg_snr * h^2 / (k_h^2 * avg_snr * h^2 + 1)

which saturates at 1/k_h^2 for k_h > 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Union

import numpy as np

from .errors import DomainError, OutOfRange, ProfileMissing, UnsupportedParams
from .params import (DB_PER_NEPER, DeterministicAbsorption, Experiment,
                     FadingParams, GammaAbsorption, ThzLinkParams)

ArrayLike = Union[float, np.ndarray]

BUCK_T_MIN_K = 200.0
BUCK_T_MAX_K = 350.0


@dataclass(frozen=True)
class ChannelDraw:
    """One composite channel realization and its impaired SNR."""

    h_l: float        # path gain, 0 < h_l <= a_l
    h_f: float        # fading envelope (1.0 when fading disabled)
    h_p: float        # misalignment gain in (0, 1)
    h: float          # composite h_l * h_f * h_p
    gamma: float      # instantaneous SNR, linear


def buck_saturation_pressure(temperature_k: float, pressure_hpa: float) -> float:
    """Saturated water-vapor partial pressure (hPa) by Buck's equation.

    Valid over 200 K < T < 350 K; strictly increasing in temperature.
    """
    if not (BUCK_T_MIN_K < temperature_k < BUCK_T_MAX_K):
        raise OutOfRange("link.temperature_k", temperature_k,
                         f"{BUCK_T_MIN_K} K < T < {BUCK_T_MAX_K} K")
    t_c = temperature_k - 273.15
    enhancement = 1.0007 + 3.46e-6 * pressure_hpa
    return 6.1121 * enhancement * math.exp(17.502 * t_c / (240.97 + t_c))


def water_vapor_mixing_ratio(link: ThzLinkParams) -> float:
    """v = (humidity/100) * p_w(T, p) / p."""
    p_w = buck_saturation_pressure(link.temperature_k, link.pressure_hpa)
    return (link.humidity_pct / 100.0) * p_w / link.pressure_hpa


def absorption_deterministic(link: ThzLinkParams,
                             profile: DeterministicAbsorption) -> float:
    """Molecular absorption coefficient zeta in 1/m from a coefficient profile.

    Two water-vapor resonance terms plus a cubic polynomial tail; the
    resonance positions p1, p2 are wavenumbers in 1/cm and f/(100 c)
    converts Hz to the same unit.
    """
    if profile is None:
        raise ProfileMissing("deterministic absorption requires a profile")
    v = water_vapor_mixing_ratio(link)
    q = profile.q
    wn = link.f_hz / (100.0 * 299_792_458.0)
    y1 = q[0] * v * (q[1] * v + q[2]) / ((q[3] * v + q[4]) ** 2 + (wn - profile.p1) ** 2)
    y2 = q[5] * v * (q[6] * v + q[7]) / ((q[8] * v + q[9]) ** 2 + (wn - profile.p2) ** 2)
    f = link.f_hz
    c1, c2, c3, c4 = profile.c
    return y1 + y2 + c1 * f ** 3 + c2 * f ** 2 + c3 * f + c4


def load_absorption_profile(path=None) -> DeterministicAbsorption:
    """Parse a flat key=value coefficient profile (shipped default if no path)."""
    if path is None:
        ref = resources.files("thzra").joinpath("data/absorption_default.profile")
        try:
            text = ref.read_text()
        except FileNotFoundError as exc:
            raise ProfileMissing("packaged default profile not found") from exc
    else:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ProfileMissing(f"cannot read absorption profile {path!r}") from exc
    vals = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, val = line.partition("=")
        vals[key.strip()] = float(val)
    try:
        return DeterministicAbsorption(
            q=tuple(vals[f"q{i}"] for i in range(1, 11)),
            p1=vals["p1"], p2=vals["p2"],
            c=tuple(vals[f"c{i}"] for i in range(1, 5)))
    except KeyError as exc:
        raise ProfileMissing(f"profile key missing: {exc}") from exc


def zeta_db_per_km_from_natural(zeta_per_m: float) -> float:
    """Convert a 1/m absorption coefficient to power dB/km."""
    return zeta_per_m * 1000.0 * (DB_PER_NEPER / 2.0)


def sample_absorption_db(model: GammaAbsorption, rng: np.random.Generator,
                         size: Optional[int] = None) -> ArrayLike:
    """Draw zeta_dB ~ Gamma(k, beta) in dB/km."""
    draw = rng.gamma(model.k, model.beta, size=size)
    return draw if size is not None else float(draw)


def path_gain_from_absorption(zeta_db: ArrayLike, link: ThzLinkParams) -> ArrayLike:
    """h_l = a_l * exp(-zeta_dB * d_km / (2 * 4.343))."""
    return link.a_l * np.exp(-0.5 * np.asarray(zeta_db, dtype=float)
                             * link.d_km / (DB_PER_NEPER / 2.0))


def path_gain_pdf(h_l: ArrayLike, model: GammaAbsorption,
                  link: ThzLinkParams) -> ArrayLike:
    """Density of the random path gain for Gamma-distributed absorption.

    f(h) = z^k a_l^{-z} / Gamma(k) * ln(a_l/h)^{k-1} * h^{z-1} on (0, a_l].
    """
    h = np.asarray(h_l, dtype=float)
    a_l = link.a_l
    if np.any(h <= 0) or np.any(h > a_l * (1 + 1e-12)):
        raise DomainError(f"path gain must lie in (0, a_l={a_l:g}]")
    z = model.z_for(link)
    k = model.k
    lg = np.log(a_l / np.minimum(h, a_l))
    out = (z ** k * a_l ** (-z) / math.gamma(k)
           * np.power(lg, k - 1.0) * np.power(h, z - 1.0))
    return out if isinstance(h_l, np.ndarray) else float(out)


def path_gain_cdf(h_l: ArrayLike, model: GammaAbsorption,
                  link: ThzLinkParams) -> ArrayLike:
    """P(path gain <= h); ln(a_l/h_l) is Gamma(k, 1/z) so this is its tail."""
    from . import analytics
    h = np.atleast_1d(np.asarray(h_l, dtype=float))
    if np.any(h <= 0) or np.any(h > link.a_l * (1 + 1e-12)):
        raise DomainError(f"path gain must lie in (0, a_l={link.a_l:g}]")
    z = model.z_for(link)
    out = np.array([analytics.gamma_upper_regularized(model.k, z * math.log(link.a_l / x))
                    if x < link.a_l else 1.0 for x in h])
    return out if isinstance(h_l, np.ndarray) else float(out[0])


def sample_path_gain(model: GammaAbsorption, link: ThzLinkParams,
                     rng: np.random.Generator,
                     size: Optional[int] = None) -> ArrayLike:
    return path_gain_from_absorption(sample_absorption_db(model, rng, size), link)


def sample_misalignment(rho: float, rng: np.random.Generator,
                        size: Optional[int] = None) -> ArrayLike:
    """Exact misalignment-gain sampler h_p = (U V)^(1/rho).

    U*V for independent uniforms has density -ln(w) on (0,1); raising to
    1/rho gives the pointing-error law -rho^2 ln(x) x^(rho-1) exactly.
    """
    n = 1 if size is None else size
    u = rng.random(n)
    v = rng.random(n)
    hp = np.power(u * v, 1.0 / rho)
    return hp if size is not None else float(hp[0])


def misalignment_pdf(x: ArrayLike, rho: float) -> ArrayLike:
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0) or np.any(xs > 1):
        raise DomainError("misalignment gain support is (0, 1]")
    out = -rho ** 2 * np.log(xs) * np.power(xs, rho - 1.0)
    return out if isinstance(x, np.ndarray) else float(out)


def misalignment_cdf(x: ArrayLike, rho: float) -> ArrayLike:
    """Antiderivative of the misalignment density: x^rho (1 - rho ln x)."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0) or np.any(xs > 1):
        raise DomainError("misalignment gain support is (0, 1]")
    out = np.power(xs, rho) * (1.0 - rho * np.log(xs))
    return out if isinstance(x, np.ndarray) else float(out)


def _fading_gaussian_construction(fp: FadingParams, rng: np.random.Generator,
                                  n: int) -> np.ndarray:
    """Physical alpha-eta-kappa-mu construction, symmetric p = q = 1.

    mu i.i.d. clusters of (in-phase, quadrature) Gaussians with variance
    ratio eta and equal-split dominant components sized so the total
    dominant-to-scattered power ratio is kappa.
    """
    mu = int(round(fp.mu))
    sigma_y2 = 1.0
    sigma_x2 = fp.eta * sigma_y2
    lam2 = fp.kappa * (sigma_x2 + sigma_y2) / 2.0   # lambda_x^2 = lambda_y^2
    lam = math.sqrt(lam2)
    x = rng.normal(lam, math.sqrt(sigma_x2), size=(n, mu))
    y = rng.normal(lam, math.sqrt(sigma_y2), size=(n, mu))
    g = np.sum(x * x + y * y, axis=1)
    mean_g = mu * ((sigma_x2 + sigma_y2) + 2.0 * lam2)
    return g / mean_g


def sample_fading(fp: FadingParams, rng: np.random.Generator,
                  size: Optional[int] = None) -> ArrayLike:
    """Draw the short-term fading envelope h_f with E[h_f^alpha] = r_hat^alpha.

    Integer mu uses the Gaussian cluster construction for any (eta, kappa);
    the alpha-mu subfamily (eta=1, kappa=0) additionally supports real
    mu > 0 through its exact Gamma representation.  Asymmetric extended
    parameters are rejected rather than approximated.
    """
    if not fp.enabled:
        raise UnsupportedParams("fading disabled; composite draw uses h_f = 1")
    if fp.p_ext != 1.0 or fp.q_ext != 1.0:
        raise UnsupportedParams(
            f"asymmetric extension p={fp.p_ext}, q={fp.q_ext} has no exact "
            "sampler here; only the symmetric p = q = 1 convention is supported")
    n = 1 if size is None else size
    if fp.mu_is_integer:
        g_norm = _fading_gaussian_construction(fp, rng, n)
    elif fp.eta == 1.0 and fp.kappa == 0.0:
        # alpha-mu subfamily: h_f^alpha * (mu / r_hat^alpha) ~ Gamma(mu)
        g_norm = rng.gamma(fp.mu, 1.0 / fp.mu, size=n)
    else:
        raise UnsupportedParams(
            f"non-integer mu={fp.mu} is only exactly samplable in the "
            "alpha-mu subfamily (eta=1, kappa=0)")
    hf = fp.r_hat * np.power(g_norm, 1.0 / fp.alpha)
    return hf if size is not None else float(hf[0])


def snr_from_gain(h: ArrayLike, avg_snr: float, k_h: float) -> ArrayLike:
    """Impaired instantaneous SNR for composite amplitude gain h."""
    h2 = np.square(np.asarray(h, dtype=float)) * avg_snr
    out = h2 / (k_h ** 2 * h2 + 1.0)
    return out if isinstance(h, np.ndarray) else float(out)


def draw_channel(exp: Experiment, rng_absorption: np.random.Generator,
                 rng_fading: np.random.Generator,
                 rng_misalignment: np.random.Generator) -> ChannelDraw:
    """One composite channel draw from per-component streams."""
    h_l, h_f, h_p = _draw_components(exp, rng_absorption, rng_fading,
                                     rng_misalignment, None)
    h = h_l * h_f * h_p
    return ChannelDraw(h_l=h_l, h_f=h_f, h_p=h_p, h=h,
                       gamma=snr_from_gain(h, exp.link.avg_snr, exp.link.k_h))


def draw_snr_batch(exp: Experiment, n: int,
                   rng_absorption: np.random.Generator,
                   rng_fading: np.random.Generator,
                   rng_misalignment: np.random.Generator,
                   avg_snr: Optional[float] = None) -> np.ndarray:
    """Vectorized SNR draws (admission, outage Monte Carlo)."""
    h_l, h_f, h_p = _draw_components(exp, rng_absorption, rng_fading,
                                     rng_misalignment, n)
    h = h_l * h_f * h_p
    gbar = exp.link.avg_snr if avg_snr is None else avg_snr
    return snr_from_gain(np.asarray(h), gbar, exp.link.k_h)


def _draw_components(exp, rng_a, rng_f, rng_m, size):
    if isinstance(exp.absorption, GammaAbsorption):
        h_l = sample_path_gain(exp.absorption, exp.link, rng_a, size)
    else:
        zeta = absorption_deterministic(exp.link, exp.absorption)
        h_l = float(path_gain_from_absorption(
            zeta_db_per_km_from_natural(zeta), exp.link))
        if size is not None:
            h_l = np.full(size, h_l)
    h_f = sample_fading(exp.fading, rng_f, size) if exp.fading.enabled else (
        np.ones(size) if size is not None else 1.0)
    h_p = sample_misalignment(exp.misalignment.rho, rng_m, size)
    return h_l, h_f, h_p
