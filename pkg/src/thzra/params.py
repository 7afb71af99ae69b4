"""Parameter types, invariants, and derived constants.

Everything is validated once and frozen; derived constants (k_h, a_l, z)
are recomputed from the raw fields, never stored by the caller.  All
angles/gains/SNRs are linear internally; dB only appears at the config
boundary (see cli).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

from .errors import MissingField, NonIntegerShape, OutOfRange

C_LIGHT = 299_792_458.0          # m/s
HPA_PER_ATM = 1013.25
DB_PER_NEPER = 8.686             # 2 * 4.343, power-dB per amplitude-neper
K_IMPAIRMENT_MAX = 0.4           # typical transceiver impairment ceiling


@dataclass(frozen=True)
class ThzLinkParams:
    """Deployment physics of a single THz link."""

    f_hz: float                  # carrier frequency
    d_m: float                   # link distance
    gain_tx: float               # linear antenna gain
    gain_rx: float               # linear antenna gain
    temperature_k: float = 296.0
    humidity_pct: float = 50.0   # relative humidity, 0..100
    pressure_hpa: float = HPA_PER_ATM
    k_t: float = 0.0             # transmit hardware impairment level
    k_r: float = 0.0             # receive hardware impairment level
    avg_snr: float = 1.0         # mean SNR gamma_bar, linear

    def __post_init__(self):
        _require_pos("link.f_hz", self.f_hz)
        _require_pos("link.d_m", self.d_m)
        _require_pos("link.gain_tx", self.gain_tx)
        _require_pos("link.gain_rx", self.gain_rx)
        _require_range("link.k_t", self.k_t, 0.0, K_IMPAIRMENT_MAX)
        _require_range("link.k_r", self.k_r, 0.0, K_IMPAIRMENT_MAX)
        if self.avg_snr < 0:
            raise OutOfRange("link.avg_snr", self.avg_snr, "avg_snr >= 0")
        if self.pressure_hpa <= 0:
            raise OutOfRange("link.pressure", self.pressure_hpa, "pressure > 0")

    @property
    def k_h(self) -> float:
        """Aggregate impairment sqrt(k_t^2 + k_r^2); imposes SNR ceiling 1/k_h^2."""
        return math.sqrt(self.k_t ** 2 + self.k_r ** 2)

    @property
    def a_l(self) -> float:
        """Antenna/spreading amplitude c*sqrt(Gt*Gr)/(4 pi f d)."""
        return (C_LIGHT * math.sqrt(self.gain_tx * self.gain_rx)
                / (4.0 * math.pi * self.f_hz * self.d_m))

    @property
    def d_km(self) -> float:
        return self.d_m / 1000.0

    @property
    def snr_ceiling(self) -> float:
        """Largest attainable instantaneous SNR, 1/k_h^2 (inf when ideal)."""
        kh = self.k_h
        return math.inf if kh == 0.0 else 1.0 / kh ** 2


@dataclass(frozen=True)
class GammaAbsorption:
    """Random molecular absorption: zeta_dB ~ Gamma(k, beta), in dB/km."""

    k: float                     # shape (integer required by closed forms only)
    beta: float                  # scale, dB/km per unit shape

    def __post_init__(self):
        _require_pos("absorption.k_shape", self.k)
        _require_pos("absorption.beta", self.beta)

    @property
    def mean_db_per_km(self) -> float:
        return self.k * self.beta

    def z_for(self, link: ThzLinkParams) -> float:
        """Path-gain exponent z = 8.686/(beta * d_km) for a given link."""
        return DB_PER_NEPER / (self.beta * link.d_km)

    def integer_shape(self) -> int:
        """Shape as int, rejecting non-integer k (closed-form paths only)."""
        k_int = round(self.k)
        if abs(self.k - k_int) > 1e-12 or k_int < 1:
            raise NonIntegerShape(self.k)
        return int(k_int)


@dataclass(frozen=True)
class DeterministicAbsorption:
    """Fixed coefficient profile for the two-resonance + cubic-tail model."""

    q: tuple                     # q1..q10
    p1: float                    # resonance wavenumber, 1/cm
    p2: float
    c: tuple                     # c1..c4 polynomial tail, powers of f descending

    def __post_init__(self):
        if len(self.q) != 10:
            raise OutOfRange("absorption.profile", len(self.q), "10 q-coefficients")
        if len(self.c) != 4:
            raise OutOfRange("absorption.profile", len(self.c), "4 c-coefficients")


@dataclass(frozen=True)
class FadingParams:
    """alpha-eta-kappa-mu short-term fading parameters."""

    alpha: float = 2.0           # medium nonlinearity
    eta: float = 1.0             # in-phase/quadrature scattered power ratio
    kappa: float = 0.0           # dominant-to-scattered power ratio
    mu: float = 1.0              # multipath cluster count
    p_ext: float = 1.0           # extended asymmetry (only symmetric 1 supported)
    q_ext: float = 1.0
    r_hat: float = 1.0           # rms envelope, E[hf^alpha] = r_hat^alpha
    enabled: bool = True

    def __post_init__(self):
        if self.enabled:
            _require_pos("fading.alpha", self.alpha)
            _require_pos("fading.eta", self.eta)
            if self.kappa < 0:
                raise OutOfRange("fading.kappa", self.kappa, "kappa >= 0")
            _require_pos("fading.mu", self.mu)
            _require_pos("fading.r_hat", self.r_hat)

    @property
    def mu_is_integer(self) -> bool:
        return abs(self.mu - round(self.mu)) <= 1e-12 and self.mu >= 1


@dataclass(frozen=True)
class MisalignmentParams:
    """Pointing-error severity; rho = sqrt(beamwidth^2 / angle-variance)."""

    rho: float

    def __post_init__(self):
        _require_pos("misalignment.rho", self.rho)

    @classmethod
    def from_beam(cls, beamwidth: float, angle_sigma2: float) -> "MisalignmentParams":
        _require_pos("misalignment.beamwidth", beamwidth)
        _require_pos("misalignment.angle_sigma2", angle_sigma2)
        return cls(rho=math.sqrt(beamwidth ** 2 / angle_sigma2))


SCHEMES = ("ftp", "atp", "optimal")


@dataclass(frozen=True)
class EnergyModel:
    """Unit mode charges 1 per transmission; realistic mode uses uJ constants."""

    realistic: bool = False
    e_tx_uj: float = 1200.0      # per data-packet transmission
    e_ack_uj: float = 120.0      # per successful (ACK'd) slot
    e_idle_uj: float = 40.0      # per holder idling in a slot

    def __post_init__(self):
        for name, v in (("e_tx_uj", self.e_tx_uj), ("e_ack_uj", self.e_ack_uj),
                        ("e_idle_uj", self.e_idle_uj)):
            if v < 0:
                raise OutOfRange(f"protocol.{name}", v, "energy >= 0")


@dataclass(frozen=True)
class ProtocolConfig:
    scheme: str = "atp"          # ftp | atp | optimal
    n_total: int = 10            # provisioned users N
    gamma_qos: float = 0.0       # admission SNR threshold, linear
    energy: EnergyModel = field(default_factory=EnergyModel)
    trials: int = 5000
    seed: int = 1
    admission: str = "instantaneous"   # or "average"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise OutOfRange("protocol.scheme", self.scheme, f"one of {SCHEMES}")
        if self.n_total < 1:
            raise OutOfRange("protocol.n_users", self.n_total, "n_users >= 1")
        if self.trials < 1:
            raise OutOfRange("protocol.trials", self.trials, "trials >= 1")
        if self.gamma_qos < 0:
            raise OutOfRange("protocol.gamma_qos", self.gamma_qos, "gamma_qos >= 0")
        if self.admission not in ("instantaneous", "average"):
            raise OutOfRange("protocol.admission", self.admission,
                             "instantaneous | average")


@dataclass(frozen=True)
class Experiment:
    """Validated bundle of one experiment's parameters."""

    link: ThzLinkParams
    absorption: object           # GammaAbsorption | DeterministicAbsorption
    fading: FadingParams
    misalignment: MisalignmentParams
    protocol: ProtocolConfig

    def with_protocol(self, **kw) -> "Experiment":
        return replace(self, protocol=replace(self.protocol, **kw))

    def to_flat_dict(self) -> dict:
        """Serialize back to the flat section.key string map (round-trips)."""
        out = {
            "link.f_hz": repr(self.link.f_hz),
            "link.d_m": repr(self.link.d_m),
            "link.gain_tx": repr(self.link.gain_tx),
            "link.gain_rx": repr(self.link.gain_rx),
            "link.temperature_k": repr(self.link.temperature_k),
            "link.humidity_pct": repr(self.link.humidity_pct),
            "link.pressure": repr(self.link.pressure_hpa),
            "link.pressure_unit": "hPa",
            "link.k_t": repr(self.link.k_t),
            "link.k_r": repr(self.link.k_r),
            "link.avg_snr_db": repr(10.0 * math.log10(self.link.avg_snr))
                               if self.link.avg_snr > 0 else "-inf",
            "fading.enabled": "true" if self.fading.enabled else "false",
            "fading.alpha": repr(self.fading.alpha),
            "fading.eta": repr(self.fading.eta),
            "fading.kappa": repr(self.fading.kappa),
            "fading.mu": repr(self.fading.mu),
            "fading.p_ext": repr(self.fading.p_ext),
            "fading.q_ext": repr(self.fading.q_ext),
            "fading.r_hat": repr(self.fading.r_hat),
            "misalignment.rho": repr(self.misalignment.rho),
            "protocol.scheme": self.protocol.scheme,
            "protocol.n_users": repr(self.protocol.n_total),
            "protocol.gamma_qos": repr(self.protocol.gamma_qos),
            "protocol.energy_model": "realistic" if self.protocol.energy.realistic
                                     else "unit",
            "protocol.e_tx_uj": repr(self.protocol.energy.e_tx_uj),
            "protocol.e_ack_uj": repr(self.protocol.energy.e_ack_uj),
            "protocol.e_idle_uj": repr(self.protocol.energy.e_idle_uj),
            "protocol.trials": repr(self.protocol.trials),
            "protocol.seed": repr(self.protocol.seed),
            "protocol.admission": self.protocol.admission,
        }
        if isinstance(self.absorption, GammaAbsorption):
            out["absorption.model"] = "gamma"
            out["absorption.k_shape"] = repr(self.absorption.k)
            out["absorption.kbeta_db_per_km"] = repr(self.absorption.mean_db_per_km)
        else:
            out["absorption.model"] = "deterministic"
            for i, v in enumerate(self.absorption.q, 1):
                out[f"absorption.q{i}"] = repr(v)
            out["absorption.p1"] = repr(self.absorption.p1)
            out["absorption.p2"] = repr(self.absorption.p2)
            for i, v in enumerate(self.absorption.c, 1):
                out[f"absorption.c{i}"] = repr(v)
        return out


def _require_pos(name, value):
    if not (value > 0):
        raise OutOfRange(name, value, f"{name.split('.')[-1]} > 0")


def _require_range(name, value, lo, hi):
    if not (lo <= value <= hi):
        raise OutOfRange(name, value, f"{lo} <= {name.split('.')[-1]} <= {hi}")


def _get(raw: Mapping[str, str], key: str, default=None, required=False):
    if key in raw and str(raw[key]).strip() != "":
        return str(raw[key]).strip()
    if required:
        raise MissingField(key)
    return default


def _get_float(raw, key, default=None, required=False):
    s = _get(raw, key, None, required)
    if s is None:
        return default
    try:
        return float(s)
    except ValueError as exc:
        raise OutOfRange(key, s, "a number") from exc


def _get_bool(raw, key, default=False):
    s = _get(raw, key)
    if s is None:
        return default
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise OutOfRange(key, s, "a boolean")


def _db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def validate_config(raw: Mapping[str, str]) -> Experiment:
    """Build a validated Experiment from a flat 'section.key' -> string map.

    Pressure may be declared in atm or hPa (link.pressure_unit) and is
    normalized to hPa internally.  SNR thresholds come in as dB and leave
    as linear.
    """
    unit = _get(raw, "link.pressure_unit", "hPa").lower()
    pressure = _get_float(raw, "link.pressure", HPA_PER_ATM)
    if unit == "atm":
        pressure *= HPA_PER_ATM
    elif unit != "hpa":
        raise OutOfRange("link.pressure_unit", unit, "atm | hPa")

    avg_snr_db = _get_float(raw, "link.avg_snr_db")
    if avg_snr_db is None:
        avg_snr = _get_float(raw, "link.avg_snr", 1.0)
    else:
        avg_snr = _db_to_linear(avg_snr_db)

    link = ThzLinkParams(
        f_hz=_get_float(raw, "link.f_hz", required=True),
        d_m=_get_float(raw, "link.d_m", required=True),
        gain_tx=_get_float(raw, "link.gain_tx", required=True),
        gain_rx=_get_float(raw, "link.gain_rx", required=True),
        temperature_k=_get_float(raw, "link.temperature_k", 296.0),
        humidity_pct=_get_float(raw, "link.humidity_pct", 50.0),
        pressure_hpa=pressure,
        k_t=_get_float(raw, "link.k_t", 0.0),
        k_r=_get_float(raw, "link.k_r", 0.0),
        avg_snr=avg_snr,
    )
    if not (0.0 <= link.humidity_pct <= 100.0):
        raise OutOfRange("link.humidity_pct", link.humidity_pct,
                         "0 <= humidity <= 100")

    model = _get(raw, "absorption.model", "gamma").lower()
    if model == "gamma":
        k_shape = _get_float(raw, "absorption.k_shape", required=True)
        beta = _get_float(raw, "absorption.beta_db_per_km")
        if beta is None:
            kbeta = _get_float(raw, "absorption.kbeta_db_per_km", required=True)
            if kbeta <= 0:
                raise OutOfRange("absorption.kbeta_db_per_km", kbeta, "mean > 0")
            beta = kbeta / k_shape
        absorption = GammaAbsorption(k=k_shape, beta=beta)
    elif model == "deterministic":
        q = tuple(_get_float(raw, f"absorption.q{i}", required=True)
                  for i in range(1, 11))
        c = tuple(_get_float(raw, f"absorption.c{i}", required=True)
                  for i in range(1, 5))
        absorption = DeterministicAbsorption(
            q=q, c=c,
            p1=_get_float(raw, "absorption.p1", required=True),
            p2=_get_float(raw, "absorption.p2", required=True))
    else:
        raise OutOfRange("absorption.model", model, "gamma | deterministic")

    fading = FadingParams(
        alpha=_get_float(raw, "fading.alpha", 2.0),
        eta=_get_float(raw, "fading.eta", 1.0),
        kappa=_get_float(raw, "fading.kappa", 0.0),
        mu=_get_float(raw, "fading.mu", 1.0),
        p_ext=_get_float(raw, "fading.p_ext", 1.0),
        q_ext=_get_float(raw, "fading.q_ext", 1.0),
        r_hat=_get_float(raw, "fading.r_hat", 1.0),
        enabled=_get_bool(raw, "fading.enabled", True),
    )

    rho = _get_float(raw, "misalignment.rho")
    beamwidth = _get_float(raw, "misalignment.beamwidth")
    if rho is None and beamwidth is None:
        raise MissingField("misalignment.rho")
    if beamwidth is not None:
        sigma2 = _get_float(raw, "misalignment.angle_sigma2", required=True)
        mis = MisalignmentParams.from_beam(beamwidth, sigma2)
        if rho is not None and abs(mis.rho - rho) > 1e-9 * max(1.0, rho):
            raise OutOfRange("misalignment.rho", rho,
                             "rho == sqrt(beamwidth^2/angle_sigma2)")
    else:
        mis = MisalignmentParams(rho=rho)

    qos_db = _get_float(raw, "protocol.gamma_qos_db")
    if qos_db is None:
        gamma_qos = _get_float(raw, "protocol.gamma_qos", 0.0)
    else:
        gamma_qos = _db_to_linear(qos_db) if math.isfinite(qos_db) else 0.0

    energy_mode = _get(raw, "protocol.energy_model", "unit").lower()
    if energy_mode not in ("unit", "realistic"):
        raise OutOfRange("protocol.energy_model", energy_mode, "unit | realistic")
    energy = EnergyModel(
        realistic=(energy_mode == "realistic"),
        e_tx_uj=_get_float(raw, "protocol.e_tx_uj", 1200.0),
        e_ack_uj=_get_float(raw, "protocol.e_ack_uj", 120.0),
        e_idle_uj=_get_float(raw, "protocol.e_idle_uj", 40.0),
    )

    n_users = _get(raw, "protocol.n_users", "10")
    first_n = int(float(n_users.replace(":", ",").split(",")[0]))

    protocol = ProtocolConfig(
        scheme=_get(raw, "protocol.scheme", "atp").lower().split(",")[0].strip(),
        n_total=first_n,
        gamma_qos=gamma_qos,
        energy=energy,
        trials=int(_get_float(raw, "protocol.trials", 5000)),
        seed=int(_get_float(raw, "protocol.seed", 1)),
        admission=_get(raw, "protocol.admission", "instantaneous").lower(),
    )

    return Experiment(link=link, absorption=absorption, fading=fading,
                      misalignment=mis, protocol=protocol)
