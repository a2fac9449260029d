"""Simulation parameters: loading, validation, and derived constants.

The config file is a single flat JSON object with snake_case keys (see
README for the full schema).  Power-like quantities may be given either in
the customary log units (dBm, dBm/Hz, dB) or in linear units via the
``*_w`` / ``*_lin`` key variants; everything is stored internally in watts
and linear gains.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """Raised when a config file fails parsing or validation."""


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def db_to_lin(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SimConfig:
    """All knobs of one simulation run (immutable after load).

    Linear units throughout: watts, W/Hz, Hz, seconds, meters, bits.
    """

    k: int = 20                      # VUE tx-rx pairs
    n: int = 20                      # resource blocks
    omega: float = 180e3             # RB bandwidth (Hz)
    tau: float = 3e-3                # slot duration (s)
    p_max: float = dbm_to_watt(23.0)  # per-pair power budget (W)
    z: int = 4000                    # packet size (bits)
    n0: float = dbm_to_watt(-174.0)  # noise PSD (W/Hz)
    arrival_rate: float = 0.5e6      # source rate (bit/s)
    d_d: float = 30e-3               # age threshold, deterministic case (s)
    d_m: float = 60e-3               # age threshold, Poisson case (s)
    epsilon_k: float = 1e-3          # AoI violation tolerance
    h_cap: float = 0.05              # excess-mean cap (packets)
    b_cap: float = 0.0033            # excess second-moment cap (packets^2)
    v: float = 0.0                   # power/queue tradeoff weight
    g: int = 10                      # cluster count
    gamma: float = 30.0              # similarity length scale (m)
    phi: float = 150.0               # similarity cutoff radius (m)
    t0: int = 100                    # reclustering period (slots)
    alpha: float = 1.61              # path-loss exponent
    d_intersection: float = 15.0     # near-intersection radius (m)
    l0: float = db_to_lin(-68.5)     # LOS/WLOS path-loss coefficient (linear)
    l0_prime: float = db_to_lin(-54.5)  # NLOS coefficient (linear)
    block_error: float = 1e-5        # block error probability epsilon
    i0: float | None = None          # constant interference (W); None -> pilot calibration
    area_side: float = 250.0         # Manhattan area side (m)
    speed: float = 60.0              # vehicle speed (km/h)
    pair_distance: float = 15.0      # tx-rx spacing along the lane (m)
    seed: int = 1
    slots: int = 10000
    arrival_model: str = "deterministic"   # deterministic | poisson
    rate_model: str = "shannon"            # shannon | fbl
    policy: str = "proposed"               # proposed | baseline2 | fixed_power
    # Optional overrides for derived constants (paper-replication knobs).
    psi: float | None = None
    blocklength: int | None = None
    # Road geometry (the mobility model fills block_spacing from area_side/4
    # when left unset).
    block_spacing: float | None = None
    lane_offset: float = 2.5         # lane center offset from road axis (m)
    # Evaluation knobs.
    interference_mode: str = "exact"       # exact | constant
    fbl_error_mode: str = "slot"           # slot | per_rb
    i0_pilot_slots: int = 500
    warmup_frac: float = 0.1

    def validate(self) -> None:
        def bad(name: str, msg: str) -> ConfigError:
            return ConfigError(f"config field '{name}': {msg}")

        if self.k < 1:
            raise bad("k", "need at least one VUE pair")
        if self.n < 1:
            raise bad("n", "need at least one RB")
        if self.tau <= 0:
            raise bad("tau", "slot duration must be positive")
        if self.omega <= 0:
            raise bad("omega", "RB bandwidth must be positive")
        if self.z <= 0:
            raise bad("z", "packet size must be positive")
        if self.p_max <= 0:
            raise bad("p_max", "power budget must be positive")
        if not 0.0 < self.epsilon_k < 1.0:
            raise bad("epsilon_k", f"must lie in (0, 1), got {self.epsilon_k}")
        if not 0.0 < self.block_error < 1.0:
            raise bad("epsilon", f"must lie in (0, 1), got {self.block_error}")
        if not 2 <= self.g <= self.k:
            raise bad("g", f"group count must lie in [2, k={self.k}], got {self.g}")
        if self.arrival_rate < 0:
            raise bad("arrival_rate", "must be nonnegative")
        if self.d_d <= 0 or self.d_m <= 0:
            raise bad("d_d/d_m", "age thresholds must be positive")
        if self.h_cap <= 0 or self.b_cap <= 0:
            raise bad("h/b", "excess caps must be positive")
        if self.v < 0:
            raise bad("v", "tradeoff weight must be nonnegative")
        if self.t0 < 1:
            raise bad("t0", "reclustering period must be >= 1 slot")
        if self.gamma <= 0 or self.phi <= 0:
            raise bad("gamma/phi", "similarity scales must be positive")
        if self.area_side <= 0 or self.pair_distance <= 0:
            raise bad("area_side/pair_distance", "must be positive")
        if self.speed <= 0:
            raise bad("speed", "must be positive")
        if self.slots < 0:
            raise bad("slots", "must be nonnegative")
        if self.arrival_model not in ("deterministic", "poisson"):
            raise bad("arrival_model", f"unknown value {self.arrival_model!r}")
        if self.rate_model not in ("shannon", "fbl"):
            raise bad("rate_model", f"unknown value {self.rate_model!r}")
        if self.policy not in ("proposed", "baseline2", "fixed_power"):
            raise bad("policy", f"unknown value {self.policy!r}")
        if self.interference_mode not in ("exact", "constant"):
            raise bad("interference_mode", f"unknown value {self.interference_mode!r}")
        if self.fbl_error_mode not in ("slot", "per_rb"):
            raise bad("fbl_error_mode", f"unknown value {self.fbl_error_mode!r}")
        if self.i0 is not None and self.i0 < 0:
            raise bad("i0", "must be nonnegative")
        if not 0.0 <= self.warmup_frac < 1.0:
            raise bad("warmup_frac", "must lie in [0, 1)")
        spacing = self.block_spacing
        if spacing is not None and spacing <= 0:
            raise bad("block_spacing", "must be positive")
        if spacing is not None and self.pair_distance >= spacing:
            raise bad("pair_distance", "must be shorter than one block")


@dataclass(frozen=True)
class DerivedParams:
    """Closed-form constants computed from a SimConfig."""

    a: float            # packets per slot (deterministic arrivals)
    lam: float          # mean packets per slot (Poisson arrivals)
    psi: float          # D/G/1 slack constant (packets)
    e_k: float          # effective tolerance for the Poisson case
    blocklength: int    # channel uses per slot, L = round(omega * tau)
    rate_factor: float  # omega * tau / z, spectral bits -> packets conversion


def derive_params(cfg: SimConfig) -> DerivedParams:
    """Compute the derived constants; pure function of the config.

    Raises ConfigError when the arrival process undersamples the age
    threshold (a/tau < 1/d_d) or when d_m is too small for a nonnegative
    effective tolerance.
    """
    a = cfg.arrival_rate * cfg.tau / cfg.z
    lam = a
    if a * cfg.d_d < cfg.tau:
        raise ConfigError(
            "undersampled arrival process: a/tau = "
            f"{a / cfg.tau:.4g} < 1/d_d = {1.0 / cfg.d_d:.4g}; raise "
            "arrival_rate or d_d"
        )
    psi = 2.0 - (cfg.d_d / cfg.tau - 1.0) * a
    if cfg.psi is not None:
        psi = cfg.psi

    if lam > 0:
        d_m_min = -cfg.tau * math.log(cfg.epsilon_k) / lam
        if cfg.d_m < d_m_min:
            raise ConfigError(
                f"d_m = {cfg.d_m:.4g} s is below the minimum "
                f"{d_m_min:.4g} s required for a nonnegative effective "
                "tolerance"
            )
        decay = math.exp(-lam * cfg.d_m / cfg.tau)
        e_k = (cfg.epsilon_k - decay) / (1.0 - decay)
    else:
        e_k = cfg.epsilon_k

    blocklength = int(round(cfg.omega * cfg.tau))
    if cfg.blocklength is not None:
        blocklength = int(cfg.blocklength)
    return DerivedParams(
        a=a,
        lam=lam,
        psi=psi,
        e_k=e_k,
        blocklength=blocklength,
        rate_factor=cfg.omega * cfg.tau / cfg.z,
    )


# Config-file keys that are not plain dataclass fields: unit-variant spellings
# and Table-I shorthand names.
_KEY_ALIASES = {
    "h": "h_cap",
    "b": "b_cap",
    "epsilon": "block_error",
}
_UNIT_KEYS = {
    "p_max": ("p_max", dbm_to_watt),        # file value in dBm
    "p_max_w": ("p_max", float),
    "n0": ("n0", dbm_to_watt),              # file value in dBm/Hz
    "n0_w_hz": ("n0", float),
    "l0": ("l0", db_to_lin),                # file value in dB
    "l0_lin": ("l0", float),
    "l0_prime": ("l0_prime", db_to_lin),
    "l0_prime_lin": ("l0_prime", float),
    "i0_dbm": ("i0", dbm_to_watt),
    "i0": ("i0", float),                    # file value in watts (or null)
    "z_bytes": ("z", lambda v: int(v) * 8),
    "z": ("z", int),
}
_INT_FIELDS = {"k", "n", "z", "g", "t0", "seed", "slots", "i0_pilot_slots",
               "blocklength"}


def load_config(path: str | Path) -> SimConfig:
    """Load a SimConfig from a flat JSON file.

    An empty (or whitespace-only) file means "all defaults".  Unknown keys
    are rejected so typos surface immediately.  Derived-constant
    feasibility is also checked here so an infeasible file fails at load
    time.
    """
    text = Path(path).read_text()
    if not text.strip():
        raw: dict = {}
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path}: expected a single JSON object")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> SimConfig:
    """Build and validate a SimConfig from already-parsed key/value pairs."""
    known = {f.name for f in fields(SimConfig)}
    kwargs: dict = {}
    for key, value in raw.items():
        if key in _UNIT_KEYS:
            name, conv = _UNIT_KEYS[key]
            kwargs[name] = None if value is None else conv(value)
            continue
        name = _KEY_ALIASES.get(key, key)
        if name not in known:
            raise ConfigError(f"unknown config key '{key}'")
        if name in _INT_FIELDS and value is not None:
            value = int(value)
        kwargs[name] = value
    cfg = SimConfig(**kwargs)
    cfg.validate()
    derive_params(cfg)  # surface infeasible derived constants at load time
    return cfg


def with_overrides(cfg: SimConfig, **kwargs) -> SimConfig:
    """Copy of cfg with fields replaced, revalidated."""
    out = replace(cfg, **kwargs)
    out.validate()
    derive_params(out)
    return out
