"""Slot-loop orchestration: mobility, clustering cadence, per-pair power
control, interference-aware rate evaluation, queue/age bookkeeping, and
metrics.

Controllers always price interference at the constant i0; the achieved
rates are evaluated either with the exact cross-group interference
(default) or with the same constant, per cfg.interference_mode.  When
cfg.i0 is None it is calibrated once from a short fixed-power pilot run.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import clustering, controller, mobility, traffic
from .aoi_mapping import aoi_prob_m
from .channel import path_loss_matrix, inverse_q
from .config import SimConfig, derive_params, with_overrides

LOG2E = math.log2(math.e)


@dataclass
class MetricsReport:
    """Full per-slot logs plus run metadata; summaries are computed lazily
    over the post-warm-up window."""

    cfg: SimConfig
    i0_used: float
    warmup_slots: int
    aoi: np.ndarray        # (slots, K) age at each slot end (s)
    queue: np.ndarray      # (slots, K) start-of-slot backlog (packets)
    rate: np.ndarray       # (slots, K) achieved rate (packets/slot)
    power: np.ndarray      # (slots, K) total transmit power (W)
    indicator: np.ndarray  # (slots, K) violation events
    excess: np.ndarray     # (slots, K) conditional excess (0 off-event)
    arrivals: np.ndarray   # (slots, K) per-slot arrival counts/mass
    service: np.ndarray    # (slots, K) realized service (packets/slot)
    delivered: np.ndarray  # (slots, K) delivered packet units (float64)
    arrival_times: list = field(default_factory=list)  # per-pair instants

    def _window(self):
        return slice(self.warmup_slots, None)

    def aoi_samples(self) -> np.ndarray:
        """Post-warm-up age samples pooled over pairs."""
        return self.aoi[self._window()].ravel()

    def excess_samples(self) -> np.ndarray:
        """Positive conditional excess values pooled post-warm-up."""
        w = self._window()
        vals = self.excess[w][self.indicator[w]]
        return vals[vals > 0]

    def summary(self) -> dict:
        der = derive_params(self.cfg)
        n = self.aoi.shape[0]
        out = {
            "schema": "aoisim-summary-v1",
            "seed": self.cfg.seed,
            "slots": n,
            "warmup_slots": self.warmup_slots,
            "pairs": self.cfg.k,
            "arrival_model": self.cfg.arrival_model,
            "rate_model": self.cfg.rate_model,
            "policy": self.cfg.policy,
            "i0_w": self.i0_used,
            "psi": der.psi,
            "e_k": der.e_k,
            "blocklength": der.blocklength,
        }
        if n <= self.warmup_slots:
            out.update({
                "avg_aoi_s": None, "worst_aoi_s": None, "avg_power_w": None,
                "avg_queue_pkts": None, "avg_rate_pps": None,
                "pr_aoi_exceed": None, "pr_event": None,
                "pr_aoi_bound": None, "pr_aoi_predicted": None,
                "age_threshold_s": self.cfg.d_d
                if self.cfg.arrival_model == "deterministic" else self.cfg.d_m,
            })
            return out
        w = self._window()
        aoi = self.aoi[w]
        if self.cfg.arrival_model == "deterministic":
            d = self.cfg.d_d
            pr_aoi = float(np.mean(aoi > d))
            pr_event = float(np.mean(self.indicator[w]))
            bound = pr_event
            predicted = None
        else:
            d = self.cfg.d_m
            pr_aoi, pr_event, predicted = self.lemma_m_terms()
            bound = None
        out.update({
            "age_threshold_s": d,
            "avg_aoi_s": float(aoi.mean(dtype=np.float64)),
            "worst_aoi_s": float(aoi.max()),
            "avg_power_w": float(self.power[w].mean(dtype=np.float64)),
            "avg_queue_pkts": float(self.queue[w].mean(dtype=np.float64)),
            "avg_rate_pps": float(self.rate[w].mean(dtype=np.float64)),
            "pr_aoi_exceed": pr_aoi,
            "pr_event": pr_event,
            "pr_aoi_bound": bound,
            "pr_aoi_predicted": predicted,
        })
        return out

    def lemma_m_terms(self):
        """(measured Pr{age>d_m}, Pr{A>R}, predicted Pr{age>d_m}).

        The Poisson-case mapping observes the age at the start of slot t
        against the same slot's arrival/rate event, so the age log is
        shifted by one slot.
        """
        der = derive_params(self.cfg)
        w0 = max(self.warmup_slots, 1)
        aoi_start = self.aoi[w0 - 1:-1]          # age at start of slot t
        events = self.indicator[w0:]
        pr_aoi = float(np.mean(aoi_start > self.cfg.d_m))
        pr_event = float(np.mean(events))
        predicted = aoi_prob_m(pr_event, der.lam, self.cfg.d_m, self.cfg.tau)
        return pr_aoi, pr_event, predicted


def ccdf(samples):
    """Empirical survival function at the sorted unique sample values."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("need at least one sample")
    values = np.sort(np.unique(x))
    n = x.size
    # count of samples strictly greater than each value
    greater = n - np.searchsorted(np.sort(x), values, side="right")
    return list(zip(values.tolist(), (greater / n).tolist()))


def calibrate_i0(cfg: SimConfig) -> float:
    """Time-average exact interference measured on a short fixed-power
    pilot, used as the controller's constant-interference price."""
    pilot_cfg = with_overrides(
        cfg, policy="fixed_power", interference_mode="exact",
        slots=min(cfg.i0_pilot_slots, max(cfg.slots, 1)), i0=0.0,
    )
    rng = np.random.default_rng([cfg.seed, 0x170])
    engine = _Engine(pilot_cfg, i0=0.0, rng=rng, collect_interference=True)
    for t in range(pilot_cfg.slots):
        engine.step(t)
    if engine.interference_count == 0:
        return 0.0
    return engine.interference_sum / engine.interference_count


class _Engine:
    """Mutable state of one replication; step(t) advances a slot."""

    def __init__(self, cfg: SimConfig, i0: float, rng,
                 collect_interference: bool = False):
        self.cfg = cfg
        self.der = derive_params(cfg)
        self.rng = rng
        self.i0 = i0
        self.topo = mobility.init_topology(cfg, rng)
        k = cfg.k
        self.q = np.zeros(k)
        self.cum_delivered = np.zeros(k)
        self.trackers = [traffic.AoiTracker() for _ in range(k)]
        self.vx = np.zeros(k)
        self.vy = np.zeros(k)
        self.vr = np.zeros(k)
        self.vqq = np.zeros(k)
        self.prev_rate = np.zeros(k)
        self.usage = np.zeros((k, cfg.n), dtype=bool)
        self.labels = np.zeros(k, dtype=int)
        self.noise_ctrl = cfg.n0 * cfg.omega + i0
        self.collect_interference = collect_interference
        self.interference_sum = 0.0
        self.interference_count = 0
        # per-slot outputs, overwritten every step
        self.out_aoi = np.zeros(k)
        self.out_qpre = np.zeros(k)
        self.out_rate = np.zeros(k)
        self.out_power = np.zeros(k)
        self.out_ind = np.zeros(k, dtype=bool)
        self.out_excess = np.zeros(k)
        self.out_arrivals = np.zeros(k)
        self.out_service = np.zeros(k)
        self.out_delivered = np.zeros(k)

    def step(self, t: int) -> None:
        cfg, der, rng = self.cfg, self.der, self.rng
        k, n_rb = cfg.k, cfg.n

        if clustering.should_recluster(t, cfg.t0):
            mids = mobility.pair_midpoints(self.topo)
            sim = clustering.similarity(mids, cfg.gamma, cfg.phi,
                                        area_side=cfg.area_side)
            self.labels = clustering.spectral_cluster(sim, cfg.g, rng)
            rb_sets = clustering.allocate_rbs(self.labels, n_rb)
            self.usage = clustering.rb_usage_matrix(rb_sets, k, n_rb)

        mobility.step_mobility(self.topo, cfg.tau, rng)

        pl = path_loss_matrix(self.topo, cfg)
        diag = np.arange(k)
        exact = cfg.interference_mode == "exact"
        if exact:
            fad = self.rng.standard_exponential(size=(k, k, n_rb))
            h_direct = pl[diag, diag, None] * fad[diag, diag, :]
        else:
            h_direct = pl[diag, diag, None] * \
                self.rng.standard_exponential(size=(k, n_rb))

        # arrivals (mass for the queue, instants for the age tracker)
        if cfg.arrival_model == "deterministic":
            instants = traffic.arrivals_deterministic(t, der.a, cfg.tau)
            arr_mass = np.full(k, der.a)
            a_weight = np.full(k, der.a)
            per_pair_instants = [instants] * k
        else:
            counts = rng.poisson(der.lam, size=k)
            per_pair_instants = []
            for c in counts:
                if c:
                    inst = np.sort(rng.uniform(t * cfg.tau, (t + 1) * cfg.tau,
                                               size=int(c)))
                    per_pair_instants.append(inst.tolist())
                else:
                    per_pair_instants.append([])
            arr_mass = counts.astype(float)
            a_weight = arr_mass

        # controller: weight from last slot's achieved rate, then powers
        if cfg.arrival_model == "deterministic":
            ind_w = self.q > self.prev_rate - der.psi
            qp = self.q + der.psi
            evt_terms = (-self.vqq + self.vx + (2.0 * self.vy + 1.0) * qp
                         + 2.0 * qp ** 3)
            tol = cfg.epsilon_k
        else:
            ind_w = a_weight > self.prev_rate
            evt_terms = (-self.vqq + self.vx + (2.0 * self.vy + 1.0) * a_weight
                         + 2.0 * a_weight ** 3)
            tol = der.e_k
        if cfg.policy == "baseline2":
            evt_terms = -self.vqq
        weights = der.rate_factor * (self.vr + a_weight + self.q
                                     + self.vqq * tol + evt_terms * ind_w)

        if cfg.policy == "fixed_power":
            n_alloc = np.maximum(self.usage.sum(axis=1), 1)
            powers = np.where(self.usage, cfg.p_max / n_alloc[:, None], 0.0)
        elif cfg.rate_model == "shannon":
            powers = controller.waterfill_batch(
                weights, h_direct, self.usage, cfg.v, cfg.p_max,
                self.noise_ctrl)
        else:
            powers = controller.ccp_batch(
                weights, h_direct, self.usage, cfg.v, cfg.p_max,
                self.noise_ctrl, der.blocklength, cfg.block_error)

        # achieved rate under the evaluation interference model
        if exact:
            contrib = powers[:, None, :] * fad
            contrib *= pl[:, :, None]
            total = contrib.sum(axis=0)
            self_term = powers * pl[diag, diag, None] * fad[diag, diag, :]
            interference = total - self_term
            noise_eval = cfg.n0 * cfg.omega + interference
            if self.collect_interference:
                mask = self.usage
                self.interference_sum += float(interference[mask].sum())
                self.interference_count += int(mask.sum())
        else:
            noise_eval = np.full((k, n_rb), self.noise_ctrl)

        snr = np.where(self.usage, powers * h_direct / noise_eval, 0.0)
        spectral = np.log2(1.0 + snr)
        if cfg.rate_model == "fbl":
            disp = snr * (2.0 + snr) / (1.0 + snr) ** 2 * LOG2E ** 2
            qinv = inverse_q(cfg.block_error)
            bl = der.blocklength
            spectral = spectral - np.sqrt(disp / bl) * qinv \
                + math.log2(bl) / (2.0 * bl)
            spectral = np.where(powers > 0.0, np.maximum(spectral, 0.0), 0.0)
        rate = der.rate_factor * spectral.sum(axis=1)

        # service realization
        if cfg.rate_model == "fbl":
            if cfg.fbl_error_mode == "slot":
                fail = rng.random(k) < cfg.block_error
                service = np.where(fail, 0.0, rate)
            else:
                ok = rng.random((k, n_rb)) >= cfg.block_error
                service = der.rate_factor * (spectral * ok).sum(axis=1)
        else:
            service = rate

        # violation events on the start-of-slot queue and the achieved rate
        q_pre = self.q.copy()
        if cfg.arrival_model == "deterministic":
            ind = q_pre > rate - der.psi
            excess = np.where(ind, q_pre - rate + der.psi, 0.0)
        else:
            ind = arr_mass > rate
            excess = np.where(ind, arr_mass - rate, 0.0)

        # physical queue and age
        delivered = np.minimum(service, self.q)
        self.out_delivered = delivered
        self.q = np.maximum(self.q - service, 0.0) + arr_mass
        self.cum_delivered += delivered
        now = (t + 1) * cfg.tau
        for i in range(k):
            tr = self.trackers[i]
            tr.add_arrivals(per_pair_instants[i])
            nd = int(math.floor(self.cum_delivered[i] + 1e-9))
            nd = min(nd, len(tr.arrival_times))
            if nd > tr.n_departed:
                tr.delivered_watermark = tr.arrival_times[nd - 1]
                tr.n_departed = nd
            tr.aoi = now - tr.delivered_watermark
            self.out_aoi[i] = tr.aoi

        # virtual queues driven by the achieved rate
        if cfg.policy != "fixed_power":
            y = excess * excess
            if cfg.policy == "proposed":
                self.vx = np.maximum(self.vx + (excess - cfg.h_cap) * ind, 0.0)
                self.vy = np.maximum(self.vy + (y - cfg.b_cap) * ind, 0.0)
            self.vr = np.maximum(self.vr - rate + arr_mass, 0.0)
            self.vqq = np.maximum(self.vqq + rate * ind - rate * tol, 0.0)
        self.prev_rate = rate

        self.out_qpre = q_pre
        self.out_rate = rate
        self.out_power = powers.sum(axis=1)
        self.out_ind = ind
        self.out_excess = excess
        self.out_arrivals = arr_mass
        self.out_service = service


def run(cfg: SimConfig) -> MetricsReport:
    """Execute one seeded replication and return its full metrics."""
    i0 = cfg.i0 if cfg.i0 is not None else calibrate_i0(cfg)
    rng = np.random.default_rng(cfg.seed)
    engine = _Engine(cfg, i0=i0, rng=rng)
    slots, k = cfg.slots, cfg.k
    logs = {name: np.zeros((slots, k), dtype=np.float32)
            for name in ("aoi", "queue", "rate", "power", "excess",
                         "arrivals", "service")}
    delivered = np.zeros((slots, k), dtype=np.float64)
    indicator = np.zeros((slots, k), dtype=bool)
    for t in range(slots):
        engine.step(t)
        logs["aoi"][t] = engine.out_aoi
        logs["queue"][t] = engine.out_qpre
        logs["rate"][t] = engine.out_rate
        logs["power"][t] = engine.out_power
        logs["excess"][t] = engine.out_excess
        logs["arrivals"][t] = engine.out_arrivals
        logs["service"][t] = engine.out_service
        delivered[t] = engine.out_delivered
        indicator[t] = engine.out_ind
    return MetricsReport(
        cfg=cfg,
        i0_used=i0,
        warmup_slots=int(cfg.warmup_frac * slots),
        aoi=logs["aoi"],
        queue=logs["queue"],
        rate=logs["rate"],
        power=logs["power"],
        indicator=indicator,
        excess=logs["excess"],
        arrivals=logs["arrivals"],
        service=logs["service"],
        delivered=delivered,
        arrival_times=[tr.arrival_times for tr in engine.trackers],
    )


_SWEEP_PARAMS = {"v", "arrival_rate", "blocklength", "block_error"}


def sweep(cfg: SimConfig, parameter: str, values) -> list[MetricsReport]:
    """Independent runs over a parameter, seed offset by the value index.

    A blocklength sweep moves the slot duration along with it (L = omega *
    tau), mirroring how shorter coherence time shrinks the blocklength.
    """
    if parameter not in _SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {parameter!r}; "
                         f"choose from {sorted(_SWEEP_PARAMS)}")
    reports = []
    for idx, value in enumerate(values):
        if parameter == "blocklength":
            overrides = {"tau": float(value) / cfg.omega,
                         "blocklength": int(value)}
        else:
            overrides = {parameter: value}
        run_cfg = with_overrides(cfg, seed=cfg.seed + idx, **overrides)
        reports.append(run(run_cfg))
    return reports


# -- outputs -----------------------------------------------------------------

SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "schema", "seed", "slots", "warmup_slots", "pairs", "arrival_model",
        "rate_model", "policy", "i0_w", "psi", "e_k", "blocklength",
        "age_threshold_s", "avg_aoi_s", "worst_aoi_s", "avg_power_w",
        "avg_queue_pkts", "avg_rate_pps", "pr_aoi_exceed", "pr_event",
        "pr_aoi_bound", "pr_aoi_predicted",
    ],
    "properties": {
        "schema": {"const": "aoisim-summary-v1"},
        "seed": {"type": "integer"},
        "slots": {"type": "integer", "minimum": 0},
        "warmup_slots": {"type": "integer", "minimum": 0},
        "pairs": {"type": "integer", "minimum": 1},
        "arrival_model": {"enum": ["deterministic", "poisson"]},
        "rate_model": {"enum": ["shannon", "fbl"]},
        "policy": {"enum": ["proposed", "baseline2", "fixed_power"]},
        "i0_w": {"type": "number", "minimum": 0},
        "psi": {"type": "number"},
        "e_k": {"type": "number"},
        "blocklength": {"type": "integer", "minimum": 2},
        "age_threshold_s": {"type": "number", "exclusiveMinimum": 0},
        "avg_aoi_s": {"type": ["number", "null"], "minimum": 0},
        "worst_aoi_s": {"type": ["number", "null"], "minimum": 0},
        "avg_power_w": {"type": ["number", "null"], "minimum": 0},
        "avg_queue_pkts": {"type": ["number", "null"], "minimum": 0},
        "avg_rate_pps": {"type": ["number", "null"], "minimum": 0},
        "pr_aoi_exceed": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "pr_event": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "pr_aoi_bound": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "pr_aoi_predicted": {"type": ["number", "null"], "minimum": 0,
                             "maximum": 1},
    },
    "additionalProperties": False,
}


def summary_json(report: MetricsReport) -> str:
    """Canonical JSON serialization (sorted keys, stable float repr)."""
    return json.dumps(report.summary(), sort_keys=True, indent=2) + "\n"


def write_outputs(report: MetricsReport, out_dir, trace: bool = False) -> None:
    """Write summary.json and aoi_ccdf.csv (plus trace.csv on request)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(summary_json(report))
    samples = report.aoi_samples()
    with (out / "aoi_ccdf.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold_s", "prob"])
        if samples.size:
            for threshold, prob in ccdf(samples):
                writer.writerow([repr(threshold), repr(prob)])
    if trace:
        with (out / "trace.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["slot", "pair", "aoi_s", "queue_pkts",
                             "rate_pps", "power_w", "indicator", "excess"])
            slots, k = report.aoi.shape
            for t in range(slots):
                for i in range(k):
                    writer.writerow([
                        t, i, repr(float(report.aoi[t, i])),
                        repr(float(report.queue[t, i])),
                        repr(float(report.rate[t, i])),
                        repr(float(report.power[t, i])),
                        int(report.indicator[t, i]),
                        repr(float(report.excess[t, i])),
                    ])
