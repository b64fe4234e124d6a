"""
Single runs and parameter sweeps with deterministic seeding and CSV output.

Every burst draws its bits and noise from its own stream keyed by
``(seed, stream, burst index)``, so results do not depend on the number of
worker threads or on which other points a sweep contains.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..channel import b2b_noise_load, propagate_link
from ..config import LinkConfig, save_config
from ..framing import carriers_for_eta
from ..metrics import compute_metrics
from ..rx import apply_calibration, demodulate, fit_calibration
from ..tx import BITS, NOISE, TRAIN_BITS, TRAIN_NOISE, LinkPlan, burst_rng, draw_frame, modulate

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
THREADS_ENV = "NFDM_THREADS"
# below this many training bursts the per-subcarrier 2x2 fit costs more than it corrects
MIN_TRAIN_BURSTS = 16

COLUMNS = (
    "schema_version", "config_digest", "mode", "channel", "power_dbm", "n_carriers", "eta",
    "oversampling", "n_bursts", "seed", "calibrated",
    "evm_rms", "q_db", "q_db_se", "ber", "q_ber_db", "mi_bits", "mi_bits_se",
    "se_per_pol", "se_per_pol_se", "se_total", "net_rate_gbps", "gross_rate_gbps", "line_rate_gbps",
    "n_symbols_measured", "raw_evm_rms", "raw_q_db", "raw_mi_bits",
    "kappa", "max_s_b", "tx_clipped", "rx_clipped", "nft_unimodularity", "boundary_flags",
    "error", "wall_s",
)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    return max(1, int(threads))


def apply_channel(burst, plan: LinkPlan, rng):
    cfg = plan.config
    if cfg.channel == "link":
        return propagate_link(burst, cfg.fibre, rng, step_m=cfg.ssfm_step_km * 1e3, noise=cfg.noise,
                              bandwidth_hz=cfg.noise_bandwidth_hz)
    if cfg.channel == "b2b" and cfg.noise:
        return b2b_noise_load(burst, cfg.fibre, rng, bandwidth_hz=cfg.noise_bandwidth_hz)
    return burst


def process_burst(plan: LinkPlan, burst_id: int, training: bool = False) -> dict:
    """Transmit one frame through the configured channel and demodulate it."""
    bit_stream, noise_stream = (TRAIN_BITS, TRAIN_NOISE) if training else (BITS, NOISE)
    frame = draw_frame(plan, burst_id, bit_stream)
    burst, spectrum = modulate(frame, plan, return_spectrum=True)
    burst = apply_channel(burst, plan, burst_rng(plan.config.seed, noise_stream, burst_id))
    info = {}
    soft = demodulate(burst, plan, burst_id=burst_id, info=info)
    return {
        "symbols": frame.symbols, "bits": frame.bits, "soft": soft,
        "max_s_b": float(spectrum.s_b.max()), "tx_clipped": spectrum.meta.get("clipped", 0),
        "rx_clipped": info["rx_clipped"], "unimodularity": info["unimodularity_residual"],
        "boundary": bool(info["boundary_violation"]),
    }


def _run_bursts(plan, ids, training, threads):
    if threads == 1:
        return [process_burst(plan, k, training) for k in ids]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda k: process_burst(plan, k, training), ids))


def run_once(config: LinkConfig, threads: int | None = None) -> dict:
    """Run the full chain for ``config.n_bursts`` bursts and return one result row.

    Stage failures do not raise; they produce a row whose ``error`` field
    names the exception.
    """
    start = time.perf_counter()
    row = dict.fromkeys(COLUMNS)
    row.update(
        schema_version=SCHEMA_VERSION, config_digest=config.digest, mode=config.mode, channel=config.channel,
        power_dbm=config.power_dbm, n_carriers=config.n_carriers, eta=config.eta,
        oversampling=config.oversampling, n_bursts=config.n_bursts, seed=config.seed, error="",
    )
    try:
        threads = resolve_threads(threads)
        plan = LinkPlan(config)
        results = _run_bursts(plan, range(config.n_bursts), False, threads)
        soft = np.stack([r["soft"] for r in results])
        symbols = np.stack([r["symbols"] for r in results])
        bits = np.stack([r["bits"] for r in results])
        kw = dict(eta=config.eta, W_hz=config.W_hz, power_dbm=config.power_dbm)
        raw = compute_metrics(soft, symbols, bits, **kw)
        calibrated = config.calibrate and config.n_train >= MIN_TRAIN_BURSTS
        final = raw
        if calibrated:
            train = _run_bursts(plan, range(config.n_train), True, threads)
            taps = fit_calibration(np.stack([r["soft"] for r in train]), np.stack([r["symbols"] for r in train]))
            final = compute_metrics(apply_calibration(taps, soft), symbols, bits, **kw)
        row.update({k: v for k, v in final.as_dict().items() if k in row})
        row.update(
            calibrated=calibrated, raw_evm_rms=raw.evm_rms, raw_q_db=raw.q_db, raw_mi_bits=raw.mi_bits,
            kappa=plan.kappa, max_s_b=max(r["max_s_b"] for r in results),
            tx_clipped=sum(r["tx_clipped"] for r in results), rx_clipped=sum(r["rx_clipped"] for r in results),
            nft_unimodularity=max(r["unimodularity"] for r in results),
            boundary_flags=sum(r["boundary"] for r in results),
        )
    except Exception as exc:  # noqa: BLE001 - recorded in the row
        log.exception("run %s failed", config.digest)
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_s"] = time.perf_counter() - start
    return row


# --- serialization ---------------------------------------------------------------

def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return repr(value) if not math.isfinite(value) else "%.17g" % value
    return str(value)


def format_row(row: dict, exclude=("wall_s",)) -> list[str]:
    return [format_value(row.get(c)) for c in COLUMNS if c not in exclude]


class CsvSink:
    """Appends rows to a CSV with the fixed column order, writing the header once."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists() or self.path.stat().st_size == 0:
            with self.path.open("w", newline="") as fh:
                csv.writer(fh).writerow(COLUMNS)

    def write(self, row: dict) -> None:
        with self.path.open("a", newline="") as fh:
            csv.writer(fh).writerow(format_row(row, exclude=()))

    def completed_digests(self) -> set[str]:
        with self.path.open(newline="") as fh:
            return {r["config_digest"] for r in csv.DictReader(fh) if not r.get("error")}


def write_run(row: dict, config: LinkConfig, out_dir) -> Path:
    out = Path(out_dir)
    sink = CsvSink(out / "results.csv")
    sink.write(row)
    save_config(config, out / f"config_{config.digest}.json")
    return sink.path


# --- sweeps ----------------------------------------------------------------------

def sweep_points(template: LinkConfig, axes: dict) -> list[LinkConfig]:
    """Cartesian product of axis values applied to the template.

    Sweeping ``eta`` without ``n_carriers`` while ``guard_s`` is set keeps the
    guard time fixed and chooses the subcarrier count to match.
    """
    names = list(axes)
    configs = []
    for values in itertools.product(*(axes[n] for n in names)):
        point = dict(zip(names, values))
        if "eta" in point and "n_carriers" not in point and template.guard_s:
            point["n_carriers"] = carriers_for_eta(point["eta"], template.W_hz, template.guard_s)
        configs.append(template.with_(**point))
    return configs


def sweep(template: LinkConfig, axes: dict | None = None, out_dir=None, threads: int | None = None,
          resume: bool = True):
    """Run every sweep point, yielding rows as they complete.

    With ``out_dir`` rows are appended to ``results.csv`` there, and points
    whose digest already has an error-free row are skipped when ``resume``.
    A failing point yields a row with its error recorded and the sweep
    continues.
    """
    configs = sweep_points(template, axes or {})
    sink = None
    done = set()
    if out_dir is not None:
        out = Path(out_dir)
        sink = CsvSink(out / "results.csv")
        done = sink.completed_digests() if resume else set()
        (out / "sweep.json").write_text(json.dumps(
            {"template": template.to_dict(), "axes": axes or {}, "schema_version": SCHEMA_VERSION},
            indent=2, sort_keys=True) + "\n")
    for cfg in configs:
        if cfg.digest in done:
            log.info("skipping completed point %s", cfg.digest)
            continue
        row = run_once(cfg, threads)
        if sink is not None:
            sink.write(row)
            save_config(cfg, Path(out_dir) / f"config_{cfg.digest}.json")
        yield row
