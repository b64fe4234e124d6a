"""
Desk-scale invariant suite with optional deliberate fault injection.

Each check is a small, self-contained oracle comparison. Faults patch a
single module attribute for the duration of the suite so that the checks
can be shown to detect them.
"""
from __future__ import annotations

import contextlib
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import loggamma

from .. import channel, spectral_maps
from ..config import LinkConfig
from ..framing import FrameGeometry, build_u, constellation
from ..metrics import awgn_mi, evm_q, mi_estimate
from ..nft import forward_nft, lambda_grid, roundtrip_report, time_grid
from ..spectral_maps import NlSpectrum, a_from_b, b_from_u
from ..tx import LinkPlan, draw_frame, modulate
from ..rx import demodulate
from ..units import FibreParams, TimeBurst, make_scales
from .runner import format_row, run_once

# n_sp (G - 1) h nu at G = 16 dB, NF = 5 dB, 193.44 THz
ASE_PSD_REFERENCE = 7.86545741398631355e-18
# Z_n and P_n for the reference fibre at T_n = 1 ps
LENGTH_SCALE_REFERENCE_M = 46.4325016558926698
POWER_SCALE_REFERENCE_W = 70.4321736934970051


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


@dataclass
class SelfTestReport:
    checks: list[CheckResult] = field(default_factory=list)
    faults: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def format(self) -> str:
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name:<34} {c.detail}  ({c.seconds:.1f} s)"
                 for c in self.checks]
        if self.faults:
            lines.insert(0, f"injected faults: {', '.join(self.faults)}")
        lines.append(f"selftest {'PASSED' if self.passed else 'FAILED'} "
                     f"({sum(c.passed for c in self.checks)}/{len(self.checks)})")
        return "\n".join(lines)


# --- checks ------------------------------------------------------------------------

def check_scales():
    s = make_scales(FibreParams())
    err = max(abs(s.z_scale_m / LENGTH_SCALE_REFERENCE_M - 1), abs(s.p_scale_w / POWER_SCALE_REFERENCE_W - 1))
    return err < 1e-12, f"max rel err {err:.1e}"


def check_sech_oracle():
    n, window, amp = 2000, 40.0, 0.4
    h = window / n
    q = np.stack([amp / np.cosh(time_grid(n, h)), np.zeros(n)]).astype(complex)
    lam = np.linspace(-3, 3, 41)
    s = forward_nft(TimeBurst(q, h, True), lam)
    z = 0.5 - 1j * lam
    a_ref = np.exp(2 * loggamma(z) - loggamma(z + amp) - loggamma(z - amp))
    b_ref = np.sin(np.pi * amp) / np.cosh(np.pi * lam)
    err = max(np.max(np.abs(s.a - a_ref)), np.max(np.abs(s.b[0] - b_ref)))
    return err < 1e-4, f"max err {err:.1e}"


def _b_frame(n_carriers=16, s_max=0.5, seed=0):
    g = FrameGeometry(n_carriers, 8, 4.0)
    h = 1.0 / g.oversampling
    lam = lambda_grid(g.n_burst, h)
    rng = np.random.default_rng(seed)
    u = build_u(constellation()[rng.integers(0, 32, size=(2, n_carriers))], g)
    u *= np.sqrt(-np.log1p(-s_max) / np.max(np.sum(np.abs(u) ** 2, axis=0)))
    b = np.stack(b_from_u(u[0], u[1]))
    return NlSpectrum(lam, "B", a=a_from_b(b[0], b[1], lam), b=b), h


def check_causality():
    spectrum, _ = _b_frame()
    a = spectrum.a
    coeffs = np.fft.fft(np.fft.ifftshift(a)) / a.size
    leak = np.abs(coeffs[a.size // 2 + 1:]).max() / np.abs(coeffs).max()
    # decimating the oversampled completion leaves ~1e-6 of aliasing
    return leak < 1e-4, f"anti-causal leakage {leak:.1e}"


def check_nft_round_trip():
    spectrum, h = _b_frame()
    r = roundtrip_report(spectrum, h)
    ok = r.roundtrip_rel_rms < 1e-3 and r.unimodularity_residual < 1e-4 and r.energy_residual < 5e-3
    return ok, f"rel rms {r.roundtrip_rel_rms:.1e}, unimodularity {r.unimodularity_residual:.1e}"


def check_integrability():
    fibre = FibreParams(loss_db_per_km=0.0, n_spans=1)
    cfg = LinkConfig(fibre=fibre, n_carriers=16, eta=8.0, power_dbm=-16.0, noise=False, n_bursts=8,
                     ssfm_step_km=1.0, calibrate=False)
    plan = LinkPlan(cfg)
    sent, got = [], []
    for k in range(cfg.n_bursts):
        frame = draw_frame(plan, k)
        burst = channel.propagate_link(modulate(frame, plan), fibre, step_m=1e3, noise=False)
        sent.append(frame.symbols)
        got.append(demodulate(burst, plan))
    evm, _ = evm_q(np.array(got), np.array(sent))
    return evm < 0.01, f"EVM {100 * evm:.3f} %"


def check_ase_statistics():
    n = 400_000
    dt = 1 / (8 * 56e9)
    out = channel.edfa(TimeBurst(np.zeros((2, n)), dt), 16.0, 5.0, 193.44e12, np.random.default_rng(11))
    ratio = np.mean(np.abs(out.q) ** 2) / (ASE_PSD_REFERENCE / dt)
    return abs(ratio - 1) < 0.02, f"variance ratio {ratio:.4f}"


def check_lossless_energy():
    fibre = FibreParams(n_spans=1, span_km=40.0)
    dt = 1 / (8 * 56e9)
    t = (np.arange(1024) - 512) * dt
    q = np.sqrt(5e-3) * np.exp(-t**2 / (2 * (20e-12) ** 2))
    burst = TimeBurst(np.stack([q, 0.5j * q]), dt)
    out = channel.propagate_link(burst, fibre, step_m=2e3, noise=False)
    dev = abs(np.sum(out.energy()) / np.sum(burst.energy()) - 1)
    return dev < 1e-10, f"energy deviation {dev:.1e}"


def check_mi_estimator():
    rng = np.random.default_rng(5)
    pts = constellation()
    x = pts[rng.integers(0, pts.size, 60_000)]
    snr_db = 15.0
    sigma = np.sqrt(10 ** (-snr_db / 10) / 2)
    y = x + sigma * (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size))
    gap = abs(mi_estimate(y, x) - awgn_mi(snr_db))
    _, q_db = evm_q(y, x)
    ok = gap < 0.1 and abs(q_db - snr_db) < 0.2
    return ok, f"MI gap {gap:.4f} bit, Q {q_db:.2f} dB"


def check_determinism():
    cfg = LinkConfig(n_carriers=16, eta=8.0, channel="b2b", n_bursts=4, n_train=16, power_dbm=-8.0)
    rows = [format_row(run_once(cfg, threads=t)) for t in (1, 2, 1)]
    return rows[0] == rows[1] == rows[2] and not rows[0][-1], "rows byte-identical across 1/2 threads"


CHECKS = {
    "units.make_scales": check_scales,
    "nft.forward_nft.sech_oracle": check_sech_oracle,
    "spectral_maps.a_from_b.causality": check_causality,
    "nft.round_trip": check_nft_round_trip,
    "rx.integrability": check_integrability,
    "channel.ase_statistics": check_ase_statistics,
    "channel.energy_conservation": check_lossless_energy,
    "metrics.mi_and_q_oracle": check_mi_estimator,
    "harness.determinism": check_determinism,
}


# --- fault injection ---------------------------------------------------------------

def _double_ase(original):
    def patched(*args, **kwargs):
        return 2 * original(*args, **kwargs)
    return patched


FAULTS = {
    "hilbert-sign": (spectral_maps, "HILBERT_SIGN", lambda old: -old),
    "ase-x2": (channel, "ase_psd", _double_ase),
}


@contextlib.contextmanager
def inject(faults):
    saved = []
    try:
        for name in faults:
            try:
                module, attr, make = FAULTS[name]
            except KeyError:
                raise ValueError(f"unknown fault {name!r}; choose from {sorted(FAULTS)}") from None
            old = getattr(module, attr)
            saved.append((module, attr, old))
            setattr(module, attr, make(old))
        yield
    finally:
        for module, attr, old in reversed(saved):
            setattr(module, attr, old)


def selftest(faults=(), only=None) -> SelfTestReport:
    """Run the invariant suite, optionally under injected faults.

    Parameters
    ----------
    faults : iterable of str
        Keys of :data:`FAULTS` to apply while the checks run.
    only : iterable of str, optional
        Restrict to these check names.

    Returns
    -------
    SelfTestReport
        One entry per check. A check that raises is recorded as failed.
    """
    report = SelfTestReport(faults=tuple(faults))
    names = list(CHECKS) if only is None else list(only)
    with inject(report.faults):
        for name in names:
            start = time.perf_counter()
            try:
                passed, detail = CHECKS[name]()
            except Exception as exc:  # noqa: BLE001 - a crash is a failed check
                passed, detail = False, f"{type(exc).__name__}: {exc}"
            report.checks.append(CheckResult(name, bool(passed), detail, time.perf_counter() - start))
    return report
