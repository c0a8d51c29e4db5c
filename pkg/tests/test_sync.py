import math
import warnings

import numpy as np
import pytest

from chualab.circuit import table_one
from chualab.integrator import DivergenceError
from chualab.sync import (
    SyncConfig,
    SyncResult,
    drive_rms,
    mask_transmit,
    masking_correlation,
    read_sync_csv,
    recover_message,
    run_synchronization,
    sync_error_metrics,
    tone,
    write_sync_csv,
)

R0_MISMATCH_REASON = ("with v_c1 substitution the driven LC tank stays close to the master even "
                      "with 5% r0 mismatch (ratio ~0.04); see decisions ledger")


def fake_result(diff, t_sync=0.5):
    t = np.linspace(0.0, 1.0, 1001)
    m = np.sin(2 * np.pi * 5 * t)
    return SyncResult(t, m, m - diff, diff, t_sync)


# -- configuration and metrics ------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        SyncConfig(t_sync=0.3, t_end=0.2)
    with pytest.raises(ValueError):
        SyncConfig(drive_variable="v_c3")
    with pytest.raises(ValueError):
        SyncConfig(coupling="resistive")
    with pytest.raises(ValueError):
        SyncConfig(settle=0.5)
    SyncConfig(coupling="resistive", r_c=1000.0)


def test_metrics_zero_difference():
    m = sync_error_metrics(fake_result(np.zeros(1001)), 0.1)
    assert m.rms_post == 0.0 and m.max_glitch_post == 0.0


def test_metrics_constant_difference():
    m = sync_error_metrics(fake_result(np.full(1001, -0.25)), 0.1)
    assert m.rms_post == pytest.approx(0.25, rel=1e-15)
    assert m.max_glitch_post == 0.25
    assert m.rms_pre == pytest.approx(0.25, rel=1e-15)


def test_metrics_settle_validation():
    with pytest.raises(ValueError):
        sync_error_metrics(fake_result(np.zeros(1001)), 0.6)


def test_metric_window_additivity(rng):
    d = rng.normal(size=1001)
    r = fake_result(d, t_sync=0.5)
    whole = sync_error_metrics(r, 0.0).rms_post
    post = d[r.t >= 0.5 - 1e-12]
    parts = np.array_split(post, 3)
    combined = math.sqrt(sum(len(q) * np.mean(q ** 2) for q in parts) / len(post))
    assert whole == pytest.approx(combined, rel=1e-12)


# -- synchronization ---------------------------------------------------------------

def test_matched_circuits_synchronize():
    r = run_synchronization(SyncConfig())
    m = r.metrics
    assert m.ratio < 1e-3
    assert m.rms_pre / m.signal_rms > 0.1
    np.testing.assert_array_equal(r.difference, r.master_v_y - r.slave_v_y)
    assert np.all(np.isfinite(r.difference))


def test_capacitor_mismatch_small_glitches():
    m = run_synchronization(SyncConfig(slave=table_one().scaled(c1=1.05, c2=1.05))).metrics
    assert m.ratio < 0.1
    assert m.max_glitch_post < m.signal_peak


@pytest.mark.xfail(strict=True, reason=R0_MISMATCH_REASON)
def test_r0_mismatch_breaks_sync():
    m = run_synchronization(SyncConfig(slave=table_one().scaled(r0=1.05))).metrics
    assert m.ratio > 0.3


def test_mismatch_monotone():
    errs = [run_synchronization(SyncConfig(slave=table_one().scaled(r0=1 + f))).metrics.rms_post
            for f in (0.0, 0.01, 0.02, 0.05)]
    assert errs == sorted(errs)


def test_substitution_idempotent():
    cfg = SyncConfig(slave_init=SyncConfig().master_init, t_sync=1e-3, t_end=0.02, settle=0.0)
    r = run_synchronization(cfg)
    k = np.nonzero(r.t >= cfg.t_sync)[0][0]
    assert not np.any(r.difference[k:])


def test_resistive_coupling_synchronizes():
    cfg = SyncConfig(coupling="resistive", r_c=300.0)
    assert run_synchronization(cfg).metrics.ratio < 1e-3


def test_sync_csv_roundtrip(tmp_path):
    cfg = SyncConfig(t_sync=0.01, t_end=0.03, settle=0.005)
    r = run_synchronization(cfg)
    f = tmp_path / "sync.csv"
    write_sync_csv(r, f)
    back = read_sync_csv(f, cfg.t_sync)
    a, b = r.metrics, sync_error_metrics(back, cfg.settle)
    for name in ("rms_pre", "rms_post", "max_glitch_post", "signal_rms"):
        assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-12, abs=1e-12)


def test_sync_divergence_reported():
    from chualab.circuit import CircuitParams, DiodeModel
    bad = CircuitParams(18e-3, 10e-9, 100e-9, 1800.0, DiodeModel((), (-1.0,)))
    with pytest.raises(DivergenceError):
        run_synchronization(SyncConfig(master=bad, t_sync=1e-3, t_end=2e-3, settle=0.0))


# -- masking -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def masked():
    cfg = SyncConfig()
    rms = drive_rms(cfg)
    msg = tone(500.0, 0.02 * rms, cfg.t_end, 1.0 / cfg.dt)
    return cfg, rms, msg, mask_transmit(msg, cfg)


def test_tone_samples():
    x = tone(500.0, 2.0, 0.01, 8000.0)
    assert len(x) == 81 and x[0] == 0.0
    assert np.max(np.abs(x)) == pytest.approx(2.0, rel=1e-12)


def test_zero_message_channel_is_drive():
    cfg = SyncConfig(t_end=0.12, settle=0.01)
    ch = mask_transmit(np.zeros(10), cfg)
    np.testing.assert_array_equal(ch.channel, ch.drive)


def test_channel_minus_drive_is_message(masked):
    _, _, msg, ch = masked
    np.testing.assert_allclose(ch.message, msg, rtol=0, atol=1e-12 * np.abs(msg).max())
    # additive up to rounding of the sum
    tol = 4 * np.spacing(np.abs(ch.channel)) + 1e-12 * np.abs(msg).max()
    assert np.all(np.abs((ch.channel - ch.drive) - ch.message) <= tol)


def test_channel_spectrum_chaos_dominated(masked):
    cfg, _, _, ch = masked
    k = int(round(cfg.t_sync / cfg.dt))
    x = ch.channel[k:] - ch.channel[k:].mean()
    spec = np.abs(np.fft.rfft(x))
    f = np.fft.rfftfreq(len(x), cfg.dt)
    tone_bin = np.argmin(np.abs(f - 500.0))
    assert spec[tone_bin] < spec.max()
    assert np.argmax(spec) != tone_bin


def test_masking_matched_recovers(masked):
    cfg, _, msg, ch = masked
    assert masking_correlation(msg, recover_message(ch, cfg)) > 0.9


def test_masking_mismatched_fails(masked):
    cfg, _, msg, ch = masked
    eve = SyncConfig(slave=table_one().scaled(r0=1.05))
    assert masking_correlation(msg, recover_message(ch, eve)) < 0.5


def test_zero_message_recovers_nothing():
    cfg = SyncConfig()
    rms = drive_rms(cfg)
    rec = recover_message(mask_transmit(np.zeros(1), cfg), cfg)
    k = int(round(rec.valid_from / cfg.dt))
    assert np.sqrt(np.mean(rec.recovered[k:] ** 2)) < 1e-3 * rms


def test_over_amplitude_warns():
    cfg = SyncConfig(t_end=0.12, settle=0.01)
    msg = tone(500.0, 2.0, cfg.t_end, 1.0 / cfg.dt)
    with pytest.warns(RuntimeWarning):
        ch = mask_transmit(msg, cfg)
    assert ch.warning and "exceeds" in ch.warning


def test_small_message_does_not_warn(masked):
    cfg, _, msg, _ = masked
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert mask_transmit(msg, cfg).warning is None


def test_masking_needs_v_c1_drive():
    with pytest.raises(ValueError):
        mask_transmit(np.zeros(3), SyncConfig(drive_variable="v_c2"))


def test_recover_rejects_short_channel():
    with pytest.raises(ValueError):
        recover_message(np.zeros(1), SyncConfig())


@pytest.mark.xfail(strict=True, reason=("the regenerated v_c1 subsystem is locally unstable in the inner "
                                        "diode region and amplifies channel perturbations ~2x; "
                                        "see decisions ledger"))
def test_masking_linearity(masked):
    cfg, _, _, ch = masked
    base = recover_message(ch.channel, cfg).recovered
    delta = 1e-4 * np.sin(2 * np.pi * 1300.0 * ch.t)
    moved = recover_message(ch.channel + delta, cfg).recovered
    k = int(round((cfg.t_sync + cfg.settle) / cfg.dt))
    gain = np.sqrt(np.mean((moved - base)[k:] ** 2)) / np.sqrt(np.mean(delta[k:] ** 2))
    assert gain <= 1.1
