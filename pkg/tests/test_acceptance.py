"""Acceptance suite: one PASS/FAIL line per criterion.

Run ``pytest tests/test_acceptance.py -v`` (lines are printed even with
output capture on) or ``python tests/test_acceptance.py`` for the lines alone.
"""
import json
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from cha import fileio
from cha.codes import build_code, s_matrix_inverse
from cha.experiments import ScanConfig, run_angular_response, run_field_map, run_gain_benchmark
from cha.multiplex import (
    SignalMatrix,
    average_mse,
    demultiplex,
    monte_carlo_noise,
    multiplex_measure,
    noise_covariance,
    snr_gain,
)

S_ORDERS = (3, 7, 11, 19, 23, 31, 43, 59)


def _line(k, ok, detail, elapsed, limit):
    ok = ok and elapsed < limit
    return ok, f"CRITERION {k}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f}s < {limit:g}s) {detail}"


def criterion_1():
    worst = 0.0
    ok = True
    for n in S_ORDERS:
        s = build_code("smatrix", n).entries.astype(np.int64)
        eye, ones = np.eye(n, dtype=np.int64), np.ones((n, n), dtype=np.int64)
        ok &= np.array_equal(s @ s.T, (n + 1) // 4 * (eye + ones))
        ok &= set(s.sum(0)) == set(s.sum(1)) == {(n + 1) // 2}
        resid = np.abs(s @ s_matrix_inverse(build_code("smatrix", n)) - np.eye(n)).max()
        worst = max(worst, resid)
    return bool(ok and worst <= 1e-10), f"max inverse residual {worst:.2e}"


def criterion_2():
    g31 = snr_gain(build_code("smatrix", 31))
    g59 = snr_gain(build_code("smatrix", 59))
    had = [snr_gain(build_code("hadamard", n)) == math.sqrt(n) for n in (4, 8, 16, 32)]
    ok = abs(g31 - 2.8737) <= 1e-3 and abs(g59 - 3.9057) <= 1e-3
    ok &= round(g31, 2) == 2.87 and round(g59, 2) == 3.91 and all(had)
    return ok, f"G31={g31:.4f} G59={g59:.4f} hadamard exact={all(had)}"


def criterion_3():
    parts = []
    ok = True
    for n, target in ((31, 2.87), (59, 3.91)):
        cfg = ScanConfig.for_mask(n, scenario="gain", sigma=1e-3, trials=10_000, seed=0)
        g = run_gain_benchmark(cfg).results["measured_gain"]
        ok &= abs(g - target) <= 0.03 * target
        parts.append(f"n={n}: {g:.4f} vs {target}")
    return ok, "; ".join(parts)


def criterion_4():
    parts = []
    ok = True
    for n, interlace in ((7, 5), (31, 1)):
        cfg = ScanConfig.for_mask(n, scenario="fieldmap", interlace=interlace)
        r = run_field_map(cfg).results
        ok &= r["rows"] >= 40 and r["columns"] >= 31
        ok &= r["max_relative_deviation"] <= 1e-9 and r["map_max_relative_deviation"] <= 1e-9
        parts.append(f"n={n} {r['columns']}x{r['rows']} dev={r['max_relative_deviation']:.1e}")
    cfg = ScanConfig.for_mask(31, scenario="fieldmap", sigma=2e-3, seed=1)
    r = run_field_map(cfg).results
    ok &= abs(r["noise_gain"] / r["theoretical_gain"] - 1) <= 0.10
    parts.append(f"noise ratio {r['noise_gain']:.4f} vs {r['theoretical_gain']:.4f}")
    return ok, "; ".join(parts)


def criterion_5():
    cfg = ScanConfig.for_mask(59, scenario="angular", angles_deg=(10.0, 40.0))
    r = run_angular_response(cfg).results
    (m10, m40), (u10, u40) = r["masked_loss_db"], r["unmasked_loss_db"]
    ok = abs(u10 - 34.4) <= 1.5 and m10 <= 0.5 and m40 <= 10.0 and u40 >= 30.0 and m40 < u40
    return ok, f"10deg masked {m10:.2f} unmasked {u10:.2f} dB; 40deg masked {m40:.2f} unmasked {u40:.2f} dB"


def criterion_6():
    ok = True
    parts = []
    sigma = 0.5
    for n in (7, 31):
        w = build_code("smatrix", n)
        err = monte_carlo_noise(w, sigma, 100_000, seed=n)
        k = noise_covariance(w, sigma)
        frob = np.linalg.norm(err.T @ err / err.shape[0] - k) / np.linalg.norm(k)
        per_trial = np.mean(err**2, axis=1)
        stderr = per_trial.std(ddof=1) / math.sqrt(per_trial.size)
        z = abs(per_trial.mean() - average_mse(w, sigma)) / stderr
        ok &= frob <= 0.05 and z <= 3
        parts.append(f"n={n} K err {frob:.3f}, M {z:.2f} stderr")
    eye = build_code("identity", 31)
    ok &= np.array_equal(noise_covariance(eye, sigma), sigma**2 * np.eye(31))
    ok &= average_mse(eye, sigma) == sigma**2 and snr_gain(eye) == 1.0
    return ok, "; ".join(parts) + "; direct exact"


def criterion_7():
    ok = True
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cfg = ScanConfig.for_mask(31, scenario="fieldmap", sigma=1e-3, y_range_mm=2.0, seed=7)
        a = fileio.write_report(run_field_map(cfg), tmp / "a")
        b = fileio.write_report(run_field_map(cfg), tmp / "b")
        files = ["report.json"] + json.loads(a.read_text())["files"]
        ok &= all((tmp / "a" / f).read_bytes() == (tmp / "b" / f).read_bytes() for f in files)
        worst = 0.0
        for kind, n in (("smatrix", 31), ("smatrix", 59), ("hadamard", 32), ("identity", 8)):
            w = build_code(kind, n)
            x = np.random.default_rng(n).standard_normal((n, 200))
            worst = max(worst, np.abs(demultiplex(multiplex_measure(x, w), w) - x).max() / np.abs(x).max())
            ok &= fileio.read_matrix_csv(fileio.write_matrix_csv(tmp / f"{kind}{n}.csv", w)) == w
            s = SignalMatrix(x, 1e-8)
            ok &= np.array_equal(fileio.read_signal_csv(fileio.write_signal_csv(tmp / f"s{n}.csv", s))[1], x)
        ok &= worst <= 1e-10
    return ok, f"{len(files)} report files identical, roundtrip {worst:.1e}"


CRITERIA = {
    1: (criterion_1, 1.0),
    2: (criterion_2, 1.0),
    3: (criterion_3, 120.0),
    4: (criterion_4, 300.0),
    5: (criterion_5, 60.0),
    6: (criterion_6, 60.0),
    7: (criterion_7, 10.0),
}


def evaluate(k):
    fn, limit = CRITERIA[k]
    t = time.perf_counter()
    ok, detail = fn()
    return _line(k, bool(ok), detail, time.perf_counter() - t, limit)


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, capsys):
    ok, line = evaluate(k)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(k) for k in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
