"""Acceptance criteria, one test each.

Every test prints a ``[PASS]`` or ``[FAIL]`` line through the
``record_criterion`` fixture before asserting, and the collected lines are
repeated in the terminal summary.  Run with ``pytest tests/test_acceptance.py -s``
to see them inline.
"""

import json
import math
import time

import numpy as np
import pytest

from drift_lab import io
from drift_lab.cli import WALL_TIME_KEY, main
from drift_lab.dynamics import full_system_matrix, rhs_averaged, system_rhs
from drift_lab.experiments import (allan_deviation, averaging_convergence, bloch_siegert_scan,
                                   drift_experiment)
from drift_lab.integrate import integrate, stroboscopic_orbit
from drift_lab.model import ModelParams, polar_to_bloch
from drift_lab.stationary import stationary_general, stationary_resonance

TWO_PI = 2 * math.pi


def test_chart_equivalence(record_criterion):
    p = ModelParams(1.0, 1.0, 1.0, 1.0, 1e-3).at_resonance()
    polar0 = (0.6, 0.2, 0.3)
    dt = TWO_PI / 1024
    t_end = 1.0 / p.epsilon
    start = time.perf_counter()
    full = integrate(system_rhs("full", p), polar_to_bloch(polar0), 0.0, t_end, dt, stride=16)
    polar = integrate(system_rhs("polar", p), polar0, 0.0, t_end, dt, stride=16, label="polar")
    elapsed = time.perf_counter() - start
    a, z, psi = polar.samples.T
    converted = np.column_stack([a * np.cos(psi), a * np.sin(psi), z])
    err = float(np.max(np.abs(converted - full.samples)))
    err = max(err, float(np.max(np.abs(np.subtract(polar_to_bloch(polar.final), full.final)))))
    passed = err < 1e-7 and elapsed < 10.0
    record_criterion(1, "chart equivalence", passed,
                     f"max |Bloch - polar| = {err:.3e} (< 1e-7), runtime {elapsed:.2f} s (< 10 s)")
    assert passed


def test_conservation(record_criterion):
    p = ModelParams(0.0, 0.0, 0.0, 1.0, 1e-3)
    y0 = (0.6, 0.0, 0.8)
    n_periods = 10_000
    orbit = stroboscopic_orbit(lambda t: full_system_matrix(t, p), y0, TWO_PI, 4096, n_periods)
    norm = np.sum(orbit * orbit, axis=1)
    drift = float(np.max(np.abs(norm - norm[0])))
    # inside the last period, by direct stepping from the stroboscopic state
    last = integrate(system_rhs("full", p), orbit[-2].astype(float), 0.0, TWO_PI,
                     TWO_PI / 4096, stride=64)
    inner = float(np.max(np.abs(np.sum(last.samples ** 2, axis=1) - 1.0)))
    drift = max(drift, inner)
    passed = drift < 1e-10
    record_criterion(2, "conservation of |R|^2", passed,
                     f"max drift over {n_periods} periods = {drift:.3e} (< 1e-10)")
    assert passed


def test_fixed_point_residual(record_criterion):
    rng = np.random.default_rng(20240611)
    worst = 0.0
    for _ in range(100):
        g1, g2, w1 = rng.uniform(0.05, 5.0, 3)
        lam = rng.uniform(0.05, 5.0) * rng.choice([-1.0, 1.0])
        eps = 10 ** rng.uniform(-4, -1.5)
        p = ModelParams(g1, g2, lam, w1, eps, rng.uniform(-5, 5))
        sp = stationary_general(p)
        worst = max(worst, float(np.linalg.norm(rhs_averaged(sp.state, p))))
    sat_err = 0.0
    for _ in range(20):
        g1, g2, lam = rng.uniform(0.1, 3.0, 3)
        sp = stationary_resonance(ModelParams(g1, g2, lam, math.sqrt(g1 * g2), 1e-3))
        sat_err = max(sat_err, abs(sp.z_s - lam / (2 * g2)),
                      abs(sp.a_s - lam / (2 * math.sqrt(g1 * g2))))
    passed = worst < 1e-12 and sat_err < 1e-14
    record_criterion(3, "fixed-point residual", passed,
                     f"max residual over 100 draws = {worst:.3e} (< 1e-12); "
                     f"saturation values reproduced to {sat_err:.3e} (< 1e-14)")
    assert passed


def test_stability_example(record_criterion, p0):
    sp = stationary_general(p0)
    expected = (-1 + 1j, -1 - 1j, -1)
    err = max(abs(a - b) for a, b in zip(sp.eigenvalues, expected))
    passed = err < 1e-10 and sp.stable
    record_criterion(4, "stability of P0", passed,
                     f"eigenvalues {[complex(round(e.real, 12), round(e.imag, 12)) for e in sp.eigenvalues]}, "
                     f"error {err:.3e} (< 1e-10), stable={sp.stable}")
    assert passed


def test_bloch_siegert(record_criterion):
    start = time.perf_counter()
    shifts = {}
    errors = {}
    for w1 in (0.5, 1.0):
        result = bloch_siegert_scan(ModelParams(1.0, 1.0, 1.0, w1, 0.01))
        shifts[w1] = result.summary["delta_star"]
        errors[w1] = result.summary["relative_error"]
    elapsed = time.perf_counter() - start
    ratio = shifts[1.0] / shifts[0.5]
    passed = max(errors.values()) < 0.05 and abs(ratio - 4) <= 0.2 and elapsed < 60
    record_criterion(5, "Bloch-Siegert shift", passed,
                     f"relative errors {errors[0.5]:.2e}, {errors[1.0]:.2e} (< 5%); "
                     f"shift ratio {ratio:.4f} (4 +/- 5%); runtime {elapsed:.2f} s (< 60 s)")
    assert passed


def test_averaging_order(record_criterion, p0):
    start = time.perf_counter()
    result = averaging_convergence(p0, (4e-3, 2e-3, 1e-3, 5e-4), horizon=5.0)
    elapsed = time.perf_counter() - start
    bare = result.summary["slope_bare"]
    first = result.summary["slope_first_order"]
    passed = (bare is not None and abs(bare - 1) <= 0.3 and first is not None
              and abs(first - 2) <= 0.3 and elapsed < 300)
    record_criterion(6, "averaging order", passed,
                     f"bare slope {bare:.3f} (1 +/- 0.3), first-order slope {first:.3f} "
                     f"(2 +/- 0.3), runtime {elapsed:.1f} s (< 300 s)")
    assert passed


def test_first_order_drift(record_criterion, p0):
    eps = p0.epsilon
    target = -eps * math.sin(0.1)
    up = drift_experiment(p0, (0.0, 0.0, 0.1)).initial_deviation
    down = drift_experiment(p0, (0.0, 0.0, -0.1)).initial_deviation
    rel = abs(up - target) / abs(target)
    passed = rel < 0.1 and up * down < 0
    record_criterion(7, "first-order drift", passed,
                     f"deviation at +0.1: {up:.4e} vs {target:.4e} (rel. error {rel:.2%} < 10%); "
                     f"at -0.1: {down:.4e} (opposite sign)")
    assert passed


def _brute_allan(y, m):
    bins = len(y) // m
    means = [math.fsum(y[k * m:(k + 1) * m]) / m for k in range(bins)]
    sq = [(means[k + 1] - means[k]) ** 2 for k in range(bins - 1)]
    return math.sqrt(0.5 * math.fsum(sq) / len(sq))


def test_allan_estimator(record_criterion):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(3, 65))
        y = rng.normal(size=n)
        t = np.arange(n) * 0.25
        for m in range(1, n // 3 + 1):
            got = allan_deviation(np.column_stack([t, y]), [m * 0.25])[0][1]
            worst = max(worst, abs(got - _brute_allan(list(y), m)))
    t = np.arange(64.0)
    const = max(s for _, s in allan_deviation(np.column_stack([t, np.full(64, 2.5)])))
    alt = allan_deviation(np.column_stack([t, np.tile([0.0, 1.0], 32)]), [1.0])[0][1]
    alt_err = abs(alt - 1 / math.sqrt(2))
    passed = worst < 1e-14 and const == 0.0 and alt_err < 1e-15
    record_criterion(8, "Allan estimator", passed,
                     f"max |estimator - brute force| = {worst:.2e} (< 1e-14); constant -> {const}; "
                     f"alternating -> {alt:.15f}")
    assert passed


DETERMINISM_RUNS = [
    ("simulate", {"system": "full", "initial": [0.6, 0.0, 0.8], "t_end": 200.0}, []),
    ("simulate", {"system": "averaged", "initial": "stationary", "t_end": 500.0}, []),
    ("stationary", {}, ["--resonance"]),
    ("scan-bs", {}, ["--validate"]),
    ("convergence", {}, ["--epsilons", "0.02,0.01", "--horizon", "1"]),
    ("drift", {}, ["--horizon", "1"]),
]


def test_cli_determinism(record_criterion, tmp_path):
    base = {"gamma1": 1.0, "gamma2": 1.0, "lambda": 1.0, "omega1": 1.0, "epsilon": 0.01,
            "delta": 0.0025}
    mismatches = []
    checked = 0
    first_freq = None
    for i, (command, extra, flags) in enumerate(DETERMINISM_RUNS):
        config = tmp_path / f"cfg{i}.json"
        config.write_text(json.dumps({**base, **extra}))
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{i}{rep}"
            code = main([command, "--config", str(config), "--out", str(out), *flags])
            assert code == 0, f"{command} exited with {code}"
            outs.append(out)
        if first_freq is None:
            first_freq = outs[0] / "frequency.csv"
        for path in sorted(outs[0].iterdir()):
            other = outs[1] / path.name
            if path.name == "summary.json":
                s1, s2 = (json.loads(p.read_text()) for p in (path, other))
                s1.pop(WALL_TIME_KEY)
                s2.pop(WALL_TIME_KEY)
                same = s1 == s2
            else:
                same = path.read_bytes() == other.read_bytes()
            checked += 1
            if not same:
                mismatches.append(f"{command}/{path.name}")
    # allan, fed from the first simulate run
    outs = []
    for rep in ("a", "b"):
        out = tmp_path / f"allan{rep}"
        assert main(["allan", "--input", str(first_freq), "--out", str(out)]) == 0
        outs.append(out)
    for name in ("allan.csv", "allan.gp"):
        checked += 1
        if (outs[0] / name).read_bytes() != (outs[1] / name).read_bytes():
            mismatches.append(f"allan/{name}")
    passed = not mismatches
    record_criterion(9, "CLI determinism", passed,
                     f"{checked} output files compared across 7 subcommand runs; "
                     f"mismatches: {mismatches or 'none'}")
    assert passed
