"""Acceptance suite: one test and one printed verdict line per criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see every verdict.

Two criteria fail by design, freezing defects of the source material:

* criterion 2: one printed Erlang table entry (0.19) sits 2.18% from the
  value its own formula produces (two-significant-digit rounding near a
  leading 19 can reach 2.6%), so the stated 2% cannot be met for it;
* criterion 4: the stationary-vector and root families satisfy only
  phase-summed projections of the balance equations, so the stated
  per-phase residual bound of 1e-8 is mathematically unattainable
  (measured residuals sit at 1e-2..1e0 scale; the projected residual is
  printed alongside and is at machine precision for the stationary
  family).

Everything else passes at the stated tolerances.
"""

import math
import time

import numpy as np
import pytest

from supermarket import convergence, meanfield, metrics, tables
from supermarket import fixedpoint as fx
from supermarket.distributions import Erlang, Exponential, Weibull
from supermarket.fixedpoint import FixedPointFamily, classical_tail
from supermarket.numerics import integrate
from supermarket.phasetype import erlang_representation, fixed_point_ph, fixed_point_residuals, theta_ph
from supermarket.simulator import SimConfig, kurtz_experiment, run

LAM, MU, D = 1.0, 2.0, 2          # shared exponential workload (criteria 8-10)
RHO = LAM / MU


def verdict(num, description, checks):
    """checks: list of (label, passed, detail); prints the verdict, then asserts."""
    passed = all(ok for _, ok, _ in checks)
    print(f"ACCEPTANCE {num:>2} {'PASS' if passed else 'FAIL'} - {description}")
    for label, ok, detail in checks:
        print(f"    [{'ok' if ok else 'FAIL'}] {label}: {detail}")
    assert passed, f"criterion {num}: " + "; ".join(l for l, ok, _ in checks if not ok)


@pytest.fixture(scope="module")
def sim_crit5():
    cfg = SimConfig(n=500, lam=0.9, d=2, dist=Exponential(1.0),
                    seed=20260810, replications=8)
    t0 = time.perf_counter()
    res = run(cfg)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def sim_crit6():
    cfg = SimConfig(n=200, lam=0.5, d=1, dist=Exponential(1.0),
                    seed=60, replications=8)
    return run(cfg)


@pytest.fixture(scope="module")
def sim_crit7():
    cfg = SimConfig(n=500, lam=0.9, d=2, dist=Weibull(0.5, 2.0),
                    seed=70, replications=8)
    return run(cfg)


@pytest.fixture(scope="module")
def sim_crit10():
    cfg = SimConfig(n=500, lam=LAM, d=D, dist=Exponential(MU),
                    seed=100, replications=8)
    return run(cfg)


@pytest.fixture(scope="module")
def meanfield_setup():
    fam = FixedPointFamily.build(LAM, D, Exponential(MU))
    K = fam.truncation_level(1e-12)
    config = meanfield.MeanFieldConfig(system="exp", lam=LAM, d=D, K=K,
                                       t_end=50.0, step=0.01, mu=MU)
    traj = meanfield.integrate_meanfield(config)
    pi = meanfield.classical_fixed_point(RHO, D, K)
    return K, traj, pi


def test_criterion_01_weibull_table():
    t0 = time.perf_counter()
    rows = tables.weibull_table()
    checks = []
    worst = max(r.relative_error for r in rows)
    checks.append(("closed form within 2% of all 8 printed values",
                   worst <= 0.02, f"max relative error {worst:.3%}"))
    worst_gap = 0.0
    for r in rows:
        dist = Weibull(tau=r.label["tau"], mu=5.0)
        gap = abs(fx.theta(dist, 2, "generic") - r.theta_reproduced) / r.theta_reproduced
        worst_gap = max(worst_gap, gap)
    checks.append(("generic quadrature matches closed form within 1e-8",
                   worst_gap <= 1e-8, f"max relative gap {worst_gap:.2e}"))
    elapsed = time.perf_counter() - t0
    checks.append(("runtime under 1 s", elapsed < 1.0, f"{elapsed:.3f} s"))
    verdict(1, "heavy-tailed Weibull table reproduction", checks)


def test_criterion_02_erlang_table():
    t0 = time.perf_counter()
    rows = tables.erlang_table()
    elapsed = time.perf_counter() - t0
    checks = []
    for r in rows:
        label = f"(m={r.label['m']}, d={r.label['d']})"
        checks.append((f"printed entry {label} within 2%",
                       r.relative_error <= 0.02,
                       f"printed {r.theta_printed} vs computed {r.theta_reproduced:.6g} "
                       f"({r.relative_error:.3%})"))
    checks.append(("generic-mode value emitted alongside",
                   all("theta_generic_standard" in r.extra for r in rows), "emitted"))
    checks.append(("runtime under 5 s", elapsed < 5.0, f"{elapsed:.3f} s"))
    verdict(2, "Erlang table reproduction (printed formula, labels transposed)", checks)


def test_criterion_03_almost_exponential_table():
    t0 = time.perf_counter()
    rows = tables.almost_exponential_table()
    elapsed = time.perf_counter() - t0
    worst = max(r.relative_error for r in rows)
    checks = [
        ("all 4 printed entries within 5% (split-at-1 quadrature)",
         worst <= 0.05, f"max relative error {worst:.3%}"),
        ("runtime under 10 s", elapsed < 10.0, f"{elapsed:.3f} s"),
    ]
    verdict(3, "almost-exponential table reproduction", checks)


def test_criterion_04_ph_methods():
    checks = []
    for m in (2, 5):
        for d in (2, 3):
            rep = erlang_representation(m, 1.0)
            lam = 0.4 * rep.mu
            t3 = theta_ph(rep, d, 3)
            t2 = theta_ph(rep, d, 2)
            checks.append((f"method-3 theta exactly 1 (m={m}, d={d})",
                           t3 == 1.0, f"{t3}"))
            checks.append((f"method-2 theta m^(1-d) within 1e-12 (m={m}, d={d})",
                           abs(t2 - float(m) ** (1 - d)) <= 1e-12, f"{t2}"))
            fp2 = fixed_point_ph(rep, lam, d, 2)
            fp3 = fixed_point_ph(rep, lam, d, 3)
            r2 = fixed_point_residuals(rep, lam, d, fp2.levels, form="vector")
            r3 = fixed_point_residuals(rep, lam, d, fp3.levels, form="vector")
            worst = max(float(np.max(r2["levels"])), float(np.max(r3["levels"])))
            checks.append((f"balance residual < 1e-8 (m={m}, d={d})",
                           worst < 1e-8,
                           f"sup residual {worst:.3e} (projected form for method 2: "
                           f"{float(np.max(fixed_point_residuals(rep, lam, d, fp2.levels, form='projected')['levels'])):.1e})"))
            kmax = min(max(fp2.levels), max(fp3.levels))
            differ = all(np.all(np.abs(fp2.levels[k] - fp3.levels[k]) > 0.0)
                         for k in range(1, kmax + 1))
            checks.append((f"families differ entrywise (m={m}, d={d})",
                           differ, "non-uniqueness"))
    verdict(4, "phase-type methods: parameters, residuals, non-uniqueness", checks)


def test_criterion_05_doubly_exponential_tail(sim_crit5):
    res, elapsed = sim_crit5
    checks = []
    for k in range(1, 5):
        expect = classical_tail(0.9, 2, k)
        est, _ = res.tails[k]
        checks.append((f"tail k={k} within 0.02 of {expect:.5f}",
                       abs(est - expect) <= 0.02,
                       f"simulated {est:.5f} (|gap| {abs(est - expect):.5f})"))
    checks.append(("runtime under 60 s", elapsed < 60.0, f"{elapsed:.1f} s"))
    verdict(5, "simulator vs classical doubly exponential tail (n=500)", checks)


def test_criterion_06_mm1_baseline(sim_crit6):
    est, ci = sim_crit6.sojourn_mean
    fam = FixedPointFamily.build(0.5, 1, Exponential(1.0))
    closed = metrics.expected_sojourn(fam).e_td
    checks = [
        ("simulated sojourn within 3 CI of 2.0",
         abs(est - 2.0) <= 3.0 * ci, f"{est:.4f} +- {ci:.4f}"),
        ("closed form equals 1/(mu - lambda) = 2.0",
         abs(closed - 2.0) <= 1e-12, f"{closed!r}"),
    ]
    verdict(6, "single-choice M/M/1 baseline", checks)


def test_criterion_07_heavy_tail_light_tail(sim_crit7):
    lg = [math.log10(sim_crit7.tails[k][0]) for k in (1, 2, 3)]
    gap1, gap2 = lg[0] - lg[1], lg[1] - lg[2]
    checks = [
        ("log-tail gaps widen (super-geometric decay)",
         gap1 < gap2, f"gap(1->2) {gap1:.4f} < gap(2->3) {gap2:.4f}"),
    ]
    verdict(7, "heavy-tailed service keeps the doubly exponential profile", checks)


def test_criterion_08_meanfield_bound_and_decay(meanfield_setup):
    K, traj, pi = meanfield_setup
    overshoot = float(np.max(traj.states - pi[None, :]))
    final_err = float(np.max(np.abs(traj.states[-1] - pi)))
    c0, delta, r2 = convergence.fit_decay(traj, pi, (5.0, 40.0))
    checks = [
        ("trajectory below fixed point (slack 1e-9)",
         overshoot <= 1e-9, f"max overshoot {overshoot:.2e}"),
        ("final state within 1e-4 at t=50",
         final_err < 1e-4, f"error {final_err:.2e}"),
        ("potential decays exponentially on [5,40]",
         delta > 0.0 and r2 > 0.98, f"delta {delta:.3f}, r^2 {r2:.4f}"),
    ]
    verdict(8, "mean-field upper bound and exponential convergence", checks)


def test_criterion_09_kurtz_scaling():
    config = meanfield.MeanFieldConfig(system="exp", lam=LAM, d=D, K=6,
                                       t_end=20.0, step=0.01, mu=MU)
    oracle = meanfield.integrate_meanfield(config)
    base = SimConfig(n=10, lam=LAM, d=D, dist=Exponential(MU), seed=90,
                     horizon=20.0, warmup=0.0, replications=3)
    errors = dict(kurtz_experiment(base, [50, 200, 800], oracle))
    checks = [
        ("sup-norm gap shrinks from n=50 to n=800",
         errors[800] < errors[50],
         f"error(50)={errors[50]:.4f}, error(200)={errors[200]:.4f}, "
         f"error(800)={errors[800]:.4f}"),
    ]
    verdict(9, "deterministic-limit scaling in the system size", checks)


def test_criterion_10_sojourn_cross_validation(sim_crit10):
    fam = FixedPointFamily.build(LAM, D, Exponential(MU))
    report = metrics.expected_sojourn(fam)
    est, ci = sim_crit10.sojourn_mean
    lams = np.linspace(0.04, 0.44, 11)
    sweep = [metrics.expected_sojourn(FixedPointFamily.build(float(l), 2, Erlang(2, 1.0))).e_td
             for l in lams]
    first, second = np.diff(sweep), np.diff(sweep, n=2)
    checks = [
        ("series value matches 0.63284",
         abs(report.e_td - 0.63284) < 1e-5, f"{report.e_td:.7f}"),
        ("simulated sojourn within 3 CI of the series value",
         abs(est - report.e_td) <= 3.0 * ci, f"{est:.6f} +- {ci:.6f}"),
        ("Erlang sweep increasing", bool(np.all(first > 0.0)), f"min slope {first.min():.3g}"),
        ("Erlang sweep convex", bool(np.all(second > 0.0)), f"min curvature {second.min():.3g}"),
    ]
    verdict(10, "expected sojourn: series vs simulation, sweep shape", checks)


def test_criterion_11_property_suites(sim_crit5, sim_crit6, sim_crit7, sim_crit10):
    checks = []

    moment_grid = [Exponential(1.5), Erlang(3, 2.0), Weibull(0.5, 5.0),
                   Weibull(1.3, 0.8), Exponential(0.5)]
    worst_mean = worst_m2 = 0.0
    for dist in moment_grid:
        spec = dist.quadrature_spec()
        q1 = integrate(dist.survival, 0.0, math.inf, spec)
        q2 = 2.0 * integrate(lambda x: x * dist.survival(x), 0.0, math.inf, spec)
        worst_mean = max(worst_mean, abs(q1 - dist.mean()) / dist.mean())
        worst_m2 = max(worst_m2, abs(q2 - dist.second_moment()) / dist.second_moment())
    checks.append(("survival quadrature equals mean within 1e-8",
                   worst_mean <= 1e-8, f"worst {worst_mean:.2e}"))
    checks.append(("weighted quadrature equals second moment within 1e-6",
                   worst_m2 <= 1e-6, f"worst {worst_m2:.2e}"))

    # 100-point sweep in the regime where the printed bound applies
    # (arrival rate above one; see the decisions ledger)
    dists = [Exponential(2.5), Erlang(2, 5.0), Erlang(5, 12.5),
             Weibull(0.5, math.gamma(3.0) * 2.5),
             Weibull(1.5, math.gamma(1 + 1 / 1.5) * 2.5)]
    points = [(dist, float(lam), d) for dist in dists
              for lam in np.linspace(1.02, 1.3, 10) for d in (2, 3)]
    monotone = bounded = True
    for dist, lam, d in points:
        fam = FixedPointFamily.build(lam, d, dist)
        prev = 1.0
        for k in range(1, 8):
            u = fam.tail(k)
            monotone &= u < prev or (u == 0.0 and prev == 0.0)
            bounded &= u < fam.upper_bound(k) or u == 0.0
            prev = u
    checks.append((f"tail monotonicity over {len(points)}-point sweep", monotone, "strict decrease"))
    checks.append(("upper-bound inequality over the sweep", bounded, "tail < bound"))

    cfg = SimConfig(n=40, lam=0.5, d=2, dist=Exponential(1.0), seed=1234,
                    horizon=300.0, warmup=60.0, replications=3)
    a, b = run(cfg), run(cfg)
    checks.append(("simulator reruns bit-identical",
                   a.tails == b.tails and a.sojourn_mean == b.sojourn_mean
                   and a.littles_check == b.littles_check, "deterministic"))

    for name, res in (("n=500 d=2", sim_crit5[0]), ("m/m/1", sim_crit6),
                      ("weibull", sim_crit7), ("sojourn", sim_crit10)):
        est, ci = res.littles_check
        checks.append((f"Little's law on {name} run",
                       abs(est - 1.0) <= 3.0 * ci, f"{est:.6f} +- {ci:.6f}"))
    verdict(11, "property suites: quadrature identities, sweep, determinism, Little's law", checks)
