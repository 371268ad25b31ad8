"""Invariant checks run by ``ccbf audit``.

Every suite returns a dict with ``passed``, ``checked``, ``worst`` and a short
list of ``failures`` (each with the offending configuration).
"""
from __future__ import annotations

import numpy as np

from .circulation import Parity, cayley_orthonormal, omega_conjugate
from .controller import DEAD_TANGENT_TOL, DeadTangent, Mode, check_scenario, control
from .field import OffManifold, softmin

KKT_TOL = 1e-8
GRAD_RTOL = 1e-4
FD_STEP = 1e-6
MAX_REPORTED = 5


def _suite(checked, worst, failures, passed=None):
    return {
        "passed": not failures if passed is None else passed,
        "checked": int(checked),
        "worst": float(worst),
        "failures": failures[:MAX_REPORTED],
        "failure_count": len(failures),
    }


def sample_box(scenario):
    """Per-coordinate (lo, hi) used to draw audit samples."""
    if scenario.sample_box is not None:
        return np.asarray(scenario.sample_box, float)
    if scenario.plot_region is not None and scenario.n == 2:
        r = scenario.plot_region
        return np.array([[r[0], r[1]], [r[2], r[3]]])
    pts = np.vstack([np.asarray(scenario.initial_states, float), scenario.controller.goal])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.5 + 0.25 * (hi - lo)
    return np.column_stack([lo - pad, hi + pad])


def sample_configurations(scenario, count, rng, max_tries=None):
    """Uniform samples from the sample box that lie in the safe set (D > 0, grad D != 0)."""
    box = sample_box(scenario)
    field_ = scenario.field
    out = []
    tries = 0
    max_tries = 200 * count if max_tries is None else max_tries
    while len(out) < count and tries < max_tries:
        q = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random(len(box))
        tries += 1
        try:
            if field_.value(q) > 0:
                field_.normal(q)
                out.append(q)
        except OffManifold:
            continue
    return out


def fallback_margin(cfg, field_, q):
    """Smallest slack of the fallback point K T / |T|^2 over every CCBF-QP constraint."""
    D, grad = field_.evaluate(q)
    N = field_.normal(q)
    T = cfg.circulation.tangent(N)
    beta = cfg.schedule.beta(D)
    if float(np.linalg.norm(T)) < DEAD_TANGENT_TOL:
        raise DeadTangent(q, beta, float(np.linalg.norm(T)))
    mu = cfg.fallback_gain * T / float(T @ T)
    slack = [N @ mu - cfg.schedule.alpha(D), T @ mu - beta]
    if cfg.A is not None:
        slack.extend(cfg.A @ mu - cfg.b)
    return float(np.min(slack))


def omega_suite(scenario, rng, variants=20, tol=1e-12):
    spec = scenario.controller.circulation
    failures = [{"matrix": "scenario", "violations": spec.violations(tol)}] if spec.violations(tol) else []
    worst = 0.0
    for k in range(variants):
        if spec.parity is Parity.EVEN_FULL:
            Q = cayley_orthonormal(rng.normal(size=(spec.n, spec.n)))
        else:
            Q = np.eye(spec.n)[rng.permutation(spec.n)] * rng.choice([-1.0, 1.0], spec.n)[:, None]
        W = omega_conjugate(spec, Q)
        target = np.eye(spec.n)
        if W.dead_index is not None:
            target[W.dead_index, W.dead_index] = 0.0
        err = max(float(np.max(np.abs(W.omega + W.omega.T))),
                  float(np.max(np.abs(W.omega.T @ W.omega - target))))
        worst = max(worst, err)
        bad = W.violations(tol)
        if bad:
            failures.append({"matrix": f"conjugate {k}", "violations": bad})
    return _suite(variants + 1, worst, failures)


def softmin_suite(scenario, samples, rng, draws=1000):
    field_ = scenario.field
    h, m = field_.h, field_.m
    bound = h * np.log(m)
    worst, failures = 0.0, []
    vectors = [rng.normal(scale=10.0 ** rng.uniform(-3, 3), size=m) for _ in range(draws)]
    vectors += [field_.clearances(q)[0] for q in samples]
    for g in vectors:
        gap = softmin(g, h) - g.min()
        tol = 1e-12 * (1.0 + abs(g.min()))
        worst = max(worst, gap - bound, -gap)
        if gap < -tol or gap > bound + tol:
            failures.append({"values_min": float(g.min()), "gap": float(gap)})
    return _suite(len(vectors), worst, failures)


def gradient_suite(scenario, samples, step=FD_STEP, rtol=GRAD_RTOL):
    field_ = scenario.field
    worst, failures = 0.0, []
    for q in samples:
        _, g = field_.evaluate(q)
        fd = np.empty_like(g)
        for i in range(q.size):
            e = np.zeros(q.size)
            e[i] = step
            fd[i] = (field_.value(q + e) - field_.value(q - e)) / (2 * step)
        err = float(np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-12))
        worst = max(worst, err)
        if err > rtol:
            failures.append({"q": q.tolist(), "relative_error": err})
    return _suite(len(samples), worst, failures)


def kkt_suite(scenario, samples, tol=KKT_TOL):
    cfg, field_ = scenario.controller, scenario.field
    worst, failures = 0.0, []
    for q in samples:
        try:
            out = control(cfg, field_, q)
        except DeadTangent as exc:
            failures.append({"q": q.tolist(), "error": f"DeadTangent: {exc}"})
            continue
        if out.used_fallback:
            failures.append({"q": q.tolist(), "error": "infeasible QP, fallback used"})
            continue
        r = out.solution.kkt_residual
        worst = max(worst, r)
        if r > tol:
            failures.append({"q": q.tolist(), "kkt_residual": r})
    return _suite(len(samples), worst, failures)


def feasibility_suite(scenario, samples):
    cfg, field_ = scenario.controller.with_mode(Mode.CCBF), scenario.field
    worst, failures = np.inf, []
    for q in samples:
        try:
            margin = fallback_margin(cfg, field_, q)
        except DeadTangent as exc:
            failures.append({"q": q.tolist(), "error": f"DeadTangent: {exc}"})
            continue
        worst = min(worst, margin)
        if not margin > 0:
            failures.append({"q": q.tolist(), "margin": margin})
    return _suite(len(samples), worst if np.isfinite(worst) else 0.0, failures)


def start_suite(scenario):
    cfg, field_ = scenario.controller, scenario.field
    failures = []
    for k, q in enumerate(scenario.initial_states):
        q = np.asarray(q, float)
        try:
            D = field_.value(q)
            if not D > 0:
                failures.append({"start": k, "q": q.tolist(), "error": f"D(q0) = {D:.6g} <= 0"})
                continue
            control(cfg, field_, q)
        except (DeadTangent, OffManifold) as exc:
            failures.append({"start": k, "q": q.tolist(), "error": f"{type(exc).__name__}: {exc}"})
    return _suite(len(scenario.initial_states), 0.0, failures)


def run_audit(scenario, seed=0, samples=200):
    rng = np.random.default_rng(seed)
    checks = check_scenario(scenario.controller, scenario.field)
    failed_checks = [k for k, ok in checks.items() if not ok]
    qs = sample_configurations(scenario, samples, rng)
    suites = {
        "omega": omega_suite(scenario, rng),
        "softmin": softmin_suite(scenario, qs, rng),
        "gradient": gradient_suite(scenario, qs),
        "qp_kkt": kkt_suite(scenario, qs),
        "strict_feasibility": feasibility_suite(scenario, qs),
        "initial_states": start_suite(scenario),
    }
    if len(qs) < samples:
        suites["sampling"] = _suite(len(qs), 0.0, [{"error": f"only {len(qs)} of {samples} samples in the safe set"}])
    return {
        "scenario": scenario.name,
        "mode": scenario.controller.mode.value,
        "seed": seed,
        "samples": len(qs),
        "validation": checks,
        "failed_checks": failed_checks,
        "suites": suites,
        "passed": not failed_checks and all(s["passed"] for s in suites.values()),
    }
