"""Oracle and lemma checks across modules, assembled into a deterministic report."""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from . import presets
from .errors import HeatLabError
from .feynman_kac import (FlatProblem, bound_check, diagonal_scaling_check, kernel_mc, prefactor,
                          scaling_check, two_well_ratio, path_functionals)
from .psi import (binomial_partial_sum, check_psi_recursion, delta_regularization_check,
                  expansion_partial_sum, kernel_from_psi, kernel_split, shift_check,
                  split_heat_residual, split_window_kernel)
from .sdw import (a0, heat_kernel_expansion, recurrence_residual, sdw_coefficients,
                  sdw_diagonal)
from .synge import van_vleck, world_function


@dataclass
class CheckReport:
    """Outcome of one check.

    ``residual`` is the largest residual; when a check combines parts with
    different tolerances each part is divided by its own tolerance and the
    report tolerance is 1.  ``passed`` is ``residual <= tolerance``.
    """
    check_id: str
    quantities: Dict[str, object]
    tolerance: float
    residual: float
    passed: bool
    runtime_ms: int = 0

    def as_dict(self, with_runtime: bool = False) -> dict:
        out = {"check_id": self.check_id, "quantities": self.quantities,
               "tolerance": self.tolerance, "residual": self.residual, "passed": self.passed}
        if with_runtime:
            out["runtime_ms"] = self.runtime_ms
        return out


def _report(check_id: str, parts: Sequence[tuple], **quantities) -> CheckReport:
    """Build a report from ``(name, value, tol[, "le"|"ge"])`` parts.

    ``"le"`` parts pass when ``value <= tol``; ``"ge"`` parts when ``value >= tol``.
    """
    q = dict(quantities)
    normalised = []
    for part in parts:
        name, value, tol = part[:3]
        kind = part[3] if len(part) > 3 else "le"
        value = float(value)
        q[name] = value
        q[name + "_tol"] = float(tol)
        if kind == "le":
            normalised.append(value / tol if tol > 0 else (0.0 if value == 0 else math.inf))
        else:
            normalised.append(tol / value if value > 0 else math.inf)
    if len(parts) == 1 and (parts[0][3] if len(parts[0]) > 3 else "le") == "le":
        residual, tol = float(parts[0][1]), float(parts[0][2])
    else:
        residual, tol = max(normalised), 1.0
    return CheckReport(check_id, q, tol, residual, bool(residual <= tol))


# ---------------------------------------------------------------------------
# Mehler oracle for A = -d^2/dx^2 + omega^2 x^2 (potential v = -omega^2 x^2)

def mehler_oracle(omega, x, y, tau):
    """Exact harmonic-oscillator kernel; ``omega = 0`` gives the free Gaussian."""
    x, y, tau = np.asarray(x, float), np.asarray(y, float), np.asarray(tau, float)
    if omega == 0:
        return np.exp(-(x - y) ** 2 / (4 * tau)) / np.sqrt(4 * np.pi * tau)
    s, c = np.sinh(2 * omega * tau), np.cosh(2 * omega * tau)
    return np.sqrt(omega / (2 * np.pi * s)) * np.exp(-omega * ((x * x + y * y) * c - 2 * x * y) / (2 * s))


def mehler_heat_residual(omega=1.0, x=0.3, y=-0.2, tau=0.4, h=1e-3) -> float:
    """``|(d/dtau - d^2/dx^2 + omega^2 x^2) K|`` by fourth-order central differences."""
    K = lambda xx, tt: mehler_oracle(omega, xx, y, tt)
    dt = (-K(x, tau + 2 * h) + 8 * K(x, tau + h) - 8 * K(x, tau - h) + K(x, tau - 2 * h)) / (12 * h)
    dxx = (-K(x + 2 * h, tau) + 16 * K(x + h, tau) - 30 * K(x, tau) + 16 * K(x - h, tau)
           - K(x - 2 * h, tau)) / (12 * h * h)
    return float(abs(dt - dxx + omega ** 2 * x * x * K(x, tau)))


def check_mehler_oracle() -> CheckReport:
    free = math.exp(-0.5) / math.sqrt(2 * math.pi)
    limit = abs(float(mehler_oracle(1e-7, 1.0, 0.0, 0.5)) - free)
    sym = abs(float(mehler_oracle(1.0, 0.3, -0.2, 0.4) - mehler_oracle(1.0, -0.2, 0.3, 0.4)))
    return _report("mehler-oracle-validation",
                   [("heat_residual", mehler_heat_residual(), 1e-6),
                    ("small_omega_limit_error", limit, 1e-6),
                    ("symmetry_error", sym, 1e-15)])


# ---------------------------------------------------------------------------
# flat, constant and Abelian closed forms

FREE_VALUE = math.exp(-0.5) / math.sqrt(2 * math.pi)


def check_free_kernel_mc(seed: int = 0, n_paths: int = 200_000) -> CheckReport:
    t0 = time.perf_counter()
    est = kernel_mc(FlatProblem(1), [1.0], [0.0], 0.5, n_paths=n_paths, seed=seed)
    elapsed = time.perf_counter() - t0
    return _report("free-kernel-mc",
                   [("abs_error", abs(est.mean[0, 0] - FREE_VALUE), 1e-12),
                    ("stderr", float(est.stderr[0, 0]), 1e-15)],
                   mean=est.mean[0, 0].real, elapsed_below_1s=bool(elapsed < 1.0))


def check_constant_potential_sdw(c: float = 1.0) -> CheckReport:
    prob = presets.constant_potential(c)
    tab = sdw_coefficients(prob, [0.4], [0.1], 3)
    diag = sdw_diagonal(prob, [0.4], 3)
    exact = np.array([c ** k / math.factorial(k) for k in range(4)])
    off = np.abs(tab.column() - exact).max()
    on = np.abs(np.array([a[0, 0] for a in diag]) - exact).max()
    return _report("constant-potential-sdw", [("offdiag_error", off, 1e-6), ("diag_error", on, 1e-6)],
                   coefficients=tab.column().real)


def check_constant_potential_mc(seed: int = 0, c: float = 1.0, tau: float = 0.5,
                                n_paths: int = 200_000) -> CheckReport:
    prob = FlatProblem.from_laplace(presets.constant_potential(c))
    est = kernel_mc(prob, [1.0], [0.0], tau, n_paths=n_paths, seed=seed)
    factor = est.mean[0, 0].real / prefactor([1.0], [0.0], tau)
    return _report("constant-potential-mc",
                   [("factor_rel_error", abs(factor / math.exp(c * tau) - 1), 1e-12),
                    ("rel_stderr", float(est.stderr[0, 0]) / est.mean[0, 0].real, 1e-12)],
                   factor=factor)


def check_abelian_closed_form(seed: int = 0, n_paths: int = 20_000) -> CheckReport:
    xi, c, tau = np.array([0.3, -0.2]), 0.5, 0.5
    prob = presets.constant_abelian(tuple(xi), c)
    flat = FlatProblem.from_laplace(prob)
    x, y = np.array([0.4, 0.2]), np.array([-0.1, 0.3])
    closed = prefactor(x, y, tau) * math.exp(-(x - y) @ xi + tau * c)
    est = kernel_mc(flat, x, y, tau, n_paths=n_paths, seed=seed)
    lo, hi = np.inf, -np.inf
    for F, _ in path_functionals(flat, x, y, tau, n_paths, 128, seed):
        lo, hi = min(lo, F.real.min()), max(hi, F.real.max())
    spread = (hi - lo) / abs(hi)
    wilson = abs(a0(prob, x, y)[0, 0] - math.exp(-(x - y) @ xi))
    return _report("abelian-closed-form",
                   [("kernel_rel_error", abs(est.mean[0, 0] / closed - 1), 1e-12),
                    ("path_spread", spread, 1e-12),
                    ("wilson_line_error", wilson, 1e-9)],
                   closed_form=closed)


# ---------------------------------------------------------------------------
# harmonic oscillator: Monte Carlo and truncated expansion against Mehler

def check_mehler_mc(seed: int = 0, tau: float = 0.3, x: float = 0.3, y: float = 0.1,
                    n_paths: int = 200_000, n_steps: int = 128) -> CheckReport:
    prob = FlatProblem.from_laplace(presets.harmonic())
    est = kernel_mc(prob, [x], [y], tau, n_paths=n_paths, n_steps=n_steps, seed=seed)
    exact = float(mehler_oracle(1.0, x, y, tau))
    mean, se = est.mean[0, 0].real, float(est.stderr[0, 0])
    return _report("mehler-mc",
                   [("deviation_in_stderr", abs(mean - exact) / se, 3.0),
                    ("rel_stderr", se / mean, 0.01)],
                   mean=mean, oracle=exact, stderr=se)


def expansion_vs_oracle(x: float = 0.3, y: float = 0.1, taus=(0.02, 0.04, 0.08), K_order: int = 2,
                        tau_check: float = 0.05) -> CheckReport:
    prob = presets.harmonic()
    tab = sdw_coefficients(prob, [x], [y], K_order)
    grid = np.array(list(taus) + [tau_check])
    approx = heat_kernel_expansion(prob, [x], [y], grid, K_order, table=tab)[:, 0, 0].real
    exact = mehler_oracle(1.0, x, y, grid)
    rel = np.abs(approx - exact) / exact
    slope = float(np.polyfit(np.log(grid[:-1]), np.log(rel[:-1]), 1)[0])
    return _report("expansion-vs-oracle",
                   [("rel_error_at_check_tau", rel[-1], 1e-3),
                    ("order_deviation", abs(slope - (K_order + 1)), 0.3)],
                   fitted_order=slope, rel_errors=rel[:-1])


def check_recurrence_residual() -> CheckReport:
    prob = presets.harmonic()
    res = recurrence_residual(prob, [0.3], [0.1], 3)
    return _report("recurrence-residual", [("max_residual", res.max(), prob.tol.recur_tol)])


# ---------------------------------------------------------------------------
# Psi family

def check_psi_identities(N: int = 8) -> CheckReport:
    x, y = np.array([0.3, 0.2]), np.array([0.0, -0.1])
    const = presets.constant_potential(1.0, d=2)
    res = {k: check_psi_recursion(const, k, x, y, N) for k in range(-2, 3)}
    zero = check_psi_recursion(presets.flat(2), 0, x, y, N)
    return _report("psi-recursion",
                   [("max_residual_constant", max(res.values()), 1e-4),
                    ("zero_mode_residual", zero, 1e-6)],
                   residuals={str(k): v for k, v in res.items()})


def check_rearrangement() -> CheckReport:
    x, y = np.array([0.3, 0.2]), np.array([0.0, -0.1])
    const = presets.constant_potential(1.0, d=2)
    tau = 0.3
    a = kernel_from_psi(const, x, y, tau, k_min=-4, k_max=4, N=4)
    b = expansion_partial_sum(const, x, y, tau, k_min=-4, N=4)
    km, kp = kernel_split(const, x, y, tau, 6)
    split = np.abs(km + kp - split_window_kernel(const, x, y, tau, 6)).max()
    heat = split_heat_residual(const, x, y, tau, 6)
    return _report("psi-rearrangement",
                   [("rearrangement_error", np.abs(a - b).max(), 1e-12),
                    ("split_recombination_error", split, 1e-12),
                    ("heat_residual_minus", heat[0], 1e-4),
                    ("heat_residual_plus", heat[1], 1e-4)])


def binomial_ratio(k: float = 1.0, s: float = 0.2, tau: float = 0.4, n_max: int = 30) -> float:
    """Fitted geometric ratio of the binomial partial-sum residuals."""
    exact = (tau + s) ** (-k)
    ns = np.arange(2, n_max + 1)
    r = np.array([abs(binomial_partial_sum(k, s, tau, int(n)) - exact) for n in ns])
    return float(np.exp(np.polyfit(ns, np.log(r), 1)[0]))


def check_shift_lemma() -> CheckReport:
    free = shift_check(presets.flat(1), [1.0], [0.0], 0.4, 0.05, 12)
    const = shift_check(presets.constant_potential(1.0), [1.0], [0.0], 0.4, 0.05, 12)
    ratio = binomial_ratio(1.0, 0.2, 0.4)
    return _report("shift-lemma",
                   [("free_residual", free, 1e-6),
                    ("constant_residual", const, 1e-6),
                    ("binomial_ratio_rel_dev", abs(ratio / 0.5 - 1), 0.1)],
                   binomial_ratio=ratio)


def check_delta_regularization() -> CheckReport:
    bump = lambda z: np.exp(-np.sum((np.asarray(z) - 0.1) ** 2, axis=-1) / (2 * 0.5 ** 2))
    prob = presets.flat(1)
    e1 = delta_regularization_check(prob, [0.0], 1e-3, bump)
    e2 = delta_regularization_check(prob, [0.0], 5e-4, bump)
    mass = delta_regularization_check(prob, [0.0], 1e-3, lambda z: np.ones(len(z)))
    return _report("delta-regularization",
                   [("error_eps_1e-3", e1, 1e-2),
                    ("halving_ratio_dev", abs(e1 / e2 - 2.0), 0.4),
                    ("mass_error", mass, 1e-8)])


# ---------------------------------------------------------------------------
# scaling lemma, bounds, two wells

def check_scaling(seed: int = 0, n_paths: int = 200_000) -> CheckReport:
    flat = FlatProblem.from_laplace(presets.harmonic())
    parts, q = [], {}
    for i, tau in enumerate((0.25, 1.0)):
        r = scaling_check(flat, [0.3], [0.3], [0.3], tau, n_paths=n_paths, seed=seed + i)
        bound = 3 * float(r.diff_stderr[0, 0]) + 1e-12 * abs(r.lhs.mean[0, 0])
        parts.append((f"coupled_diff_tau_{tau}", abs(r.diff[0, 0]), bound))
        q[f"lhs_tau_{tau}"] = r.lhs.mean[0, 0].real
    har = presets.harmonic()
    for tau in (0.25, 1.0):
        rep = diagonal_scaling_check(har, [0.0], tau, 2)
        parts.append((f"diag_ratio_residual_tau_{tau}", max(rep.residuals), rep.tolerance))
    return _report("scaling-lemma", parts, **q)


def check_potential_bound(seed: int = 0, n_paths: int = 100_000) -> CheckReport:
    flat = FlatProblem.from_laplace(presets.harmonic(), potential_sup=0.0)
    rep = bound_check(flat, [0.3], [0.1], 1.0, n_paths=n_paths, seed=seed)
    free = prefactor([0.3], [0.1], 1.0)
    return _report("potential-bound",
                   [("paths_outside_bound", rep.n_paths - rep.paths_within, 0.0),
                    ("mean_minus_free", max(0.0, rep.estimate.mean[0, 0].real - free
                                            - 3 * float(rep.estimate.stderr[0, 0])), 0.0)],
                   max_functional=rep.max_functional, mean=rep.estimate.mean[0, 0].real,
                   free_kernel=free)


def check_two_wells(seed: int = 0) -> CheckReport:
    flat = FlatProblem.from_laplace(presets.two_well(1.0, -1.0))
    r = two_well_ratio(flat, ([-8.0], [8.0]), 1.0, 1.0, -1.0, seed=seed)
    return _report("two-well-ratio",
                   [("deviation", abs(r.ratio - r.expected), 3 * r.stderr + 1e-10 * r.expected)],
                   ratio=r.ratio, expected=r.expected)


# ---------------------------------------------------------------------------
# symmetry and chart checks

def hermitian_symmetry_check(problem=None, K: int = 2, sample_pairs=None, seed: int = 0,
                             n_pairs: int = 20, tau: float = 0.1) -> CheckReport:
    problem = presets.non_abelian() if problem is None else problem
    if sample_pairs is None:
        rng = np.random.default_rng(seed)
        sample_pairs = [(rng.uniform(-0.5, 0.5, 2), rng.uniform(-0.5, 0.5, 2)) for _ in range(n_pairs)]
    worst = np.zeros(K + 1)
    kern = 0.0
    for x, y in sample_pairs:
        f = sdw_coefficients(problem, x, y, K)
        b = sdw_coefficients(problem, y, x, K)
        for k in range(K + 1):
            worst[k] = max(worst[k], np.linalg.norm(f.coeffs[k].conj().T - b.coeffs[k]))
        kf = heat_kernel_expansion(problem, x, y, tau, K, table=f)
        kb = heat_kernel_expansion(problem, y, x, tau, K, table=b)
        kern = max(kern, np.linalg.norm(kf.conj().T - kb) / np.linalg.norm(kf))
    tol = problem.tol.sym_tol
    parts = [(f"a{k}_asymmetry", worst[k], tol) for k in range(K + 1)]
    parts.append(("kernel_rel_asymmetry", kern, tol))
    return _report("hermitian-symmetry", parts, n_pairs=len(sample_pairs))


def chart_pairs(n_pairs: int = 10, seed: int = 0):
    """Polar endpoint pairs in the annulus sector r in [1, 2.5], theta in [0, pi/2]."""
    rng = np.random.default_rng(seed)
    first = (presets.cartesian_to_polar(np.array([1.0, 1.0])), presets.cartesian_to_polar(np.array([2.0, 0.0])))
    pairs = [first]
    while len(pairs) < n_pairs:
        r = rng.uniform(1.0, 2.5, 2)
        th = rng.uniform(0.0, np.pi / 2, 2)
        pairs.append((np.array([r[0], th[0]]), np.array([r[1], th[1]])))
    return pairs


def chart_consistency(pairs=None, n_pairs: int = 10, seed: int = 0) -> CheckReport:
    """sigma, Delta, a_0, a_1 in Cartesian and polar charts for the same physical points."""
    cart, polar = presets.linear_potential(1.0), presets.polar_linear_potential(1.0)
    pairs = chart_pairs(n_pairs, seed) if pairs is None else pairs
    err = {"sigma": 0.0, "vanvleck": 0.0, "a0": 0.0, "a1": 0.0}
    for xp, yp in pairs:
        xc, yc = presets.polar_to_cartesian(xp), presets.polar_to_cartesian(yp)
        err["sigma"] = max(err["sigma"], abs(world_function(cart, xc, yc).sigma
                                             - world_function(polar, xp, yp).sigma))
        err["vanvleck"] = max(err["vanvleck"], abs(van_vleck(cart, xc, yc) - van_vleck(polar, xp, yp)))
        tc, tp = sdw_coefficients(cart, xc, yc, 1), sdw_coefficients(polar, xp, yp, 1)
        err["a0"] = max(err["a0"], float(np.abs(tc.coeffs[0] - tp.coeffs[0]).max()))
        err["a1"] = max(err["a1"], float(np.abs(tc.coeffs[1] - tp.coeffs[1]).max()))
    return _report("chart-consistency",
                   [("sigma_error", err["sigma"], 1e-6), ("vanvleck_error", err["vanvleck"], 1e-6),
                    ("a0_error", err["a0"], 1e-6), ("a1_error", err["a1"], 1e-4)],
                   n_pairs=len(pairs))


def check_synge_examples() -> CheckReport:
    polar = presets.polar_flat()
    y, x = np.array([1.0, 0.0]), np.array([1.0, np.pi / 2])
    s = world_function(polar, x, y).sigma
    dv = van_vleck(polar, x, y)
    sphere = presets.sphere_patch()
    base, u = np.array([1.2, 0.1]), np.array([0.6, 0.8])
    dist, dvals = [], []
    for sep in (0.02, 0.04, 0.08):
        yy = base + sep * u
        dist.append(2 * world_function(sphere, base, yy).sigma)
        dvals.append(van_vleck(sphere, base, yy) - 1.0)
    coef = float(np.polyfit(np.array(dist), np.array(dvals), 1)[0])
    return _report("synge-examples",
                   [("polar_sigma_error", abs(s - 1.0), 1e-7),
                    ("polar_vanvleck_error", abs(dv - 1.0), 1e-6),
                    ("sphere_quadratic_coef_error", abs(coef - 1.0 / 6.0), 1e-3)],
                   sphere_quadratic_coef=coef)


# ---------------------------------------------------------------------------
# non-semigroup defect on an interval

def _free(x, y, tau):
    return math.exp(-(x - y) ** 2 / (4 * tau)) / math.sqrt(4 * math.pi * tau)


def semigroup_defect(tau1: float, tau2: float, x: float, y: float, interval=(0.0, 1.0)) -> float:
    """``|K(x, y; tau1 + tau2) - int_U K(x, z; tau1) K(z, y; tau2) dz|`` for the free kernel."""
    f = lambda z: _free(x, z, tau1) * _free(z, y, tau2)
    lo, hi = interval
    opts = dict(epsabs=1e-10, epsrel=1e-12, limit=200)
    if math.isinf(lo) or math.isinf(hi):
        mid = 0.5 * (x + y)
        val = quad(f, lo, mid, **opts)[0] + quad(f, mid, hi, **opts)[0]
    else:
        val = quad(f, lo, hi, points=sorted({x, y}), **opts)[0]
    return abs(_free(x, y, tau1 + tau2) - val)


def check_semigroup_defect() -> CheckReport:
    big = semigroup_defect(0.5, 0.5, 0.5, 0.5)
    # oracle: product Gaussian of variance tau1 tau2 / (tau1 + tau2) * 2 centred at 0.5
    mass = math.erf(0.5 / math.sqrt(4 * 0.25))
    oracle = _free(0.5, 0.5, 1.0) * (1 - mass)
    small = semigroup_defect(1e-4, 1e-4, 0.5, 0.5)
    whole = semigroup_defect(0.5, 0.5, 0.5, 0.5, (-math.inf, math.inf))
    return _report("semigroup-defect",
                   [("defect_large_tau", big, 1e-3, "ge"),
                    ("oracle_mismatch", abs(big - oracle), 1e-9),
                    ("defect_small_tau", small, 1e-8),
                    ("defect_whole_line", whole, 1e-10)],
                   oracle=oracle)


# ---------------------------------------------------------------------------
# suites

def _with_seed(fn, offset):
    return lambda seed: fn(seed=seed + offset)


def _plain(fn):
    return lambda seed: fn()


FAST: List[tuple] = [
    ("mehler-oracle-validation", _plain(check_mehler_oracle)),
    ("free-kernel-mc", _with_seed(check_free_kernel_mc, 0)),
    ("constant-potential-sdw", _plain(check_constant_potential_sdw)),
    ("constant-potential-mc", _with_seed(check_constant_potential_mc, 1)),
    ("abelian-closed-form", _with_seed(check_abelian_closed_form, 2)),
    ("expansion-vs-oracle", _plain(expansion_vs_oracle)),
    ("shift-lemma", _plain(check_shift_lemma)),
    ("semigroup-defect", _plain(check_semigroup_defect)),
]

FULL: List[tuple] = FAST + [
    ("mehler-mc", _with_seed(check_mehler_mc, 3)),
    ("recurrence-residual", _plain(check_recurrence_residual)),
    ("synge-examples", _plain(check_synge_examples)),
    ("psi-recursion", _plain(check_psi_identities)),
    ("psi-rearrangement", _plain(check_rearrangement)),
    ("delta-regularization", _plain(check_delta_regularization)),
    ("scaling-lemma", _with_seed(check_scaling, 4)),
    ("potential-bound", _with_seed(check_potential_bound, 6)),
    ("two-well-ratio", _with_seed(check_two_wells, 7)),
    ("hermitian-symmetry", _with_seed(hermitian_symmetry_check, 9)),
    ("chart-consistency", _with_seed(chart_consistency, 10)),
]

SUITES = {"fast": FAST, "all": FULL}


def _run_one(check_id: str, fn: Callable, seed: int) -> CheckReport:
    t0 = time.perf_counter()
    try:
        rep = fn(seed)
    except HeatLabError as exc:
        rep = CheckReport(check_id, {"error": f"{type(exc).__name__}: {exc}"}, 0.0, math.inf, False)
    rep.runtime_ms = int(round(1000 * (time.perf_counter() - t0)))
    return rep


def run_suite(name: str = "fast", seed: int = 0, threads: Optional[int] = None) -> List[CheckReport]:
    """Run a battery; reports come back in the fixed suite order whatever the scheduling."""
    jobs = SUITES[name]
    if threads is None:
        try:
            threads = max(1, int(os.environ.get("HEATLAB_THREADS", "1")))
        except ValueError:
            threads = 1
    # the oracle validates itself before anything compares against it
    first = _run_one(*jobs[0], seed)
    rest = jobs[1:]
    if threads <= 1:
        others = [_run_one(cid, fn, seed) for cid, fn in rest]
    else:
        with ThreadPoolExecutor(threads) as pool:
            others = list(pool.map(lambda j: _run_one(j[0], j[1], seed), rest))
    return [first] + others


def report_document(reports: Sequence[CheckReport], suite: str, seed: int) -> dict:
    """Report contents that depend only on (suite, seed): runtimes are left out."""
    return {"suite": suite, "seed": seed,
            "all_passed": all(r.passed for r in reports),
            "checks": [r.as_dict() for r in reports]}
