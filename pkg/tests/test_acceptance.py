"""Acceptance gate: one test per criterion, one PASS/FAIL line each."""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from dualflat import boltzmann as bm
from dualflat import exp_family as ef
from dualflat import monge_ampere as ma
from dualflat import webs
from dualflat.boltzmann import WeightMatrix

CONFIGS = [(1, "full"), (2, "pairwise"), (2, "full"), (3, "pairwise"), (3, "full"),
           (4, "pairwise"), (4, "full")]
# absolute rounding slack for the nonincreasing-KL check
KL_SLACK = 1e-15


def finish(rec, start, limit):
    elapsed = time.perf_counter() - start
    rec.check("runtime", elapsed < limit, f"{elapsed:.2f} s, limit {limit} s")
    print(rec.line())
    assert rec.passed, rec.line()


def random_symmetric(rng, n, scale=1.0):
    a = np.triu(rng.uniform(-scale, scale, (n, n)), 1)
    return a + a.T


def test_legendre_duality(criterion):
    rec = criterion(1, "Legendre duality round trip and identity")
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_rt = worst_id = 0.0
    for n, kind in CONFIGS:
        sp = ef.StateSpace.from_kind(n, kind)
        for _ in range(100):
            th = rng.uniform(-2, 2, sp.dim)
            eta = ef.to_eta(sp, th)
            back = ef.to_theta(sp, eta).coords
            worst_rt = max(worst_rt, float(np.max(np.abs(back - th))))
            ident = ef.log_partition(sp, th) + ef.dual_potential(sp, eta) - th @ eta.coords
            worst_id = max(worst_id, abs(ident))
    rec.check("round trip < 1e-8", worst_rt < 1e-8, f"{worst_rt:.2e}")
    rec.check("identity < 1e-9", worst_id < 1e-9, f"{worst_id:.2e}")
    finish(rec, t0, 30)


def test_fisher_hessian_agreement(criterion):
    rec = criterion(2, "Fisher metric equals the Hessian of psi")
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    h = 1e-4
    worst, min_eig = 0.0, np.inf
    for k in range(50):
        n, kind = CONFIGS[k % len(CONFIGS)]
        sp = ef.StateSpace.from_kind(n, kind)
        th = rng.uniform(-2, 2, sp.dim)
        g = ef.fisher_metric(sp, th)
        I = np.eye(sp.dim) * h
        psi = lambda t: ef.log_partition(sp, t)  # noqa: E731
        fd = np.array([[(psi(th + I[a] + I[b]) - psi(th + I[a] - I[b])
                         - psi(th - I[a] + I[b]) + psi(th - I[a] - I[b])) / (4 * h * h)
                        for b in range(sp.dim)] for a in range(sp.dim)])
        worst = max(worst, float(np.max(np.abs(fd - g.matrix))))
        min_eig = min(min_eig, float(g.eigenvalues().min()))
    rec.check("metric vs finite differences < 1e-5", worst < 1e-5, f"{worst:.2e}")
    rec.check("minimum eigenvalue > 0", min_eig > 0, f"{min_eig:.2e}")
    finish(rec, t0, 30)


def test_monge_ampere_pairing(criterion):
    rec = criterion(3, "Monge-Ampere pairing of the dual Hessians")
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    worst_i = worst_p = 0.0
    for n, kind in CONFIGS:
        sp = ef.StateSpace.from_kind(n, kind)
        for _ in range(50):
            r = ma.ma_report(sp, rng.uniform(-1, 1, sp.dim))
            worst_i = max(worst_i, r.identity_residual)
            worst_p = max(worst_p, r.product_residual)
    rec.check("identity residual < 1e-6", worst_i < 1e-6, f"{worst_i:.2e}")
    rec.check("product residual < 1e-6", worst_p < 1e-6, f"{worst_p:.2e}")
    finish(rec, t0, 60)


def test_learning_rule_identity(criterion):
    rec = criterion(4, "AHS update is the scaled negative KL gradient")
    t0 = time.perf_counter()
    rng = np.random.default_rng(104)
    exact, worst_fd = True, 0.0
    h = 1e-5
    for k in range(20):
        n = 2 + k % 4
        W = WeightMatrix(random_symmetric(rng, n, 1.5))
        q = rng.dirichlet(np.ones(1 << n))
        q = q / math.fsum(q)
        c = rng.uniform(0.1, 2.0)
        exact &= np.array_equal(bm.ahs_update(W, q, c), -c * bm.kl_gradient(W, q))
        g = bm.kl_gradient(W, q)
        for i in range(n):
            for j in range(i + 1, n):
                e = np.zeros((n, n))
                e[i, j] = e[j, i] = h
                fd = (bm.kullback(q, bm.stationary_distribution(WeightMatrix(W.matrix + e)))
                      - bm.kullback(q, bm.stationary_distribution(WeightMatrix(W.matrix - e)))) / (2 * h)
                worst_fd = max(worst_fd, abs(fd - g[i, j]))
    rec.check("update == -c * gradient exactly", exact)
    rec.check("gradient vs finite differences < 1e-6", worst_fd < 1e-6, f"{worst_fd:.2e}")
    finish(rec, t0, 20)


def test_training_convergence(criterion):
    rec = criterion(5, "AHS training converges on realizable targets")
    t0 = time.perf_counter()
    rng = np.random.default_rng(105)
    for n in (2, 3, 4):
        for _ in range(3):
            q = bm.stationary_distribution(WeightMatrix(random_symmetric(rng, n)))
            tr = bm.train(WeightMatrix.zeros(n), q, 0.5)
            rise = float(np.max(np.diff(tr.kl[1:]), initial=0.0))
            rec.check(f"N={n} gap < 1e-8", tr.converged and tr.moment_gap[-1] < 1e-8,
                      f"{tr.moment_gap[-1]:.2e}")
            rec.check(f"N={n} KL < 1e-10", tr.kl[-1] < 1e-10, f"{tr.kl[-1]:.2e}")
            rec.check(f"N={n} KL nonincreasing", rise <= KL_SLACK, f"max rise {rise:.2e}")
    q = bm.stationary_distribution(WeightMatrix([[0, math.log(2)], [math.log(2), 0]]))
    w = bm.train(WeightMatrix.zeros(2), q, 0.5).final.matrix[0, 1]
    rec.check("w12 = 0.693147 +- 1e-6", abs(w - 0.693147) < 1e-6, f"{w:.9f}")
    finish(rec, t0, 60)


def test_commutator(criterion):
    rec = criterion(6, "Zero-diagonal couplings are commutators")
    t0 = time.perf_counter()
    rng = np.random.default_rng(106)
    worst = 0.0
    for k in range(50):
        W = random_symmetric(rng, 2 + k % 7, 5.0)
        worst = max(worst, float(np.max(np.abs(bm.commutator_decomposition(W).commutator() - W))))
    rec.check("reconstruction < 1e-12", worst < 1e-12, f"{worst:.2e}")
    finish(rec, t0, 5)


def test_ceva(criterion):
    rec = criterion(7, "Ceva relation and Cevian frames")
    t0 = time.perf_counter()
    rng = np.random.default_rng(107)
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    side = (tri[2] - tri[1]) / np.linalg.norm(tri[2] - tri[1])
    worst, least_dev = 0.0, np.inf
    for lam in rng.dirichlet(np.ones(3), 100):
        p = lam @ tri
        feet = webs.cevian_feet(tri, point=p)
        worst = max(worst, abs(webs.ceva_product(tri, feet) + 1))
        moved = [feet[0] + 0.05 * side, feet[1], feet[2]]
        least_dev = min(least_dev, abs(webs.ceva_product(tri, moved) + 1))
    rec.check("product = -1 within 1e-10", worst < 1e-10, f"{worst:.2e}")
    rec.check("perturbed feet deviate > 1e-3", least_dev > 1e-3, f"{least_dev:.2e}")
    worst_sum = 0.0
    for d in range(2, 7):
        for p in rng.dirichlet(np.ones(d + 1), 200):
            worst_sum = max(worst_sum, float(np.max(np.abs(webs.cevian_frame(p).x.sum(axis=0)))))
    rec.check("sum of x_k = 0 within 1e-14", worst_sum < 1e-14, f"{worst_sum:.2e}")
    finish(rec, t0, 10)


def test_hexagonality(criterion):
    rec = criterion(8, "Hexagonality by curvature and closure")
    t0 = time.perf_counter()
    box = ((0.0, 2.0), (0.0, 2.0))
    for w in ("x+y", "x*y"):
        rep = webs.hexagonality_certificate(webs.PlanarThreeWeb("x", "y", w, domain=box), 3, 0.1)
        rec.check(f"({w}) hexagonal", rep.verdict == "hexagonal", rep.verdict)
        rec.check(f"({w}) defect < 1e-8", rep.max_defect < 1e-8, f"{rep.max_defect:.2e}")
        rec.check(f"({w}) |K| < 1e-7", rep.max_abs_curvature < 1e-7, f"{rep.max_abs_curvature:.2e}")
    curved = webs.PlanarThreeWeb("x", "y", "x*exp(y)+y", domain=((0.0, 2.0), (-1.0, 2.0)))
    d = webs.hexagon_closure(curved, (1.0, 0.5), 0.1)
    K = webs.web_curvature(curved, (1.0, 0.0))
    rep = webs.hexagonality_certificate(curved, 3, 0.1)
    rec.check("curved web not hexagonal", rep.verdict == "not hexagonal", rep.verdict)
    rec.check("curved defect > 1e-4", d > 1e-4, f"{d:.2e}")
    rec.check("curved |K| > 1e-2", abs(K) > 1e-2, f"{K:.3e}")
    prod = webs.PlanarThreeWeb("x", "y", "x*y", domain=box)
    for start in [(1.0, 1.0), (0.8, 1.2), (1.3, 0.9)]:
        big = webs.hexagon_closure(prod, start, 0.1)
        half = webs.hexagon_closure(prod, start, 0.05)
        rec.check(f"x*y defect drops 4x at {start}", half <= big / 4 + 1e-15,
                  f"{big:.2e} -> {half:.2e}")
    finish(rec, t0, 20)


def test_wdvv(criterion):
    rec = criterion(9, "WDVV associativity residual")
    t0 = time.perf_counter()
    rng = np.random.default_rng(109)
    anti = [[0, 0, 1], [0, 1, 0], [1, 0, 0]]
    small = [webs.FrobeniusPotential(phi, [[1.5]]) for phi in ("exp(x1)", "x1^7 - sin(x1)")]
    small += [webs.FrobeniusPotential(f"x1^2*x2/2 + {f}", g)
              for f in ("x2^4", "exp(x2)", "x2^3*sin(x2)")
              for g in ([[0, 1], [1, 0]], [[0, 2], [2, 0]])]
    worst = max(webs.wdvv_residual(p, rng.uniform(-1, 1, p.n)) for p in small for _ in range(5))
    rec.check("n <= 2 residual < 1e-12", worst < 1e-12, f"{worst:.2e}")
    good = webs.FrobeniusPotential("x1^2*x3/2 + x1*x2^2/2", anti)
    bad = webs.FrobeniusPotential("x1^2*x3/2 + x1*x2^2/2 + x3^3/6", anti)
    pts = rng.uniform(-2, 2, (20, 3))
    g_res = max(webs.wdvv_residual(good, p) for p in pts)
    b_dev = max(abs(webs.wdvv_residual(bad, p) - 1) for p in pts)
    rec.check("associative potential passes", g_res < webs.WDVV_TOL, f"{g_res:.2e}")
    rec.check("perturbed residual = 1 +- 1e-9", b_dev < 1e-9, f"{b_dev:.2e}")
    finish(rec, t0, 10)


def test_transport_1d(criterion):
    rec = criterion(10, "One-dimensional Brenier transport")
    t0 = time.perf_counter()
    lin = ma.brenier_1d("1", "0.5", (0, 1), (0, 2), grid_size=1024)
    rec.check("linear case exact to 1e-10", lin.max_identity_error < 1e-10,
              f"{lin.max_identity_error:.2e}")
    errs = {n: ma.brenier_1d("1", "2*y", (0, 1), (0, 1), grid_size=n).identity_errors
            for n in (512, 1024, 2048)}
    e1024 = max(errs[1024].values())
    rec.check("triangular identity < 1e-4 at 1024", e1024 < 1e-4, f"{e1024:.2e}")
    for f in ("1", "y", "y^2"):
        a, b, c = errs[512][f], errs[1024][f], errs[2048][f]
        if max(a, b, c) < 1e-13:
            rec.check(f"f={f} second order", True, "exact to rounding")
            continue
        ratios = (a / b, b / c)
        rec.check(f"f={f} second order", min(ratios) > 3.5,
                  "ratios " + ", ".join(f"{r:.2f}" for r in ratios))
    rng = np.random.default_rng(110)
    exact = True
    for _ in range(20):
        masses = tuple(Fraction(int(k), 97) for k in rng.integers(0, 100, 30))
        mu = ma.DiscreteMeasure(tuple(range(30)), masses)
        m = int(rng.integers(1, 6))
        exact &= ma.pushforward(mu, lambda x: x % m).total == mu.total
    rec.check("pushforward preserves mass exactly", exact)
    finish(rec, t0, 10)
