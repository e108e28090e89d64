"""Decentralized fused-lasso benchmark: instance generation, the mapping to
operator bundles, an independent reference solver, and the parameter-grid
experiment harness."""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import json

import numpy as np

from .linalg import LinearMap, spectral_norm
from .operators import (ComposedBlock, ProblemInstance, l1_resolvent,
                        least_squares_gradient, prox_l1, zero_resolvent)
from .scheme import compute_UW, compute_tau, dumps_json, step_bounds
from .solver import SolveOptions, solve
from .graphs import scheme_complete, scheme_sequential, scheme_star

__all__ = [
    "DifferenceMap",
    "difference_matrix",
    "difference_norm",
    "FusedLassoInstance",
    "ExperimentConfig",
    "gen_instance",
    "desk_instance",
    "to_problem",
    "objective",
    "reference_solve",
    "build_family_scheme",
    "run_grid",
    "save_instance",
    "load_instance",
]

FAMILY_GENERATORS = {
    "sequential": scheme_sequential,
    "star": scheme_star,
    "complete": scheme_complete,
}


class DifferenceMap(LinearMap):
    """First-difference operator (Lx)_i = x_{i+1} - x_i with fast apply."""

    def __init__(self, d):
        if d < 2:
            raise ValueError("need d >= 2")
        mat = np.zeros((d - 1, d))
        idx = np.arange(d - 1)
        mat[idx, idx] = -1.0
        mat[idx, idx + 1] = 1.0
        super().__init__(mat)
        self._norm = difference_norm(d)

    def apply(self, x):
        return np.diff(x)

    __call__ = apply

    def adjoint(self, y):
        out = np.zeros(y.size + 1)
        out[:-1] -= y
        out[1:] += y
        return out


def difference_matrix(d):
    return DifferenceMap(d)


def difference_norm(d):
    """Spectral norm of the first-difference operator,
    sqrt(2 - 2 cos((d-1) pi / d))."""
    if d < 2:
        raise ValueError("need d >= 2")
    return float(np.sqrt(2.0 - 2.0 * np.cos((d - 1) * np.pi / d)))


@dataclass
class FusedLassoInstance:
    n_agents: int
    A_blocks: List[np.ndarray]
    b_blocks: List[np.ndarray]
    mu: List[float]
    nu: List[float]
    d: int
    seed: int
    x_true: np.ndarray
    noise_var: float = 1e-3

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("need d >= 2")
        if len(self.A_blocks) != self.n_agents:
            raise ValueError("one A block per agent required")
        for A, b in zip(self.A_blocks, self.b_blocks):
            if A.shape[0] != b.size or A.shape[1] != self.d or A.shape[0] < 1:
                raise ValueError("inconsistent block shapes")

    @property
    def m(self):
        return sum(A.shape[0] for A in self.A_blocks)

    @property
    def partition(self):
        return [A.shape[0] for A in self.A_blocks]


@dataclass
class ExperimentConfig:
    gamma_hats: List[float] = field(default_factory=lambda: [0.5])
    eta_hats: List[float] = field(default_factory=lambda: [0.1])
    lambda_hats: List[float] = field(default_factory=lambda: [0.9])
    scheme_families: List[str] = field(
        default_factory=lambda: ["sequential", "star", "complete"])
    max_iters: int = 20_000
    tol: float = 1e-10
    record_every: int = 10

    def __post_init__(self):
        for vals in (self.gamma_hats, self.eta_hats, self.lambda_hats):
            if any(not 0.0 < v < 1.0 for v in vals):
                raise ValueError("scaling factors must lie in (0, 1)")
        for fam in self.scheme_families:
            if fam not in FAMILY_GENERATORS:
                raise ValueError(f"unknown family {fam!r}")


def gen_instance(seed, n=5, m=100, d=1000, k_nonzero=10, noise_var=1e-3,
                 mu=15.0, nu=5.0):
    """Random instance: Gaussian data matrix, sparse Gaussian ground truth,
    noisy observations, and a random row partition with every agent getting
    at least one row.  The partition uses its own seed stream so changing
    only the data draw does not reshuffle the split."""
    if k_nonzero > d or n > m or n < 1:
        raise ValueError("infeasible sizes")
    rng = np.random.default_rng([int(seed), 0])
    A = rng.standard_normal((m, d))
    x_true = np.zeros(d)
    support = rng.choice(d, size=k_nonzero, replace=False)
    x_true[support] = rng.standard_normal(k_nonzero)
    b = A @ x_true + np.sqrt(noise_var) * rng.standard_normal(m)

    rng_part = np.random.default_rng([int(seed), 1])
    counts = 1 + rng_part.multinomial(m - n, [1.0 / n] * n)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    A_blocks = [A[offsets[i]:offsets[i + 1]] for i in range(n)]
    b_blocks = [b[offsets[i]:offsets[i + 1]] for i in range(n)]
    return FusedLassoInstance(
        n_agents=n, A_blocks=A_blocks, b_blocks=b_blocks,
        mu=[float(mu)] * n, nu=[float(nu)] * n, d=d, seed=int(seed),
        x_true=x_true, noise_var=float(noise_var),
    )


def desk_instance(seed=0):
    """Small benchmark instance for quick runs.  The regularization weights
    are scaled down with the row count: the full-scale defaults (mu = 15)
    over-regularize at m = 50 and collapse the solution to zero."""
    return gen_instance(seed, n=5, m=50, d=200, mu=5.0, nu=2.0)


def to_problem(instance):
    """Operator bundle for the unscaled sum: one artificial zero resolvent
    (so the n-agent problem fits the (n+1)-node schemes), n l1 resolvents,
    n composed difference blocks, and n least-squares gradients."""
    d = instance.d
    L = difference_matrix(d)
    A_list = [zero_resolvent(d)] + [
        l1_resolvent(mu_i, d, label=f"l1_agent{i}")
        for i, mu_i in enumerate(instance.mu)
    ]
    BL_list = [
        ComposedBlock(B=l1_resolvent(nu_k, d - 1), L=L)
        for nu_k in instance.nu
    ]
    C_list = [
        least_squares_gradient(A, b)
        for A, b in zip(instance.A_blocks, instance.b_blocks)
    ]
    return ProblemInstance(d=d, A_list=A_list, BL_list=BL_list, C_list=C_list)


def objective(instance, x):
    """The (1/n)-scaled objective value at x."""
    x = np.asarray(x, dtype=float)
    acc = 0.0
    dx = np.diff(x)
    l1 = float(np.sum(np.abs(x)))
    tv = float(np.sum(np.abs(dx)))
    for A, b, mu_i, nu_i in zip(instance.A_blocks, instance.b_blocks,
                                instance.mu, instance.nu):
        r = A @ x - b
        acc += 0.5 * float(r @ r) + mu_i * l1 + nu_i * tv
    return acc / instance.n_agents


def reference_solve(instance, tol=1e-10, max_iters=500_000):
    """Independent solution of the aggregate problem by a classical
    two-block primal-dual iteration (smooth quadratic handled by gradient,
    the l1 term by its prox, the total-variation term through a clipped
    dual variable).  Stops on the max of the two stationarity residuals."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = np.vstack(instance.A_blocks)
    b = np.concatenate(instance.b_blocks)
    mu_bar = float(sum(instance.mu))
    nu_bar = float(sum(instance.nu))
    d = instance.d
    L = difference_matrix(d)
    Lf = max(float(np.linalg.norm(A.T @ A, 2)), 1e-12)
    Lnorm2 = difference_norm(d) ** 2
    rho = Lf / (2.0 * Lnorm2)
    sigma = 0.99 / Lf

    AtA = A.T @ A
    Atb = A.T @ b
    x = np.zeros(d)
    u = np.zeros(d - 1)
    for it in range(max_iters):
        grad = AtA @ x - Atb
        x_new = prox_l1(x - sigma * (grad + L.adjoint(u)), sigma * mu_bar)
        u = np.clip(u + rho * L(2.0 * x_new - x), -nu_bar, nu_bar)
        x = x_new
        if it % 10 == 0:
            grad = AtA @ x - Atb
            v = -grad - L.adjoint(u)
            r1 = np.max(np.abs(x - prox_l1(x + v, mu_bar)), initial=0.0)
            lx = L(x)
            r2 = np.max(np.abs(lx - prox_l1(lx + u, nu_bar)), initial=0.0)
            if max(r1, r2) <= tol:
                return x, objective(instance, x)
    raise RuntimeError(
        f"reference solver did not reach tol {tol} in {max_iters} iterations"
    )


def build_family_scheme(family, instance, gamma_hat, eta_hat):
    """Scheme for one grid cell: compute tau from the structural matrices,
    set gamma = gamma_hat * (2/tau), then eta = eta_hat / (gamma * max
    ||L_k||^2), and rebuild the scheme with those values."""
    gen = FAMILY_GENERATORS[family]
    n_scheme = instance.n_agents + 1
    base = gen(n_scheme, gamma=1.0, eta=1.0)
    ell = [spectral_norm(Ai) ** 2 for Ai in instance.A_blocks]
    uw = compute_UW(base)
    tau = compute_tau(uw, ell, "cocoercive")
    gamma = gamma_hat * 2.0 / tau
    lnorm2 = difference_norm(instance.d) ** 2
    eta = eta_hat / (gamma * lnorm2)
    scheme = gen(n_scheme, gamma=gamma, eta=eta)
    bounds = step_bounds(tau, [difference_norm(instance.d)], "cocoercive")
    lam_max = bounds.lambda_max(gamma)
    return scheme, tau, lam_max


def _curve_name(family, gamma_hat, eta_hat, lambda_hat):
    return f"{family}_{gamma_hat:g}_{eta_hat:g}_{lambda_hat:g}.csv"


def _run_cell(instance, problem, cell, config, out_dir):
    family, gamma_hat, eta_hat, lambda_hat = cell
    row = {
        "family": family, "gamma_hat": gamma_hat,
        "eta_hat": eta_hat, "lambda_hat": lambda_hat,
    }
    t0 = time.perf_counter()
    try:
        scheme, tau, lam_max = build_family_scheme(
            family, instance, gamma_hat, eta_hat)
        opts = SolveOptions(
            max_iters=config.max_iters, residual_tol=config.tol,
            lambda_schedule=lambda_hat * lam_max,
            record_every=config.record_every,
        )
        report = solve(scheme, problem, opts=opts,
                       objective=lambda x: objective(instance, x))
        row.update(
            iters_to_tol=report.iters_run,
            final_residual=report.residual_history[-1][1],
            final_objective=report.objective_history[-1][1],
            wall_ms=1e3 * (time.perf_counter() - t0),
            status="ok" if report.converged else "maxiter",
        )
        if out_dir is not None:
            path = os.path.join(
                out_dir, "curves", _curve_name(*cell))
            obj = dict(report.objective_history)
            with open(path, "w") as fh:
                fh.write("iter,residual,objective\n")
                for t, res in report.residual_history:
                    fh.write("%d,%.17g,%.17g\n" % (t, res, obj[t]))
        row["_report"] = report
    except Exception as exc:   # failures become rows, the grid continues
        row.update(iters_to_tol=-1, final_residual=float("nan"),
                   final_objective=float("nan"),
                   wall_ms=1e3 * (time.perf_counter() - t0),
                   status=f"error: {exc}")
    return row


GRID_COLUMNS = ["family", "gamma_hat", "eta_hat", "lambda_hat",
                "iters_to_tol", "final_residual", "final_objective",
                "wall_ms", "status"]


def run_grid(instance, config, out_dir=None, threads=None):
    """Run every (family, gamma_hat, eta_hat, lambda_hat) combination and
    return the result rows in deterministic sorted order.  ``out_dir`` gets
    grid.csv plus one residual curve per run."""
    if threads is None:
        threads = int(os.environ.get("GRAPHSPLIT_THREADS", "1"))
    problem = to_problem(instance)
    cells = sorted(
        (fam, g, e, l)
        for fam in config.scheme_families
        for g in config.gamma_hats
        for e in config.eta_hats
        for l in config.lambda_hats
    )
    if out_dir is not None:
        os.makedirs(os.path.join(out_dir, "curves"), exist_ok=True)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(
                lambda c: _run_cell(instance, problem, c, config, out_dir),
                cells))
    else:
        rows = [_run_cell(instance, problem, c, config, out_dir)
                for c in cells]
    if out_dir is not None:
        with open(os.path.join(out_dir, "grid.csv"), "w") as fh:
            fh.write(",".join(GRID_COLUMNS) + "\n")
            for row in rows:
                vals = []
                for col in GRID_COLUMNS:
                    v = row[col]
                    if isinstance(v, float):
                        vals.append("%.17g" % v)
                    else:
                        vals.append(str(v))
                fh.write(",".join(vals) + "\n")
    return rows


def save_instance(instance, dirpath):
    os.makedirs(dirpath, exist_ok=True)
    meta = {
        "n": instance.n_agents, "m": instance.m, "d": instance.d,
        "seed": instance.seed, "noise_var": instance.noise_var,
        "mu": instance.mu, "nu": instance.nu,
        "partition": instance.partition,
    }
    with open(os.path.join(dirpath, "meta.json"), "w") as fh:
        fh.write(dumps_json(meta))
        fh.write("\n")
    A = np.vstack(instance.A_blocks)
    b = np.concatenate(instance.b_blocks)

    def write_csv(name, arr):
        arr = np.atleast_2d(arr)
        with open(os.path.join(dirpath, name), "w") as fh:
            for row in arr:
                fh.write(",".join("%.17g" % v for v in row) + "\n")

    write_csv("A.csv", A)
    write_csv("b.csv", b.reshape(-1, 1))
    write_csv("x_true.csv", instance.x_true.reshape(-1, 1))


def load_instance(dirpath):
    with open(os.path.join(dirpath, "meta.json")) as fh:
        meta = json.load(fh)
    A = np.loadtxt(os.path.join(dirpath, "A.csv"), delimiter=",", ndmin=2)
    b = np.loadtxt(os.path.join(dirpath, "b.csv"), delimiter=",").reshape(-1)
    x_true = np.loadtxt(os.path.join(dirpath, "x_true.csv"),
                        delimiter=",").reshape(-1)
    counts = [int(c) for c in meta["partition"]]
    offsets = np.concatenate([[0], np.cumsum(counts)])
    n = int(meta["n"])
    return FusedLassoInstance(
        n_agents=n,
        A_blocks=[A[offsets[i]:offsets[i + 1]] for i in range(n)],
        b_blocks=[b[offsets[i]:offsets[i + 1]] for i in range(n)],
        mu=[float(v) for v in meta["mu"]],
        nu=[float(v) for v in meta["nu"]],
        d=int(meta["d"]), seed=int(meta["seed"]), x_true=x_true,
        noise_var=float(meta.get("noise_var", 1e-3)),
    )
