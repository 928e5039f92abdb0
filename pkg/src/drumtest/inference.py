"""Cone-projection hypothesis test with interior tightening and a
recentered multinomial bootstrap, plus the expected-utility-restricted
variant."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from math import log, sqrt

import numpy as np
from scipy.optimize import nnls

from .errors import ParameterError, SchemaError
from .model import PanelDataset, StochasticChoiceFunction, estimate_rho
from .representations import TypeMatrix, build_static_A, enumerate_orders, kron_dynamic


@dataclass(frozen=True)
class TestConfig:
    """Knobs of the statistical test.

    ``tau_rule='path-size'`` sets the tightening parameter to
    sqrt(log(M)/M) with M the per-menu-path sample size (the smallest one
    when paths differ); ``tau`` overrides it directly. Rows are scaled by
    estimated inverse binomial variances by default; ``weights='identity'``
    makes the statistic a plain squared cone distance but has too little
    small-sample power to reproduce the published rejection rates.
    """

    __test__ = False  # not a pytest class despite the name

    reps: int = 999
    alpha: float = 0.05
    tau: float | None = None
    tau_rule: str = "path-size"
    weights: str = "inverse-variance"
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ParameterError("need at least one bootstrap replication")
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha must be inside (0,1)")
        if self.tau is not None and self.tau < 0:
            raise ParameterError("tau must be nonnegative")
        if self.weights not in ("identity", "inverse-variance"):
            raise ParameterError(f"unknown weight rule {self.weights!r}")


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest class despite the name

    statistic: float
    critical_value: float
    p_value: float
    reject: bool
    nu_tau: np.ndarray
    eta_tau: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "statistic": float(self.statistic),
            "critical_value": float(self.critical_value),
            "p_value": float(self.p_value),
            "reject": bool(self.reject),
            "diagnostics": {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                            for k, v in self.diagnostics.items()},
        }


def _blocks_from_labels(row_labels):
    """Contiguous row ranges per menu path, in label order."""
    blocks, start = [], 0
    current = row_labels[0][0]
    for k, (path, _) in enumerate(row_labels):
        if path != current:
            blocks.append((current, start, k))
            current, start = path, k
    blocks.append((current, start, len(row_labels)))
    return blocks


def _projection_stat(WA, Wb):
    x, rnorm = nnls(WA, Wb)
    return x, rnorm * rnorm


def run_test(data, A: TypeMatrix, config: TestConfig = TestConfig(),
             universe=None) -> TestReport:
    """Scaled squared distance of the estimated path distribution from the
    type cone, with bootstrap critical values.

    The statistic is N times the weighted squared projection residual, N
    being the smallest per-menu-path sample size. The bootstrap resamples
    choice paths within each menu path, recenters at the tightened cone
    point, and recomputes the statistic with the same weights over the
    tightened cone (the parallel shift of the recentering point and the
    constraint set is what keeps the procedure valid at kinks); the p-value
    is (1 + #{J* >= J}) / (R + 1).
    """
    if isinstance(data, PanelDataset):
        if universe is None:
            raise SchemaError("estimating from a panel needs the universe")
        rho = estimate_rho(data, universe)
    else:
        rho = data
    if not rho.counts:
        raise SchemaError("the test needs per-menu-path sample sizes")

    dense = A.dense().astype(float)
    blocks = _blocks_from_labels(A.row_labels)
    vec = np.empty(len(A.row_labels))
    counts = []
    for path, start, stop in blocks:
        if path not in rho.probs:
            raise SchemaError(f"menu path {path} in A is not observed")
        order = rho.universe.choice_paths(path)
        arr = np.asarray(rho.probs[path], dtype=float)
        expect = [lab for lab in A.row_labels[start:stop]]
        got = [(path, cp) for cp in order]
        if expect != got:
            raise SchemaError("A rows are not in the canonical path order")
        vec[start:stop] = arr
        n = rho.counts.get(path)
        if not n:
            raise SchemaError(f"menu path {path} has no recorded sample size")
        counts.append(n)
    counts = np.array(counts, dtype=int)
    N = int(counts.min())

    tau = config.tau
    if tau is None:
        if config.tau_rule != "path-size":
            raise ParameterError(f"unknown tau rule {config.tau_rule!r}")
        tau = sqrt(log(N) / N) if N > 1 else 0.0

    if config.weights == "inverse-variance":
        var = np.maximum(vec * (1 - vec), 1e-4)
        sqrt_w = 1.0 / np.sqrt(var)
    else:
        sqrt_w = np.ones(len(vec))
    WA = dense * sqrt_w[:, None]

    _, j_min = _projection_stat(WA, sqrt_w * vec)
    statistic = N * j_min

    n_cols = dense.shape[1]
    lower = np.full(n_cols, tau / n_cols)
    shift = dense @ lower
    mu, _ = _projection_stat(WA, sqrt_w * (vec - shift))
    nu_tau = mu + lower
    # the bootstrap recenters at the exact tightened-cone point; pulling it
    # back onto the simplex would park it off the tightened cone and bias
    # every bootstrap statistic upward, so the renormalized version is only
    # reported
    eta = dense @ nu_tau
    eta_report = eta.copy()
    for path, start, stop in blocks:
        mass = eta_report[start:stop].sum()
        if mass > 0:
            eta_report[start:stop] /= mass

    seed_seq = np.random.SeedSequence(config.seed)
    child_seeds = seed_seq.spawn(config.reps)
    args = (WA, sqrt_w, vec, eta, shift, blocks, counts, N)
    if config.n_jobs > 1:
        chunks = np.array_split(np.arange(config.reps), config.n_jobs)
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            futures = [pool.submit(_bootstrap_chunk, args,
                                   [child_seeds[i] for i in chunk])
                       for chunk in chunks if len(chunk)]
            stats = np.concatenate([f.result() for f in futures])
    else:
        stats = _bootstrap_chunk(args, child_seeds)

    p_value = (1 + int(np.sum(stats >= statistic - 1e-12))) / (config.reps + 1)
    k = int(np.ceil((1 - config.alpha) * (config.reps + 1))) - 1
    critical = float(np.sort(stats)[min(k, config.reps - 1)])
    return TestReport(statistic, critical, p_value, p_value <= config.alpha,
                      nu_tau, eta_report,
                      {"N": N, "tau": tau, "path_sizes": counts.tolist(),
                       "weights": config.weights, "reps": config.reps,
                       "unequal_path_sizes": bool(len(set(counts.tolist())) > 1)})


def _bootstrap_chunk(args, seeds):
    WA, sqrt_w, vec, eta, shift, blocks, counts, N = args
    out = np.empty(len(seeds))
    for i, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        star = np.empty_like(vec)
        for (path, start, stop), n in zip(blocks, counts):
            draw = rng.multinomial(n, _normalized(vec[start:stop]))
            star[start:stop] = draw / n
        recentered = star - vec + eta
        _, j = _projection_stat(WA, sqrt_w * (recentered - shift))
        out[i] = N * j
    return out


def _normalized(block):
    s = block.sum()
    return block / s if s > 0 else np.full_like(block, 1.0 / len(block))


def run_test_eu(panel, universe, lotteries: dict, config: TestConfig = TestConfig(),
                rho=None) -> TestReport:
    """The same test with the type matrix restricted to rankings consistent
    with expected utility over the supplied lotteries."""
    if rho is None:
        rho = estimate_rho(panel, universe)
    statics = []
    for t in universe.periods:
        orders = enumerate_orders(universe, t, eu_filter=lotteries)
        if not orders:
            raise ParameterError("no ranking is consistent with expected utility; "
                                 "the restricted model is degenerate")
        statics.append(build_static_A(universe, t, orders))
    A = kron_dynamic(statics, rho.observed_paths, universe)
    report = run_test(rho, A, config)
    report.diagnostics["eu_orders_per_period"] = [len(s.col_labels) for s in statics]
    return report
