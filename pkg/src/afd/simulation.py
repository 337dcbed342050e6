"""Data generation and the Monte Carlo / bias-rate harnesses.

Replications are seeded by spawning one child stream per replication index
from a single root seed, so results are identical for any worker count and
any execution order.  Aggregation walks replications in index order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimation import (PanelData, TruthSpec, confidence_interval,
                         expand_bracket, mm_estimate, PopulationMoment,
                         pseudo_true, sandwich_variance)
from .exceptions import BracketError, DiagnosticsError, DomainError
from .model import TwoBlockBinomialModel
from .prior import NormalLaw
from .scores import KernelBuilder

RATE_PRECISION_FLOOR = 1e-7  # |b_T| below this is quadrature-noise territory
FAILURE_CAP = 0.01


def generate_panel(model, truth: TruthSpec, n: int, rng) -> PanelData:
    """Draw a panel of n units from the true DGP.

    Heterogeneity is sampled from the continuous true law (not its
    quadrature grid).  Covariates follow the design: a single shared value
    replicates across units, a per-unit design must supply n values.
    """
    alphas = truth.pi0.sample(rng, n)
    design = truth.design
    if len(design) == 1:
        xs = [design[0][0]] * n
    elif len(design) == n:
        xs = [x for x, _ in design]
    else:
        raise DomainError(f"design has {len(design)} points for n={n} units")
    outcomes = [model.simulate(x, a, truth.theta0, rng)
                for x, a in zip(xs, alphas)]
    covariates = None if len(design) == 1 else xs
    return PanelData(model=model, outcomes=outcomes, covariates=covariates)


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo run description; immutable so workers can share it."""

    model: object
    truth: TruthSpec
    prior: object            # heterogeneity law for the analysis prior
    prior_points: int = 1000
    score: str = "integrated"
    q_list: tuple = (0, 1, 2)
    n: int = 1000
    reps: int = 1000
    seed: int = 0
    workers: int = 0         # 0 or 1 = serial
    bracket: tuple = None

    def __post_init__(self):
        if self.reps < 1 or self.n < 1:
            raise DomainError("reps and n must both be at least 1")

    def resolved_bracket(self):
        if self.bracket is not None:
            return tuple(self.bracket)
        t0 = self.truth.theta0
        return (t0 - 2.0, t0 + 3.0)


@dataclass
class McCell:
    """Aggregated Monte Carlo summaries for one correction order."""

    q: object
    bias: float
    n_var: float
    rmse: float
    ci95: float
    reps_used: int
    failures: int


@dataclass
class McSummary:
    cells: list
    reps: int
    failures: int
    diagnostics: dict = field(default_factory=dict)


def _builders(config: McConfig):
    grid = config.prior.quadrature(config.prior_points)
    return {q: KernelBuilder(config.model, grid, score=config.score, q=q)
            for q in config.q_list}


def _run_replication(config: McConfig, builders, rep: int):
    """One replication: simulate, estimate each q, record CI coverage."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed,
                                                       spawn_key=(rep,)))
    data = generate_panel(config.model, config.truth, config.n, rng)
    bracket = config.resolved_bracket()
    out = {}
    for q, builder in builders.items():
        try:
            theta_hat, _ = mm_estimate(data, builder, bracket)
            v_hat = sandwich_variance(data, builder, theta_hat)
            lo, hi = confidence_interval(theta_hat, v_hat, config.n)
            covered = lo <= config.truth.theta0 <= hi
            out[q] = (theta_hat, covered)
        except (BracketError, DiagnosticsError):
            out[q] = None
    return rep, out


_WORKER_STATE = {}


def _worker_init(config):
    _WORKER_STATE["config"] = config
    _WORKER_STATE["builders"] = _builders(config)


def _worker_run(rep):
    return _run_replication(_WORKER_STATE["config"], _WORKER_STATE["builders"], rep)


def run_monte_carlo(config: McConfig) -> McSummary:
    """Run all replications and aggregate per-q summaries.

    Replications that fail to bracket a root are dropped and counted; the
    run aborts if more than 1% of replication-q cells fail.
    """
    if config.workers and config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers,
                                 initializer=_worker_init,
                                 initargs=(config,)) as pool:
            results = list(pool.map(_worker_run, range(config.reps), chunksize=8))
    else:
        builders = _builders(config)
        results = [_run_replication(config, builders, rep)
                   for rep in range(config.reps)]
    results.sort(key=lambda item: item[0])

    cells = []
    total_failures = 0
    theta0 = config.truth.theta0
    for q in config.q_list:
        draws = []
        covers = []
        failures = 0
        for _, out in results:
            item = out[q]
            if item is None:
                failures += 1
                continue
            draws.append(item[0])
            covers.append(item[1])
        total_failures += failures
        if failures > FAILURE_CAP * config.reps:
            raise DiagnosticsError(
                f"{failures}/{config.reps} replications failed at q={q}, "
                f"exceeding the {FAILURE_CAP:.0%} cap")
        draws = np.asarray(draws)
        bias = float(draws.mean() - theta0)
        var = float(draws.var())  # population form so rmse^2 = bias^2 + var
        rmse = float(np.sqrt(np.mean((draws - theta0) ** 2)))
        cells.append(McCell(q=q, bias=bias, n_var=config.n * var, rmse=rmse,
                            ci95=float(np.mean(covers)), reps_used=draws.size,
                            failures=failures))
    return McSummary(cells=cells, reps=config.reps, failures=total_failures,
                     diagnostics={"seed": config.seed, "n": config.n})


# ---------------------------------------------------------------------------
# large-T bias rates
# ---------------------------------------------------------------------------

@dataclass
class RateRow:
    pi0: str
    q: int
    T: int
    b_T: float
    ratio: float | None
    below_precision_floor: bool


def rate_bias(T, q, pi0, *, error="probit", theta0=1.0, prior=None,
              prior_points=1000, score="integrated", half_width=0.1) -> float:
    """Pseudo-true bias for the symmetric two-block design of length T.

    Always uses the factored matrix-free path, so the outcome space may be
    far larger than the dense limit.  The root bracket expands outward from
    theta0 until the population moment changes sign; expansion stops where
    the prior predictive underflows its positivity floor, which caps how
    far the bracket can reach for very large T.
    """
    if T % 2:
        raise DomainError("rate sweep uses even T with T0 = T1 = T/2")
    model = TwoBlockBinomialModel(T // 2, T // 2, error=error)
    prior = prior if prior is not None else NormalLaw(0.0, 1.0)
    grid = prior.quadrature(prior_points)
    builder = KernelBuilder(model, grid, score=score, q=q, mode="factored")
    truth = TruthSpec(theta0=theta0, pi0=pi0, quad_points=prior_points)
    pm = PopulationMoment(builder, truth)
    bracket = expand_bracket(pm, theta0, half_width=half_width)
    theta_star, _ = pseudo_true(builder, truth, bracket)
    return theta_star - theta0


def rate_table(T_list, q_list, pi0_list, *, error="probit", theta0=1.0,
               prior=None, prior_points=1000) -> list[RateRow]:
    """Bias and halving-ratio sweep over (pi0, q, T).

    The ratio column compares each T against the preceding entry of
    ``T_list`` (intended as successive doublings).  Cells with |b_T| under
    the double-precision quadrature floor are flagged rather than trusted.
    """
    rows = []
    for pi0 in pi0_list:
        for q in q_list:
            prev = None
            for T in T_list:
                b = rate_bias(T, q, pi0, error=error, theta0=theta0,
                              prior=prior, prior_points=prior_points)
                ratio = None if prev is None or b == 0.0 else prev / b
                rows.append(RateRow(pi0=pi0.label, q=q, T=T, b_T=b, ratio=ratio,
                                    below_precision_floor=abs(b) < RATE_PRECISION_FLOOR))
                prev = b
    return rows
