"""Chain drivers: the joint Gibbs sampler and the two-stage estimator."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import ConfigError, DataError
from .model import (CountData, CovariateMatrix, Hyperparams, LatentState, ModelParams, Trace,
                    joint_log_density, theta_matrix)
from .samplers import (ClampCounter, SliceConfig, make_rng, sample_beta, sample_overdispersion,
                       sample_phi, sample_z_sweep)
from .vanilla import VanillaConfig, run_vanilla

Progress = Callable[[int, float], None]


@dataclass
class FitConfig:
    hp: Hyperparams
    mode: str = "two-stage"
    iters: int = 5000
    burnin: int = 2500
    thin: int = 5
    seed: int = 0
    slice: SliceConfig = field(default_factory=SliceConfig)
    # bracket width for the overdispersion; None means n_upper / 10
    n_width: Optional[float] = None
    stage1_alpha: float = 0.1
    inner_iters: int = 20
    warmup_iters: int = 200
    random_scan: bool = False
    check_every_sweep: bool = False

    def __post_init__(self):
        if self.mode not in ("joint", "two-stage"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.iters < 1 or self.thin < 1:
            raise ConfigError("iters and thin must be positive")
        if self.burnin < 0 or self.burnin >= self.iters:
            raise ConfigError("burnin must satisfy 0 <= burnin < iters")
        if (self.iters - self.burnin) // self.thin < 1:
            raise ConfigError("no draws would be retained; lower thin or burnin")
        if self.inner_iters < 1 or self.warmup_iters < 1:
            raise ConfigError("inner_iters and warmup_iters must be positive")

    @property
    def n_retained(self) -> int:
        return (self.iters - self.burnin) // self.thin

    def n_slice(self) -> SliceConfig:
        width = self.n_width if self.n_width is not None else self.hp.n_upper / 10.0
        return SliceConfig(width, self.slice.max_expansions)

    def stage1(self) -> VanillaConfig:
        return VanillaConfig(K_max=self.hp.K, alpha=self.stage1_alpha, gamma=self.hp.gamma,
                             iters=self.iters, burnin=self.burnin, thin=self.thin, seed=self.seed,
                             random_scan=self.random_scan)

    def as_meta(self) -> dict:
        return {
            "mode": self.mode, "iters": self.iters, "burnin": self.burnin, "thin": self.thin,
            "seed": self.seed, "K": self.hp.K, "prior_var": self.hp.prior_var,
            "n_upper": self.hp.n_upper, "ci_level": self.hp.ci_level,
            "gamma": float(self.hp.gamma[0]) if np.all(self.hp.gamma == self.hp.gamma[0]) else "vector",
            "slice_width": self.slice.width, "n_width": self.n_slice().width,
            "stage1_alpha": self.stage1_alpha, "inner_iters": self.inner_iters,
            "warmup_iters": self.warmup_iters,
        }


def _check_inputs(data: CountData, X: CovariateMatrix, cfg: FitConfig) -> None:
    if X.L != data.L:
        raise DataError(f"{data.L} count rows but {X.L} covariate rows")
    if cfg.hp.gamma.size != data.S:
        raise ConfigError(f"gamma has {cfg.hp.gamma.size} entries for {data.S} categories")


def _retain(it: int, cfg: FitConfig) -> bool:
    return it > cfg.burnin and (it - cfg.burnin) % cfg.thin == 0


def run_joint(data: CountData, X: CovariateMatrix, cfg: FitConfig,
              progress: Optional[Progress] = None) -> Trace:
    """Gibbs sampler cycling through all four full conditionals."""
    _check_inputs(data, X, cfg)
    hp = cfg.hp
    rng = make_rng(cfg.seed)
    clamp = ClampCounter()
    n_cfg = cfg.n_slice()

    state = LatentState.random(data, hp.K, rng)
    beta = np.zeros((hp.K, X.d))
    n_disp = hp.n_upper / 2.0
    phi = sample_phi(state.n_sk, hp.gamma, rng)

    draws = {"phi": [], "beta": [], "n": [], "theta": []}
    logdens = np.empty(cfg.iters)
    for it in range(1, cfg.iters + 1):
        sample_z_sweep(state, beta, n_disp, X, hp, rng, cfg.random_scan)
        if cfg.check_every_sweep:
            state.check(data.counts)
        phi = sample_phi(state.n_sk, hp.gamma, rng)
        beta = sample_beta(state, beta, n_disp, X, hp, cfg.slice, rng, cfg.random_scan, clamp)
        n_disp = sample_overdispersion(state, beta, X, hp, n_cfg, rng, n_disp, clamp)
        params = ModelParams(phi, beta, n_disp)
        logdens[it - 1] = joint_log_density(state, params, data, X, hp)
        if _retain(it, cfg):
            state.check(data.counts)
            params.validate(hp.n_upper)
            draws["phi"].append(phi)
            draws["beta"].append(beta.copy())
            draws["n"].append(n_disp)
            draws["theta"].append(theta_matrix(state.n_lk))
        if progress is not None:
            progress(it, logdens[it - 1])

    meta = cfg.as_meta()
    meta["clamp_events"] = clamp.events
    return Trace(np.array(draws["phi"]), np.array(draws["beta"]), np.array(draws["n"]),
                 np.array(draws["theta"]), logdens, meta)


def run_two_stage(data: CountData, X: CovariateMatrix, cfg: FitConfig,
                  progress: Optional[Progress] = None) -> Trace:
    """Compositions from plain LDA, regression conditioned on its abundances.

    Stage one runs the covariate-free sampler and keeps, at every retained
    sweep, a composition draw and the latent abundance matrix.  Stage two
    refreshes the coefficients and the overdispersion against each kept
    abundance matrix in turn, warm-starting from the previous snapshot
    (``warmup_iters`` slice sweeps for the first one, ``inner_iters`` after).
    """
    _check_inputs(data, X, cfg)
    hp = cfg.hp
    rng = make_rng(cfg.seed)
    clamp = ClampCounter()
    n_cfg = cfg.n_slice()

    stage1 = run_vanilla(data, cfg.stage1(), rng, callback=progress)

    beta = np.zeros((hp.K, X.d))
    n_disp = hp.n_upper / 2.0
    beta_draws, n_draws, theta_draws = [], [], []
    for r, n_lk in enumerate(stage1.n_lk_draws):
        for _ in range(cfg.warmup_iters if r == 0 else cfg.inner_iters):
            beta = sample_beta(n_lk, beta, n_disp, X, hp, cfg.slice, rng, cfg.random_scan, clamp)
            n_disp = sample_overdispersion(n_lk, beta, X, hp, n_cfg, rng, n_disp, clamp)
        ModelParams(stage1.phi_draws[r], beta, n_disp).validate(hp.n_upper)
        beta_draws.append(beta.copy())
        n_draws.append(n_disp)
        theta_draws.append(theta_matrix(n_lk))

    meta = cfg.as_meta()
    meta["clamp_events"] = clamp.events
    meta["occupancy"] = ";".join(f"{f:.6g}" for f in stage1.occupancy.fractions)
    return Trace(stage1.phi_draws, np.array(beta_draws), np.array(n_draws),
                 np.array(theta_draws), stage1.logdens, meta)


def fit(data: CountData, X: CovariateMatrix, cfg: FitConfig,
        progress: Optional[Progress] = None) -> Trace:
    runner = run_joint if cfg.mode == "joint" else run_two_stage
    return runner(data, X, cfg, progress)


def _fit_seeded(args):
    data, X, cfg = args
    return fit(data, X, cfg)


def run_chains(data: CountData, X: CovariateMatrix, cfg: FitConfig,
               seeds: Sequence[int], max_workers: Optional[int] = None) -> list:
    """Independent chains, one per seed.

    Runs in up to ``COVLDA_THREADS`` worker processes (default 1, i.e. serial).
    """
    if max_workers is None:
        max_workers = int(os.environ.get("COVLDA_THREADS", "1"))
    jobs = [(data, X, _with_seed(cfg, s)) for s in seeds]
    if max_workers <= 1 or len(jobs) == 1:
        return [_fit_seeded(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(_fit_seeded, jobs))


def _with_seed(cfg: FitConfig, seed: int) -> FitConfig:
    return replace(cfg, seed=seed)


@dataclass
class ConvergenceSummary:
    logdens: np.ndarray
    running_mean: np.ndarray
    split_diff: float
    se_second: float
    flagged: bool


def effective_sample_size(x) -> float:
    """ESS from the initial positive sequence of autocorrelation pairs."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4 or np.var(x) == 0:
        return float(n)
    xc = x - x.mean()
    f = np.fft.rfft(xc, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf /= acf[0]
    total = 0.0
    for t in range(0, n - 1, 2):
        pair = acf[t] + acf[t + 1]
        if pair <= 0:
            break
        total += pair
    tau = max(2.0 * total - 1.0, 1.0)
    return n / tau


def convergence_summary(trace, burnin: Optional[int] = None) -> ConvergenceSummary:
    """Crude stationarity check on the log-density series.

    Compares the means of the two halves of the post-burn-in series; the
    difference is flagged when it exceeds two autocorrelation-adjusted
    standard errors of the second half.
    """
    if isinstance(trace, Trace):
        series = trace.logdens
        if burnin is None:
            burnin = int(trace.meta.get("burnin", 0))
    else:
        series = np.asarray(trace, dtype=float)
    if series.size == 0:
        raise ValueError("empty trace")
    burnin = burnin or 0
    tail = series[burnin:] if series.size - burnin >= 2 else series
    running = np.cumsum(series) / np.arange(1, series.size + 1)
    half = tail.size // 2
    first, second = tail[:half], tail[half:]
    if first.size == 0:
        return ConvergenceSummary(series, running, 0.0, 0.0, False)
    diff = float(second.mean() - first.mean())
    se = float(np.std(second, ddof=1) / np.sqrt(effective_sample_size(second))) if second.size > 1 else 0.0
    return ConvergenceSummary(series, running, diff, se, abs(diff) > 2 * se)
