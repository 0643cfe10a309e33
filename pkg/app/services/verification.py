"""
Verification suites: random sweeps of the exclusion converse bounds.

Each suite draws seeded instances, evaluates both sides of an inequality and emits a
VerificationReport. Trial seeds are spawned from `SeedSequence(seed)` by trial index, so
a report depends only on (seed, config), not on the number of workers.
"""

from __future__ import annotations
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from app import __version__
from app.core.errors import DimensionCap
from app.core.settings import DEFAULTS
from app.schemas.report import ReportSummary, TrialRecord, VerificationReport
from app.services.ensembles import random_channel_ensemble, random_diagonal_ensemble, random_ensemble
from app.services.exclusion import (
    StateEnsemble,
    channel_exclusion_oneshot,
    empirical_exponent,
    exponent_from_error,
    min_error_exclusion,
)
from app.services.radii import (
    bs_state_radius,
    channel_bs_radius,
    log_euclidean_chernoff,
    oneshot_converse_bound,
    sandwiched_radius_affine,
)

logger = logging.getLogger(__name__)

DEFAULT_ALPHAS = (1.1, 1.5, 2.0, 3.0)
SUITES = ("oneshot", "asymptotic", "channel")
# the channel suite runs several radius solves per trial
SUITE_TRIALS = {"oneshot": 100, "asymptotic": 50, "channel": 5}


def trial_seeds(seed: int, trials: int) -> List[int]:
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(trials)]


def _record(trial: int, seed: int, check: str, lhs: float, rhs: float, tol: float, **kwargs) -> TrialRecord:
    # an infinite right-hand side passes whatever the left-hand side is
    margin = math.inf if math.isinf(rhs) and rhs > 0 else rhs - lhs
    return TrialRecord(trial=trial, seed=seed, check=check, lhs=lhs, rhs=rhs, margin=margin,
                       passed=margin >= -tol, **kwargs)


def _summary(ensemble: StateEnsemble) -> Dict[str, object]:
    return {"r": ensemble.r, "d": ensemble.dim, "priors": [round(float(p), 12) for p in ensemble.priors]}


def _run(suite: str, seed: int, trials: int, workers: int, config: Dict[str, object],
         trial_fn: Callable[[int, int], List[TrialRecord]]) -> VerificationReport:
    seeds = trial_seeds(seed, trials)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(trial_fn, range(trials), seeds))
    else:
        chunks = [trial_fn(i, s) for i, s in enumerate(seeds)]
    records = [rec for chunk in chunks for rec in chunk]
    tol = float(config["tol"])
    failures = sum(1 for rec in records if rec.margin < -tol)
    margins = [rec.margin for rec in records]
    report = VerificationReport(
        suite=suite,
        seed=seed,
        tool_version=__version__,
        config=config,
        records=records,
        summary=ReportSummary(trials=trials, records=len(records), failures=failures,
                              min_margin=min(margins) if margins else math.inf),
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    log = logger.warning if failures else logger.info
    log("suite %s: %d trials, %d records, %d failures", suite, trials, len(records), failures)
    return report


# -------------------------------------------------------------------
# One-shot converse
# -------------------------------------------------------------------

def verify_oneshot(
    trials: int = 100,
    seed: int = 42,
    alpha_grid: Sequence[float] = DEFAULT_ALPHAS,
    tol: float = 1e-6,
    d: int = 2,
    r_values: Sequence[int] = (2, 3, 4),
    rank_profile="full",
    workers: int = 1,
) -> VerificationReport:
    """−ln P_err ≤ R_α + (α/(α−1)) ln(1/p_min) for every α in the grid."""
    alphas = tuple(float(a) for a in alpha_grid)
    if not alphas or any(not a > 1 for a in alphas):
        raise ValueError(f"alpha grid must be non-empty with every alpha > 1, got {alphas}")

    def trial(i: int, s: int) -> List[TrialRecord]:
        ensemble = random_ensemble(s, r_values[i % len(r_values)], d, rank_profile)
        lhs = exponent_from_error(min_error_exclusion(ensemble).value, 1)
        bounds = {f"alpha={a:g}": oneshot_converse_bound(ensemble, a) for a in alphas}
        return [_record(i, s, "oneshot", lhs, min(bounds.values()), tol, instance=_summary(ensemble), extra=bounds)]

    config = {"alpha_grid": list(alphas), "tol": tol, "d": d, "r_values": list(r_values),
              "rank_profile": rank_profile, "trials": trials}
    return _run("oneshot", seed, trials, workers, config, trial)


# -------------------------------------------------------------------
# Finite-n converse and the asymptotic Chernoff value
# -------------------------------------------------------------------

def asymptotic_records(i: int, s: int, ensemble: StateEnsemble, n_max: int, tol: float,
                       alphas: Sequence[float], check: str = "asymptotic") -> List[TrialRecord]:
    """
    Per n: exponent(n) ≤ min_α [R_α + (α/(α−1)) ln(1/p_min)/n]. The Chernoff value is
    recorded alongside; exponents above it are noted, not failed, since it limits only
    the n → ∞ behaviour.
    """
    exponents = empirical_exponent(ensemble, n_max)
    radii = {a: sandwiched_radius_affine(ensemble, a).value for a in alphas}
    chernoff = log_euclidean_chernoff(ensemble).value
    penalty = math.log(1.0 / ensemble.p_min)
    records = []
    for n, exponent in exponents:
        rhs = min(radii[a] + a / (a - 1.0) * penalty / n for a in alphas)
        notes = []
        if exponent > chernoff + tol:
            notes.append(f"exceeds_asymptotic: exponent {exponent:.6g} > chernoff {chernoff:.6g}")
        extra = {"n": float(n), "chernoff": chernoff, "exponent": exponent}
        records.append(_record(i, s, f"{check}:n={n}", exponent, rhs, tol, instance=_summary(ensemble),
                               notes=notes, extra=extra))
    return records


def verify_asymptotic_state(
    trials: int = 50,
    seed: int = 7,
    n_max: int = 3,
    tol: float = 1e-5,
    r: int = 3,
    d: int = 2,
    kind: str = "random",
    alpha_grid: Sequence[float] = DEFAULT_ALPHAS,
    workers: int = 1,
) -> VerificationReport:
    if kind not in ("random", "diagonal"):
        raise ValueError(f"Unknown instance kind '{kind}'; use 'random' or 'diagonal'")
    if d ** n_max > DEFAULTS.DIMENSION_CAP:
        raise DimensionCap(f"d^n_max = {d ** n_max} exceeds the dimension cap {DEFAULTS.DIMENSION_CAP}")
    alphas = tuple(float(a) for a in alpha_grid)

    def trial(i: int, s: int) -> List[TrialRecord]:
        make = random_ensemble if kind == "random" else random_diagonal_ensemble
        return asymptotic_records(i, s, make(s, r, d), n_max, tol, alphas)

    config = {"n_max": n_max, "tol": tol, "r": r, "d": d, "kind": kind, "alpha_grid": list(alphas), "trials": trials}
    return _run("asymptotic", seed, trials, workers, config, trial)


# -------------------------------------------------------------------
# Channel radius checks
# -------------------------------------------------------------------

def verify_channel(
    trials: int = 5,
    seed: int = 3,
    tol: float = 1e-4,
    n_max: int = 2,
    restarts: Optional[int] = None,
    alpha_grid: Sequence[float] = DEFAULT_ALPHAS,
    workers: int = 1,
) -> VerificationReport:
    """
    Per trial (qubit channels, r alternating 2 and 3):
      radius ≥ 0 and finite on a random ensemble of full-Choi-rank channels (with the n = 1
      see-saw value recorded),
      radius = 0 on an identical ensemble,
      replacer ensemble radius = state-side BS radius of the replaced states,
      the finite-n state checks on the states a replacer ensemble outputs.
    """
    alphas = tuple(float(a) for a in alpha_grid)

    def trial(i: int, s: int) -> List[TrialRecord]:
        r = 2 + i % 2
        records = []

        random_ens = random_channel_ensemble(s, r, 2, "random", n_kraus=4)
        radius = channel_bs_radius(random_ens, restarts=restarts, seed=s).value
        strategy = channel_exclusion_oneshot(random_ens, restarts=2, seed=s)
        extra = {"radius": radius, "channel_exclusion_value": strategy.value,
                 "oneshot_exponent": exponent_from_error(strategy.value, 1)}
        records.append(_record(i, s, "nonnegative", 0.0, radius, tol, instance={"r": r, "kind": "random"},
                               extra=extra))

        identical = random_channel_ensemble(s, r, 2, "identical")
        value = channel_bs_radius(identical, restarts=restarts, seed=s).value
        records.append(_record(i, s, "identical", abs(value), 0.0, tol, instance={"r": r, "kind": "identical"},
                               extra={"radius": value}))

        replacer = random_channel_ensemble(s, r, 2, "replacer")
        states = [c.choi[:2, :2] for c in replacer.channels]
        channel_value = channel_bs_radius(replacer, restarts=restarts, seed=s).value
        state_value = bs_state_radius(states, restarts=restarts, seed=s).value
        records.append(_record(i, s, "replacer", abs(channel_value - state_value), 0.0, tol,
                               instance={"r": r, "kind": "replacer"},
                               extra={"channel_radius": channel_value, "state_radius": state_value}))

        induced = StateEnsemble.from_arrays(replacer.priors, states)
        records.extend(asymptotic_records(i, s, induced, n_max, tol, alphas, check="replacer-asymptotic"))
        return records

    config = {"tol": tol, "n_max": n_max, "restarts": restarts, "alpha_grid": list(alphas), "trials": trials}
    return _run("channel", seed, trials, workers, config, trial)


def run_suite(suite: str, trials: Optional[int], seed: int, tol: Optional[float] = None, workers: int = 1,
              n_max: Optional[int] = None) -> VerificationReport:
    """trials=None runs the suite's default count (SUITE_TRIALS)."""
    if suite not in SUITES:
        raise ValueError(f"Unknown suite '{suite}'; choose from {SUITES}")
    trials = SUITE_TRIALS[suite] if trials is None else trials
    if suite == "oneshot":
        return verify_oneshot(trials, seed, tol=1e-6 if tol is None else tol, workers=workers)
    if suite == "asymptotic":
        return verify_asymptotic_state(trials, seed, n_max=n_max or 3, tol=1e-5 if tol is None else tol,
                                       workers=workers)
    return verify_channel(trials, seed, tol=1e-4 if tol is None else tol, n_max=n_max or 2, workers=workers)
