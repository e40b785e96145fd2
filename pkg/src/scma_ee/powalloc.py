"""Fractional-programming power allocation.

The energy-efficiency ratio is maximized with Dinkelbach's method: for a
parameter omega, the subtractive surrogate

    A(omega, P) = sum_rate_mac(P) - omega * total_power(P)

is (approximately) maximized over feasible P, omega is reset to the
achieved rate/power ratio, and the loop stops once A falls below epsilon.
omega is non-decreasing across iterations and converges to the best ratio.

Two inner solvers maximize the surrogate:

  * 'exact' (default): per-user block coordinate ascent. Each user's row
    has a closed-form water-filling solution whose level is designed
    directly from the budget, so the per-user constraint holds exactly at
    every iterate. Sequential (Gauss-Seidel) sweeps make each sweep a
    monotone ascent step on the surrogate.
  * 'subgradient': the literal fixed-point iteration pairing the
    water-filling power update with a dual multiplier ascent step per
    user. Kept for study; with constant steps the multipliers converge
    far too slowly at milliwatt scales to be a practical default.

Budget modes: PPC treats the per-user budget as an upper bound; PMP
forces each user to spend it exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .metrics import sum_rate_mac, total_power
from .model import (
    AllocationResult,
    PowerMatrix,
    SystemParams,
    TraceEntry,
    validate_factor_graph,
)

LN2 = math.log(2.0)

_MODES = ("PPC", "PMP")
_SCHEDULES = ("literal", "nested")
_INNER_METHODS = ("exact", "subgradient")
_ORDERS = ("gauss_seidel", "jacobi")
_OWN_TERMS = ("exclude", "include")
_STEP_RULES = ("constant", "diminishing")


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the Dinkelbach solver.

    epsilon: stop once the surrogate value drops below it.
    beta: multiplier step size, scalar or per-user sequence
        (subgradient inner method only).
    max_outer_iters / max_inner_iters: iteration caps.
    inner_tolerance: fixed-point tolerance for nested inner loops.
    mode: 'PPC' (budget as bound) or 'PMP' (budget spent exactly).
    schedule: 'literal' does one inner step per omega update and stops on
        A < epsilon; 'nested' iterates the inner solver to its fixed point
        per omega and stops on |A| < epsilon.
    inner_method: 'exact' or 'subgradient' (see module docstring).
    update_order: 'gauss_seidel' row sweeps or 'jacobi' simultaneous
        updates. Jacobi can stall the surrogate ascent well below the
        optimum when users share subcarriers; Gauss-Seidel is the default.
    own_term: whether the water-filling subtraction includes the updating
        user's own previous received power ('include') or only noise plus
        other users' power ('exclude', default; matches the single-user
        grid oracle).
    step_rule: 'constant' beta or 'diminishing' beta/sqrt(t).
    """

    epsilon: float = 1e-6
    beta: Union[float, tuple] = 1.0
    max_outer_iters: int = 500
    max_inner_iters: int = 1000
    inner_tolerance: float = 1e-8
    mode: str = "PPC"
    schedule: str = "literal"
    inner_method: str = "exact"
    update_order: str = "gauss_seidel"
    own_term: str = "exclude"
    step_rule: str = "constant"

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise ValueError("epsilon must be > 0")
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if not np.all(beta > 0):
            raise ValueError("beta must be > 0")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ValueError("iteration caps must be >= 1")
        if not (self.inner_tolerance > 0):
            raise ValueError("inner_tolerance must be > 0")
        for value, allowed, name in (
            (self.mode, _MODES, "mode"),
            (self.schedule, _SCHEDULES, "schedule"),
            (self.inner_method, _INNER_METHODS, "inner_method"),
            (self.update_order, _ORDERS, "update_order"),
            (self.own_term, _OWN_TERMS, "own_term"),
            (self.step_rule, _STEP_RULES, "step_rule"),
        ):
            if value not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {value!r}")

    def beta_vector(self, J: int) -> np.ndarray:
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if beta.shape == (1,):
            return np.full(J, beta[0])
        if beta.shape != (J,):
            raise ValueError(f"beta must be scalar or length {J}")
        return beta.copy()


def equal_split_power(F, params: SystemParams) -> PowerMatrix:
    """p_max[j]/N on each of user j's N assigned subcarriers; the
    initializer of both optimizers and the baseline power scheme."""
    mask = np.asarray(getattr(F, "entries", F)).T.astype(float)
    split = params.max_power_per_user / params.codeword_sparsity
    return PowerMatrix(p=mask * split[:, None])


def auxiliary_value(omega: float, F, P, H, params: SystemParams) -> float:
    """Dinkelbach surrogate: sum_rate_mac minus omega times total power."""
    if omega < 0:
        raise ValueError("omega must be >= 0")
    return sum_rate_mac(F, P, H, params) - omega * total_power(F, P, params)


def _subtracted_aggregate(mask, p, g2, sigma2, own_term):
    """Noise-plus-received power each user subtracts in the water-filling
    bracket, per subcarrier."""
    received = mask * p * g2
    agg = received.sum(axis=0, keepdims=True)
    if own_term == "exclude":
        return sigma2 + agg - received
    return sigma2 + np.broadcast_to(agg, received.shape)


def kkt_power_update(
    P_prev,
    lam,
    omega: float,
    F,
    H,
    params: SystemParams,
    own_term: str = "exclude",
) -> PowerMatrix:
    """One simultaneous water-filling update of every assigned entry.

    p[j,k] <- max(0, 1/((lam[j]+omega) ln2) - subtracted[j,k]/gain2[j,k])

    where subtracted is noise plus the aggregate received power on k taken
    at P_prev (all users simultaneously, Jacobi style). Assigned entries
    with zero channel gain are forced to 0 and flagged with a warning.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or omega < 0:
        raise ValueError("multipliers and omega must be >= 0")
    if np.any(lam + omega <= 0):
        raise ValueError("lam[j] + omega must be > 0 for every user")
    mask = np.asarray(getattr(F, "entries", F)).T.astype(float)
    p = np.asarray(getattr(P_prev, "p", P_prev), dtype=float)
    g2 = np.asarray(getattr(H, "gain2", H), dtype=float)
    dead = (mask > 0) & (g2 <= 0)
    if np.any(dead):
        warnings.warn(
            "assigned entries with zero channel gain receive zero power",
            RuntimeWarning,
            stacklevel=2,
        )
    sub = _subtracted_aggregate(mask, p, g2, params.noise_power, own_term)
    levels = 1.0 / ((lam + omega) * LN2)
    with np.errstate(divide="ignore", invalid="ignore"):
        new = levels[:, None] - sub / np.where(g2 > 0, g2, np.inf)
    new = np.where((mask > 0) & (g2 > 0), np.maximum(0.0, new), 0.0)
    return PowerMatrix(p=new)


def multiplier_update(
    lam_prev, P_new, params: SystemParams, config: SolverConfig, t: int = 1
) -> np.ndarray:
    """Projected subgradient step on the per-user budget multipliers:

    lam[j] <- max(0, lam[j] - beta[j] * (p_max[j] - sum_k p[j,k]))

    with beta[j]/sqrt(t) under the diminishing step rule.
    """
    lam = np.asarray(lam_prev, dtype=float)
    p = np.asarray(getattr(P_new, "p", P_new), dtype=float)
    beta = config.beta_vector(params.num_users)
    if config.step_rule == "diminishing":
        beta = beta / math.sqrt(max(t, 1))
    slack = params.max_power_per_user - p.sum(axis=1)
    return np.maximum(0.0, lam - beta * slack)


def _budget_level(floors: np.ndarray, budget: float) -> float:
    """Water level W with sum(max(0, W - floors)) == budget, exactly."""
    c = np.sort(floors)
    csum = np.cumsum(c)
    m = len(c)
    for r in range(1, m + 1):
        W = (budget + csum[r - 1]) / r
        if W > c[r - 1] and (r == m or W <= c[r]):
            return float(W)
    # Ties at branch boundaries can slip through in floating point;
    # the all-active level is the safe fallback.
    return float((budget + csum[-1]) / m)


def _exact_row(j, p, mask, g2, params, omega, mode):
    """Closed-form best response of user j's row given the other rows.

    Water-fills over the user's positive-gain assigned subcarriers. The
    level is capped at 1/(omega ln2) in PPC mode (spend less when the
    surrogate says transmit power is not worth it); PMP always spends the
    full budget. A PMP user with no positive-gain subcarrier falls back to
    an equal split over its assignment.
    """
    row = np.zeros(p.shape[1])
    active = (mask[j] > 0) & (g2[j] > 0)
    if not np.any(active):
        if mode == "PMP":
            support = mask[j] > 0
            n = int(support.sum())
            if n:
                row[support] = params.max_power_per_user[j] / n
        return row
    received = mask * p * g2
    agg_others = received.sum(axis=0) - received[j]
    floors = (params.noise_power + agg_others[active]) / g2[j, active]
    level = _budget_level(floors, float(params.max_power_per_user[j]))
    if mode == "PPC" and omega > 0:
        level = min(level, 1.0 / (omega * LN2))
    row[active] = np.maximum(0.0, level - floors)
    return row


def _exact_sweep(p, mask, g2, params, omega, mode, order):
    if order == "gauss_seidel":
        new = p.copy()
        for j in range(p.shape[0]):
            new[j] = _exact_row(j, new, mask, g2, params, omega, mode)
        return new
    rows = [
        _exact_row(j, p, mask, g2, params, omega, mode)
        for j in range(p.shape[0])
    ]
    return np.stack(rows)


def _rescale_to_budget(p, mask, params):
    """Scale each row multiplicatively onto its exact budget (PMP); zero
    rows fall back to an equal split over the assignment."""
    new = p.copy()
    for j in range(p.shape[0]):
        total = new[j].sum()
        budget = params.max_power_per_user[j]
        if total > 0:
            new[j] *= budget / total
        else:
            support = mask[j] > 0
            n = int(support.sum())
            if n:
                new[j, support] = budget / n
    return new


def _subgradient_rows(p, lam, omega, mask, g2, params, own_term, order):
    """One water-filling pass of the dual method, Jacobi or row-sequential."""
    levels = 1.0 / ((lam + omega) * LN2)
    if order == "jacobi":
        sub = _subtracted_aggregate(mask, p, g2, params.noise_power, own_term)
        with np.errstate(divide="ignore", invalid="ignore"):
            new = levels[:, None] - sub / np.where(g2 > 0, g2, np.inf)
        return np.where((mask > 0) & (g2 > 0), np.maximum(0.0, new), 0.0)
    new = p.copy()
    for j in range(p.shape[0]):
        received = mask * new * g2
        agg = received.sum(axis=0)
        sub = params.noise_power + agg - (received[j] if own_term == "exclude" else 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            row = levels[j] - sub / np.where(g2[j] > 0, g2[j], np.inf)
        new[j] = np.where((mask[j] > 0) & (g2[j] > 0), np.maximum(0.0, row), 0.0)
    return new


def _inner_step(p, lam, omega, t, mask, g2, params, config):
    """Advance the power matrix (and multipliers) for one outer iteration."""
    if config.inner_method == "exact":
        if config.schedule == "literal":
            return (
                _exact_sweep(
                    p, mask, g2, params, omega, config.mode, config.update_order
                ),
                lam,
            )
        current = p
        for _ in range(config.max_inner_iters):
            new = _exact_sweep(
                current, mask, g2, params, omega, config.mode, config.update_order
            )
            delta = np.max(np.abs(new - current))
            current = new
            if delta < config.inner_tolerance:
                break
        return current, lam
    # subgradient inner method
    sweeps = 1 if config.schedule == "literal" else config.max_inner_iters
    current, lam_cur = p, lam
    for s in range(sweeps):
        new = _subgradient_rows(
            current, lam_cur, omega, mask, g2, params,
            config.own_term, config.update_order,
        )
        if config.mode == "PMP":
            new = _rescale_to_budget(new, mask, params)
        lam_new = multiplier_update(lam_cur, new, params, config, t=t)
        delta = max(np.max(np.abs(new - current)), np.max(np.abs(lam_new - lam_cur)))
        current, lam_cur = new, lam_new
        if config.schedule == "nested" and delta < config.inner_tolerance:
            break
    return current, lam_cur


def _feasible(p, mask, params, mode):
    """Budget feasibility of an iterate (support is honored by construction)."""
    sums = p.sum(axis=1)
    if mode == "PMP":
        return bool(np.all(np.abs(sums - params.max_power_per_user) <= 1e-9))
    return bool(np.all(sums <= params.max_power_per_user + 1e-9))


def _implied_multipliers(p, mask, g2, params, omega):
    """Budget multipliers consistent with a water-filled power matrix:
    lam[j] = max(0, 1/(W_j ln2) - omega) with W_j the row's water level."""
    J = p.shape[0]
    lam = np.zeros(J)
    received = mask * p * g2
    agg = received.sum(axis=0)
    for j in range(J):
        active = (p[j] > 0) & (g2[j] > 0)
        if not np.any(active):
            continue
        floors = (params.noise_power + agg[active] - received[j, active]) / g2[
            j, active
        ]
        level = float(np.max(p[j, active] + floors))
        if level > 0:
            lam[j] = max(0.0, 1.0 / (level * LN2) - omega)
    return lam


def dinkelbach_allocate(F, H, params: SystemParams, config: SolverConfig = None):
    """Maximize energy efficiency over the powers for a fixed factor graph.

    Runs the Dinkelbach outer loop from omega=0 and the equal-split
    initializer. Each outer iteration advances the power matrix with the
    configured inner solver, records (t, omega, A) in the trace, and
    resets omega to the best rate/power ratio seen so far (ratios are
    non-decreasing when the inner solver ascends the surrogate; the max
    guards the trace invariant against floating-point jitter).

    Returns an AllocationResult whose power is the best feasible iterate;
    its ee, sum_rate and total_power are evaluated on exactly that matrix.
    converged is False when the outer cap is hit first; the best iterate
    is still returned.
    """
    if config is None:
        config = SolverConfig()
    verdict = validate_factor_graph(F, params)
    if not verdict:
        raise ValueError(f"infeasible factor graph: {verdict.message}")
    g2 = np.asarray(getattr(H, "gain2", H), dtype=float)
    J, K = params.num_users, params.num_subcarriers
    if g2.shape != (J, K):
        raise ValueError(f"channel shape {g2.shape} does not match ({J}, {K})")
    mask = np.asarray(getattr(F, "entries", F)).T.astype(float)

    def rate(p):
        return sum_rate_mac(mask.T, p, g2, params)

    def consumed(p):
        return total_power(mask.T, p, params)

    p = np.asarray(equal_split_power(F, params).p, dtype=float).copy()
    lam = np.ones(J)
    omega = 0.0
    best_p = p.copy()
    best_ratio = rate(p) / consumed(p)
    trace = []
    converged = False
    for t in range(1, config.max_outer_iters + 1):
        p_new, lam = _inner_step(p, lam, omega, t, mask, g2, params, config)
        r = rate(p_new)
        c = consumed(p_new)
        aux = r - omega * c
        trace.append(TraceEntry(t=t, omega=omega, aux=aux))
        ratio = r / c
        if ratio > best_ratio and _feasible(p_new, mask, params, config.mode):
            best_ratio = ratio
            best_p = p_new.copy()
        p = p_new
        met = aux < config.epsilon
        if config.schedule == "nested":
            met = abs(aux) < config.epsilon
        omega = max(omega, ratio)
        if met:
            converged = True
            break

    if config.inner_method == "exact":
        lam_report = _implied_multipliers(best_p, mask, g2, params, best_ratio)
    else:
        lam_report = np.maximum(0.0, lam)
    sr = rate(best_p)
    tp = consumed(best_p)
    return AllocationResult(
        ee=sr / tp,
        sum_rate=sr,
        total_power=tp,
        power=PowerMatrix(p=best_p),
        multipliers=lam_report,
        dinkelbach_trace=tuple(trace),
        converged=converged,
    )
