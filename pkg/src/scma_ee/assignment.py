"""Factor-graph construction: greedy builder plus baselines.

The greedy builder admits users one at a time. While the network can still
be kept orthogonal (j*N <= K for the j-th user) it hands out codewords
with pairwise disjoint subcarrier support; past that point each new user
takes the candidate column with the largest energy-efficiency increment
under equal-split powers. Baselines: uniform random column sampling, the
canonical fixed 4x6 graph, and exhaustive search over every injective
column assignment.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import FactorGraph, SystemParams


class AssignmentInfeasibleError(RuntimeError):
    """No admissible column exists for the user being placed."""


class SearchSpaceCapError(RuntimeError):
    """The exhaustive search space exceeds the configured cap."""


@dataclass(frozen=True)
class CandidatePool:
    """An ordered pool of distinct binary codeword columns (K-vectors with
    exactly N ones) from which users draw, plus the seed that ordered it."""

    columns: np.ndarray
    rng_seed: int = 0

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=np.int64)
        if cols.ndim != 2:
            raise ValueError("columns must be an (M, K) matrix")
        if not np.isin(cols, (0, 1)).all():
            raise ValueError("pool columns must be binary")
        sums = cols.sum(axis=1)
        if len(sums) and np.any(sums != sums[0]):
            raise ValueError("pool columns must all have the same sparsity")
        if len({tuple(c) for c in cols}) != len(cols):
            raise ValueError("pool columns must be distinct")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)

    def __len__(self) -> int:
        return self.columns.shape[0]


def enumerate_candidates(K: int, N: int) -> CandidatePool:
    """All C(K, N) indicator columns in lexicographic support order."""
    if N > K:
        raise ValueError(f"cannot place N={N} ones in K={K} slots")
    cols = np.zeros((math.comb(K, N), K), dtype=np.int64)
    for i, support in enumerate(itertools.combinations(range(K), N)):
        cols[i, list(support)] = 1
    return CandidatePool(columns=cols, rng_seed=0)


def shuffled_pool(K: int, N: int, rng_seed: int) -> CandidatePool:
    """The full candidate universe in seeded shuffled order.

    A shuffled full universe always contains an orthogonal completion for
    the greedy builder's first floor(K/N) users, so construction cannot
    dead-end.
    """
    universe = enumerate_candidates(K, N).columns
    order = np.random.default_rng(rng_seed).permutation(len(universe))
    return CandidatePool(columns=universe[order], rng_seed=rng_seed)


def count_factor_graphs(K: int, N: int, J: int):
    """Number of distinct factor graphs: the falling factorial
    C(K,N) * (C(K,N)-1) * ... * (C(K,N)-J+1), exact integer arithmetic."""
    m = math.comb(K, N)
    if J > m:
        raise ValueError(f"J={J} users exceed the {m} distinct columns")
    count = 1
    for j in range(J):
        count *= m - j
    return count


def _prefix_ee(cols, powers, gain2, params: SystemParams) -> float:
    """Energy efficiency of a j-user prefix under the MAC rate model.

    cols: list of K-vectors for admitted users; powers: matching per-user
    K-vectors of transmit power. Circuit power counts only admitted users.
    """
    j = len(cols)
    if j == 0:
        return 0.0
    C = np.asarray(cols, dtype=float)
    P = np.asarray(powers, dtype=float)
    agg = (C * P * gain2[:j]).sum(axis=0)
    rate = float(np.log2(1.0 + agg / params.noise_power).sum())
    consumed = float((C * P).sum()) + j * params.circuit_power
    if consumed <= 0.0:
        return 0.0
    return rate / consumed


def ee_increment(F_partial, P, H, params: SystemParams) -> float:
    """Energy-efficiency gain from admitting the last user of a prefix.

    F_partial holds the first j assigned columns (K x j); P holds the
    matching j x K powers, equal-split in the intended use. Returns
    EE(j users) - EE(j-1 users), counting circuit power only for admitted
    users, so the first user's increment is the single-user EE itself.
    """
    f = np.asarray(getattr(F_partial, "entries", F_partial))
    p = np.asarray(getattr(P, "p", P), dtype=float)
    if f.ndim != 2 or f.shape[1] == 0:
        raise ValueError("prefix must contain at least one assigned column")
    j = f.shape[1]
    if p.shape != (j, f.shape[0]):
        raise ValueError("power rows must match the assigned columns")
    gain2 = np.asarray(getattr(H, "gain2", H), dtype=float)
    cols = [f[:, i] for i in range(j)]
    rows = [p[i] for i in range(j)]
    return _prefix_ee(cols, rows, gain2, params) - _prefix_ee(
        cols[:-1], rows[:-1], gain2, params
    )


def fast_assignment(
    H, params: SystemParams, pool: CandidatePool, return_eval_count: bool = False
):
    """Greedy factor-graph construction.

    Users are admitted in index order with equal-split powers
    p_max[j]/N. While j*N <= K the j-th user takes the first pool column
    disjoint from all chosen supports; afterwards it takes the remaining
    column with the largest ee_increment (ties favor the earlier pool
    position). Chosen columns leave the working pool. The input pool is
    not mutated.

    Returns the FactorGraph, or (FactorGraph, evaluation_count) when
    return_eval_count is set.
    """
    K, J, N = params.num_subcarriers, params.num_users, params.codeword_sparsity
    if len(pool) < J:
        raise AssignmentInfeasibleError(
            f"pool has {len(pool)} columns, {J} users need one each"
        )
    if pool.columns.shape[1] != K or int(pool.columns[0].sum()) != N:
        raise ValueError("pool columns do not match the system's (K, N)")
    gain2 = np.asarray(getattr(H, "gain2", H), dtype=float)
    remaining = [pool.columns[i] for i in range(len(pool))]
    chosen, power_rows = [], []
    used = np.zeros(K, dtype=np.int64)
    evals = 0
    for j in range(J):
        row = np.zeros(K)
        if (j + 1) * N <= K:
            pick = None
            for i, col in enumerate(remaining):
                if not np.any(col * used):
                    pick = i
                    break
            if pick is None:
                raise AssignmentInfeasibleError(
                    f"orthogonal phase, user {j}: no pool column disjoint "
                    f"from the {int(used.sum())} occupied subcarriers"
                )
        else:
            best_ee, pick = -np.inf, None
            for i, col in enumerate(remaining):
                trial_row = col * (params.max_power_per_user[j] / N)
                ee = _prefix_ee(
                    chosen + [col], power_rows + [trial_row], gain2, params
                )
                evals += 1
                if ee > best_ee:
                    best_ee, pick = ee, i
        col = remaining.pop(pick)
        used += col
        chosen.append(col)
        power_rows.append(col * (params.max_power_per_user[j] / N))
    F = FactorGraph(entries=np.stack(chosen, axis=1))
    if return_eval_count:
        return F, evals
    return F


def random_assignment(params: SystemParams, rng_seed: int) -> FactorGraph:
    """J distinct columns sampled uniformly without replacement from the
    full candidate universe."""
    universe = enumerate_candidates(
        params.num_subcarriers, params.codeword_sparsity
    ).columns
    rng = np.random.default_rng(rng_seed)
    idx = rng.choice(len(universe), size=params.num_users, replace=False)
    return FactorGraph(entries=universe[idx].T)


_FIXED_4x6 = np.array(
    [
        [1, 1, 1, 0, 0, 0],
        [1, 0, 0, 1, 1, 0],
        [0, 1, 0, 1, 0, 1],
        [0, 0, 1, 0, 1, 1],
    ]
)


def fixed_assignment(params: SystemParams) -> FactorGraph:
    """The standard 4x6 SCMA factor graph (every subcarrier carries
    exactly 3 users); defined only for K=4, N=2, J=6."""
    dims = (params.num_subcarriers, params.codeword_sparsity, params.num_users)
    if dims != (4, 2, 6):
        raise ValueError(
            f"fixed assignment is defined only for (K,N,J)=(4,2,6), "
            f"got {dims}; use random_assignment instead"
        )
    return FactorGraph(entries=_FIXED_4x6)


class ExhaustiveResult(NamedTuple):
    factor_graph: FactorGraph
    ee: float
    num_evaluated: int


def exhaustive_assignment(
    H, params: SystemParams, cap: int = 10**6
) -> ExhaustiveResult:
    """Best factor graph over every injective user-to-column assignment.

    Evaluates energy efficiency under equal-split powers for all
    count_factor_graphs(K, N, J) assignments; ties break toward the
    lexicographically smallest column-index tuple. Refuses search spaces
    larger than cap.
    """
    K, J, N = params.num_subcarriers, params.num_users, params.codeword_sparsity
    total = count_factor_graphs(K, N, J)
    if total > cap:
        raise SearchSpaceCapError(
            f"{total} assignments exceed the cap of {cap}; raise cap to force"
        )
    universe = enumerate_candidates(K, N).columns
    gain2 = np.asarray(getattr(H, "gain2", H), dtype=float)
    perms = np.array(
        list(itertools.permutations(range(len(universe)), J)), dtype=np.int64
    )
    split = params.max_power_per_user / N
    # contrib[j, c, k]: user j's received power on k if given column c
    contrib = split[:, None, None] * gain2[:, None, :] * universe[None, :, :]
    agg = contrib[np.arange(J)[None, :], perms, :].sum(axis=1)
    rates = np.log2(1.0 + agg / params.noise_power).sum(axis=1)
    consumed = float(params.max_power_per_user.sum()) + J * params.circuit_power
    ees = rates / consumed
    best = int(np.argmax(ees))
    F = FactorGraph(entries=universe[perms[best]].T)
    return ExhaustiveResult(factor_graph=F, ee=float(ees[best]), num_evaluated=total)
