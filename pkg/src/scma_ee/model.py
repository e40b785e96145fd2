"""Core domain types for the uplink SCMA energy-efficiency toolkit.

The network multiplexes J users onto K subcarriers. Each user occupies
exactly N subcarriers, encoded by a K x J binary factor graph matrix F.
Transmit powers live in a J x K matrix with support inside F. These types
carry the constraint set:

    C1: every column of F sums to N
    C2: F is binary
    C3: no two columns of F are identical
    C4: sum_k p[j,k] <= p_max[j]  (per-user budget)
    C5: p[j,k] >= 0
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

# Absolute slack on the per-user power budget (C4); subgradient iterates
# can overshoot by floating-point epsilon.
POWER_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SystemParams:
    """Dimensions and physical constants of the network.

    max_power_per_user may be a scalar (shared budget) or a length-J
    sequence of per-user budgets in watts. Rates are computed per unit
    bandwidth; subcarrier_bandwidth_hz is carried only for reporting.
    """

    num_subcarriers: int
    num_users: int
    codeword_sparsity: int
    noise_power: float
    circuit_power: float
    max_power_per_user: np.ndarray
    subcarrier_bandwidth_hz: float = 180e3

    def __post_init__(self):
        K, J, N = self.num_subcarriers, self.num_users, self.codeword_sparsity
        if K < 1 or J < 1 or N < 1:
            raise ValueError("K, J, N must all be positive integers")
        if N > K:
            raise ValueError(f"codeword sparsity N={N} exceeds K={K} subcarriers")
        if J > math.comb(K, N):
            raise ValueError(
                f"J={J} users cannot receive distinct {N}-of-{K} codewords "
                f"(only C({K},{N})={math.comb(K, N)} exist)"
            )
        if not (self.noise_power > 0):
            raise ValueError("noise_power must be > 0 watts")
        if self.circuit_power < 0:
            raise ValueError("circuit_power must be >= 0 watts")
        if not (self.subcarrier_bandwidth_hz > 0):
            raise ValueError("subcarrier_bandwidth_hz must be > 0")
        pmax = np.asarray(self.max_power_per_user, dtype=float)
        if pmax.ndim == 0:
            pmax = np.full(J, float(pmax))
        if pmax.shape != (J,):
            raise ValueError(f"max_power_per_user must be scalar or length {J}")
        if not np.all(pmax > 0):
            raise ValueError("every per-user power budget must be > 0 watts")
        object.__setattr__(self, "max_power_per_user", _readonly(pmax))


@dataclass(frozen=True, eq=False)
class FactorGraph:
    """K x J binary subcarrier-to-user assignment matrix.

    entries[k, j] = 1 iff user j transmits on subcarrier k. The constructor
    enforces shape and binaryness (C2); the N-sparsity (C1) and column
    distinctness (C3) are checked against a SystemParams by
    validate_factor_graph, so partially built or deliberately invalid
    matrices can still be represented and diagnosed.
    """

    entries: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.entries)
        if f.ndim != 2:
            raise ValueError("factor graph must be a 2-D matrix")
        if not np.isin(f, (0, 1)).all():
            raise ValueError("factor graph entries must be 0 or 1")
        object.__setattr__(self, "entries", _readonly(f.astype(np.int64)))

    @property
    def num_subcarriers(self) -> int:
        return self.entries.shape[0]

    @property
    def num_users(self) -> int:
        return self.entries.shape[1]

    def user_mask(self) -> np.ndarray:
        """J x K float mask (transpose of entries), handy for row-wise math."""
        return self.entries.T.astype(float)

    def __array__(self, dtype=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True, eq=False)
class ChannelState:
    """Squared channel magnitudes |h[j,k]|^2 for each user/subcarrier pair.

    gain2 combines small-scale fading and distance path loss d^(-alpha).
    """

    gain2: np.ndarray
    distances: np.ndarray
    pathloss_exponent: float

    def __post_init__(self):
        g = np.asarray(self.gain2, dtype=float)
        d = np.asarray(self.distances, dtype=float)
        if g.ndim != 2:
            raise ValueError("gain2 must be a J x K matrix")
        if d.shape != (g.shape[0],):
            raise ValueError("distances must have one entry per user")
        if not np.all(np.isfinite(g)):
            raise ValueError("channel gains must be finite")
        if np.any(g < 0):
            raise ValueError("squared channel gains must be >= 0")
        if np.any(d <= 0):
            raise ValueError("user distances must be > 0")
        if not (self.pathloss_exponent > 0):
            raise ValueError("pathloss_exponent must be > 0")
        object.__setattr__(self, "gain2", _readonly(g))
        object.__setattr__(self, "distances", _readonly(d))

    @property
    def num_users(self) -> int:
        return self.gain2.shape[0]

    @property
    def num_subcarriers(self) -> int:
        return self.gain2.shape[1]


@dataclass(frozen=True, eq=False)
class PowerMatrix:
    """J x K nonnegative transmit powers in watts.

    The constructor enforces nonnegativity and finiteness (C5); support
    containment in a factor graph and row budgets (C4) are checked by
    validate_power.
    """

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2:
            raise ValueError("power matrix must be 2-D (users x subcarriers)")
        if not np.all(np.isfinite(p)):
            raise ValueError("powers must be finite")
        if np.any(p < 0):
            raise ValueError("powers must be >= 0 watts")
        object.__setattr__(self, "p", _readonly(p))

    @property
    def num_users(self) -> int:
        return self.p.shape[0]

    @property
    def num_subcarriers(self) -> int:
        return self.p.shape[1]

    def row_sums(self) -> np.ndarray:
        return self.p.sum(axis=1)

    def __array__(self, dtype=None):
        return np.asarray(self.p, dtype=dtype)


@dataclass(frozen=True)
class TraceEntry:
    """One outer iteration of the fractional-programming solver."""

    t: int
    omega: float
    aux: float


@dataclass(frozen=True, eq=False)
class AllocationResult:
    """Outcome of a power-allocation run.

    ee is the achieved energy efficiency (bits/s/Hz per watt) and always
    equals sum_rate / total_power of the returned power matrix. The trace
    records (iteration, omega, auxiliary value) per outer iteration; omega
    is non-decreasing by construction of the solver.
    """

    ee: float
    sum_rate: float
    total_power: float
    power: PowerMatrix
    multipliers: np.ndarray
    dinkelbach_trace: tuple
    converged: bool

    def __post_init__(self):
        lam = np.asarray(self.multipliers, dtype=float)
        if np.any(lam < 0):
            raise ValueError("multipliers must be >= 0")
        object.__setattr__(self, "multipliers", _readonly(lam))
        object.__setattr__(self, "dinkelbach_trace", tuple(self.dinkelbach_trace))
        if self.total_power <= 0:
            raise ValueError("total power must be > 0")
        if abs(self.ee - self.sum_rate / self.total_power) > 1e-9 * max(
            1.0, abs(self.ee)
        ):
            raise ValueError("ee must equal sum_rate / total_power")
        omegas = [e.omega for e in self.dinkelbach_trace]
        if any(b < a for a, b in zip(omegas, omegas[1:])):
            raise ValueError("omega trace must be non-decreasing")


@dataclass(frozen=True)
class ValidationResult:
    """Verdict of a constraint check.

    ok is True when every constraint holds; otherwise constraint names the
    first violated one (C1..C5 or 'support') and index the offending
    column/user.
    """

    ok: bool
    constraint: Optional[str] = None
    index: Optional[int] = None
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _entries(obj, attr: str) -> np.ndarray:
    arr = getattr(obj, attr, obj)
    return np.asarray(arr)


def validate_factor_graph(F, params: SystemParams) -> ValidationResult:
    """Check C1 (column sums = N), C2 (binary), C3 (distinct columns).

    Accepts a FactorGraph or a raw array. Dimension mismatch against params
    raises ValueError; constraint violations are reported in the verdict,
    first violation wins.
    """
    f = _entries(F, "entries")
    K, J = params.num_subcarriers, params.num_users
    if f.shape != (K, J):
        raise ValueError(f"factor graph shape {f.shape} does not match ({K}, {J})")
    for j in range(J):
        col = f[:, j]
        if not np.isin(col, (0, 1)).all():
            return ValidationResult(
                False, "C2", j, f"column {j} has non-binary entries"
            )
        s = int(col.sum())
        if s != params.codeword_sparsity:
            return ValidationResult(
                False,
                "C1",
                j,
                f"column {j} sums to {s}, expected N={params.codeword_sparsity}",
            )
    for j in range(J):
        for i in range(j + 1, J):
            if np.array_equal(f[:, j], f[:, i]):
                return ValidationResult(
                    False, "C3", i, f"columns {j} and {i} are identical"
                )
    return ValidationResult(True)


def validate_power(P, F, params: SystemParams) -> ValidationResult:
    """Check support containment in F, row budgets (C4), nonnegativity (C5).

    Accepts PowerMatrix/FactorGraph or raw arrays. Dimension mismatch raises
    ValueError; violations are reported with the offending user index.
    """
    p = np.asarray(_entries(P, "p"), dtype=float)
    f = _entries(F, "entries")
    K, J = params.num_subcarriers, params.num_users
    if p.shape != (J, K):
        raise ValueError(f"power matrix shape {p.shape} does not match ({J}, {K})")
    if f.shape != (K, J):
        raise ValueError(f"factor graph shape {f.shape} does not match ({K}, {J})")
    for j in range(J):
        if np.any(p[j] < 0):
            return ValidationResult(False, "C5", j, f"user {j} has negative power")
        if np.any((p[j] > 0) & (f[:, j] == 0)):
            return ValidationResult(
                False,
                "support",
                j,
                f"user {j} has power on a subcarrier outside its assignment",
            )
        budget = params.max_power_per_user[j]
        total = float(p[j].sum())
        if total > budget + POWER_TOL:
            return ValidationResult(
                False,
                "C4",
                j,
                f"user {j} transmit power {total!r} W exceeds budget {budget!r} W",
            )
    return ValidationResult(True)
