"""Rate, power, and energy-efficiency evaluators.

Two sum-rate models are provided. The exact model treats co-subcarrier
users as interference:

    R[j,k] = log2(1 + f[j,k] p[j,k] g2[j,k] / (sigma2 + sum_{t!=j} f[t,k] p[t,k] g2[t,k]))

The MAC model is the uplink multiple-access sum capacity per subcarrier:

    R_mac = sum_k log2(1 + sum_j f[j,k] p[j,k] g2[j,k] / sigma2)

The MAC model upper-bounds the exact one and is the objective both
optimizers maximize; results report both. All rates are in bits/s/Hz.
"""

from __future__ import annotations

import warnings

import numpy as np

from .model import SystemParams


def _arrays(F, P, H):
    """Pull (mask J x K, p J x K, gain2 J x K) from wrappers or raw arrays."""
    f = np.asarray(getattr(F, "entries", F))
    p = np.asarray(getattr(P, "p", P), dtype=float)
    g2 = np.asarray(getattr(H, "gain2", H), dtype=float)
    return f.T.astype(float), p, g2


def received_power(F, P, H) -> np.ndarray:
    """Per-subcarrier aggregate received power sum_j f[j,k] p[j,k] g2[j,k]."""
    mask, p, g2 = _arrays(F, P, H)
    return (mask * p * g2).sum(axis=0)


def per_user_rate(j: int, k: int, F, P, H, params: SystemParams) -> float:
    """Rate of user j on subcarrier k under the interference model; 0 when
    user j is not assigned to k."""
    mask, p, g2 = _arrays(F, P, H)
    if mask[j, k] == 0:
        return 0.0
    received = mask[:, k] * p[:, k] * g2[:, k]
    own = received[j]
    # clamp: the subtraction can leave negative rounding dust when one
    # user dominates the subcarrier
    interference = max(0.0, received.sum() - own)
    return float(np.log2(1.0 + own / (params.noise_power + interference)))


def subcarrier_rate(k: int, F, P, H, params: SystemParams) -> float:
    """Sum of all assigned users' rates on subcarrier k (exact model)."""
    mask, p, g2 = _arrays(F, P, H)
    received = mask[:, k] * p[:, k] * g2[:, k]
    total = received.sum()
    interference = np.maximum(0.0, total - received)
    rates = np.log2(1.0 + received / (params.noise_power + interference))
    return float(rates.sum())


def sum_rate_exact(F, P, H, params: SystemParams) -> float:
    """Network sum rate under the interference model (double sum of
    per-user rates)."""
    mask, p, g2 = _arrays(F, P, H)
    received = mask * p * g2
    totals = received.sum(axis=0, keepdims=True)
    interference = np.maximum(0.0, totals - received)
    rates = np.log2(1.0 + received / (params.noise_power + interference))
    return float(rates.sum())


def sum_rate_mac(F, P, H, params: SystemParams) -> float:
    """Uplink MAC sum capacity; the optimization objective."""
    mask, p, g2 = _arrays(F, P, H)
    agg = (mask * p * g2).sum(axis=0)
    return float(np.log2(1.0 + agg / params.noise_power).sum())


def total_power(F, P, params: SystemParams) -> float:
    """Total consumed power: masked transmit power plus J times the
    per-user circuit power."""
    f = np.asarray(getattr(F, "entries", F))
    p = np.asarray(getattr(P, "p", P), dtype=float)
    return float((f.T * p).sum() + params.num_users * params.circuit_power)


def energy_efficiency(
    F, P, H, params: SystemParams, rate_model: str = "mac"
) -> float:
    """Sum rate divided by total consumed power, in bits/s/Hz per watt.

    rate_model selects 'mac' (default, the optimization objective) or
    'exact'. The degenerate all-zero-power, zero-circuit-power case is
    defined as 0 and flagged with a warning.
    """
    if rate_model == "mac":
        rate = sum_rate_mac(F, P, H, params)
    elif rate_model == "exact":
        rate = sum_rate_exact(F, P, H, params)
    else:
        raise ValueError(f"unknown rate model {rate_model!r}")
    consumed = total_power(F, P, params)
    if consumed <= 0.0:
        warnings.warn(
            "zero total power (no transmit power and zero circuit power); "
            "energy efficiency defined as 0",
            RuntimeWarning,
            stacklevel=2,
        )
        return 0.0
    return rate / consumed
