"""Channel realization generator and distance scenarios.

Squared channel magnitudes follow Rayleigh small-scale fading times
distance path loss:

    gain2[j,k] = |g[j,k]|^2 * d[j]^(-alpha)

with |g|^2 i.i.d. unit-mean exponential across users and subcarriers
(frequency-selective fading). Scenarios pin the user distances: an
equal-distance ring, two fixed six-user layouts with identical 85 m mean
distance but different spreads, and uniform placement over a disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import ChannelState, SystemParams

# Users placed randomly are kept at least this far from the receiver to
# avoid unbounded path-loss gains.
MIN_DISTANCE_M = 1.0


@dataclass(frozen=True)
class Scenario:
    """A named user-placement recipe.

    placement 'fixed_distances' uses the distances tuple verbatim;
    'uniform_disk' draws fresh distances per realization, uniform over the
    disk area of cell_radius_m (density proportional to radius).
    """

    name: str
    distances: Optional[tuple]
    pathloss_exponent: float = 3.67
    cell_radius_m: float = 100.0
    placement: str = "fixed_distances"

    def __post_init__(self):
        if self.placement not in ("fixed_distances", "uniform_disk"):
            raise ValueError(f"unknown placement {self.placement!r}")
        if self.placement == "fixed_distances":
            if self.distances is None:
                raise ValueError("fixed_distances placement needs distances")
            d = np.asarray(self.distances, dtype=float)
            if np.any(d <= 0) or np.any(d > self.cell_radius_m):
                raise ValueError("distances must lie in (0, cell_radius_m]")
            object.__setattr__(self, "distances", tuple(float(x) for x in d))
        if not (self.pathloss_exponent > 0):
            raise ValueError("pathloss_exponent must be > 0")
        if not (self.cell_radius_m > 0):
            raise ValueError("cell_radius_m must be > 0")


def scenario_presets() -> list:
    """The four built-in scenarios.

    cond1 and cond2 share an 85 m mean user distance; cond1 spreads users
    more widely. fig1_equal puts every user at 100 m.
    """
    return [
        Scenario(name="fig1_equal", distances=(100.0,) * 6),
        Scenario(name="cond1", distances=(55.0, 68.0, 89.0, 99.0, 99.0, 100.0)),
        Scenario(name="cond2", distances=(77.0, 80.0, 81.0, 90.0, 91.0, 91.0)),
        Scenario(name="uniform", distances=None, placement="uniform_disk"),
    ]


def scenario_by_name(name: str) -> Scenario:
    for s in scenario_presets():
        if s.name == name:
            return s
    known = ", ".join(s.name for s in scenario_presets())
    raise KeyError(f"unknown scenario {name!r} (known: {known})")


def generate_channel(
    scenario: Scenario, params: SystemParams, rng_seed: int
) -> ChannelState:
    """Draw one channel realization. Deterministic under rng_seed.

    Distances are drawn first (uniform_disk only), then the J x K fading
    block, so the realization is bit-stable for a given (scenario, seed).
    """
    J, K = params.num_users, params.num_subcarriers
    rng = np.random.default_rng(rng_seed)
    if scenario.placement == "uniform_disk":
        radii = scenario.cell_radius_m * np.sqrt(rng.uniform(0.0, 1.0, size=J))
        d = np.maximum(radii, MIN_DISTANCE_M)
    else:
        d = np.asarray(scenario.distances, dtype=float)
        if d.shape != (J,):
            raise ValueError(
                f"scenario {scenario.name!r} pins {d.shape[0]} users, "
                f"params expect {J}"
            )
    fading2 = rng.exponential(1.0, size=(J, K))
    gain2 = fading2 * d[:, None] ** (-scenario.pathloss_exponent)
    return ChannelState(
        gain2=gain2, distances=d, pathloss_exponent=scenario.pathloss_exponent
    )


def noise_power_from_density(density_dbm_per_hz: float, bandwidth_hz: float) -> float:
    """Noise power in watts from a spectral density in dBm/Hz and a
    bandwidth in Hz."""
    if not (bandwidth_hz > 0):
        raise ValueError("bandwidth_hz must be > 0")
    dbm = density_dbm_per_hz + 10.0 * math.log10(bandwidth_hz)
    return 10.0 ** ((dbm - 30.0) / 10.0)
