"""Tolerance profiles.

The active profile is chosen with the ``REFLECTIONLESS_PROFILE`` environment
variable (``default``, ``fast`` or ``strict``).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

ENV_VAR = "REFLECTIONLESS_PROFILE"


@dataclass(frozen=True)
class Profile:
    nodes_per_band: int = 256
    # y ladder for numeric y -> 0+ limits (oracles only)
    y_ladder: tuple[float, ...] = (1e-4, 1e-5, 1e-6)
    snap_threshold: float = 0.02
    xi_sample_y: float = 1e-5
    window: int = 400
    edge_margin: int = 50
    disjoint_tol: float = 1e-12
    min_separation: float = 1e-9
    lanczos_breakdown: float = 1e-12
    depth_ratio: int = 10  # depth <= nodes / depth_ratio


PROFILES = {
    "default": Profile(),
    "fast": Profile(nodes_per_band=128, window=200),
    "strict": Profile(nodes_per_band=1024, window=800, edge_margin=100),
}


def get_profile(name: str | None = None, **overrides) -> Profile:
    name = name or os.environ.get(ENV_VAR, "default")
    try:
        prof = PROFILES[name]
    except KeyError:
        raise KeyError(f"unknown tolerance profile {name!r}; choose from {sorted(PROFILES)}") from None
    return replace(prof, **overrides) if overrides else prof
