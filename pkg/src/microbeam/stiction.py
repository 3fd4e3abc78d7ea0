"""Substrate contact tracking and the permanent-stiction state machine.

Per-node gaps against the substrate drive a three-level status: Free, a
near-contact warning band, and absorbing Stuck once any node touches.
Sticking pins the node's deflection DOF at the substrate level; recovery is
only possible through the session-level reset.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import FullyConstrainedError, InvalidConfigError


@dataclass(frozen=True)
class SubstrateConfig:
    """Substrate below the beam: initial gap and the warning threshold fraction."""

    initial_gap: float
    warn_fraction: float = 0.1

    def __post_init__(self):
        if not (math.isfinite(self.initial_gap) and self.initial_gap > 0.0):
            raise InvalidConfigError("initial_gap must be finite and positive")
        if not 0.0 < self.warn_fraction < 1.0:
            raise InvalidConfigError("warn_fraction must lie in (0, 1)")


class StictionState(enum.IntEnum):
    # ordered by severity; update_stiction is monotone in this ordering
    FREE = 0
    NEAR_CONTACT = 1
    STUCK = 2


@dataclass(frozen=True)
class StictionStatus:
    """Current contact status; ``nodes`` are warning or stuck nodes by state."""

    state: StictionState = StictionState.FREE
    nodes: frozenset = frozenset()
    stick_time: float | None = None

    @classmethod
    def free(cls):
        return cls()

    @property
    def is_stuck(self):
        return self.state is StictionState.STUCK


class SurfaceForceModel:
    """Per-node attractive surface force as a function of the node gaps.

    The default implementation contributes nothing; subclasses may model
    short-range attraction. Returned forces must be finite and directed
    toward the substrate (non-positive in the deflection axis).
    """

    def per_node_force(self, gaps):
        return np.zeros_like(gaps)


class NullSurfaceForce(SurfaceForceModel):
    """Shipped default: no surface force."""


@dataclass(frozen=True)
class GapProfile:
    """Clamped per-node gaps plus the contact (penetration) flags."""

    gaps: np.ndarray
    contact: np.ndarray


def evaluate_gaps(state, config, substrate):
    """Per-node gap g0 + w_i (deflection negative toward the substrate).

    Penetrating nodes report gap 0 with the contact flag set.
    """
    raw = substrate.initial_gap + state.deflections()
    contact = raw <= 0.0
    return GapProfile(gaps=np.maximum(raw, 0.0), contact=contact)


def update_stiction(status, profile, substrate, time=0.0):
    """Advance the status from a gap profile; Stuck is absorbing.

    Severity ordering Free < NearContact < Stuck is monotone in the gaps:
    shrinking any gap can only raise the severity.
    """
    touching = frozenset(np.flatnonzero(profile.contact).tolist())
    if status.state is StictionState.STUCK:
        return StictionStatus(StictionState.STUCK, status.nodes | touching,
                              status.stick_time)
    if touching:
        return StictionStatus(StictionState.STUCK, touching, time)
    warn_level = substrate.warn_fraction * substrate.initial_gap
    near = frozenset(np.flatnonzero(profile.gaps < warn_level).tolist())
    if near:
        return StictionStatus(StictionState.NEAR_CONTACT, near, None)
    return StictionStatus.free()


def apply_stuck_constraints(matrices, stuck_nodes, substrate):
    """Pin the deflection DOF of each stuck node at the substrate level.

    Rotations stay free. Nodes whose deflection DOF is already constrained
    (clamped supports) are left untouched. Raises if nothing would remain
    solvable.
    """
    if not stuck_nodes:
        return matrices
    extra = tuple((2 * int(node), -substrate.initial_gap) for node in sorted(stuck_nodes))
    constrained = matrices.with_constraints(extra)
    if constrained.free_dofs.size == 0:
        raise FullyConstrainedError("every DOF is constrained after sticking")
    return constrained
