"""State containers for the coupled cell model."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

ONE_PHASE_ALPHA = "one_phase_alpha"
ONE_PHASE_BETA = "one_phase_beta"
TWO_PHASE = "two_phase"


@dataclass
class FullState:
    """Composite cell state.

    ``pos`` holds CV averages over the whole positive particle in one-phase
    and over the shell only in two-phase.  ``r_p`` is the core-shell
    interface radius (0 in one-phase).  ``core_conc`` is the uniform core
    concentration, fixed at two-phase entry.  ``direction`` is the sign of
    the last nonzero current ('dis' for I > 0) and selects the hysteresis
    branch of OCP curves and stoichiometric windows.
    """

    neg: np.ndarray
    pos: np.ndarray
    elec: np.ndarray
    regime: str = ONE_PHASE_ALPHA
    r_p: float = 0.0
    core_conc: float = float("nan")
    core_phase: str | None = None   # 'alpha' or 'beta' while two-phase
    direction: str = "dis"

    def copy(self) -> "FullState":
        return replace(self, neg=self.neg.copy(), pos=self.pos.copy(),
                       elec=self.elec.copy())

    @property
    def two_phase(self) -> bool:
        return self.regime == TWO_PHASE

    def is_finite(self) -> bool:
        return (np.isfinite(self.neg).all() and np.isfinite(self.pos).all()
                and np.isfinite(self.elec).all() and np.isfinite(self.r_p))


@dataclass
class TransitionEvent:
    """Logged regime change with its mass audit."""

    time: float
    kind: str                      # 'enter_two_phase' | 'exit_two_phase' | 'sign_flip'
    pre_mass: float                # positive-electrode lithium before [mol]
    post_mass: float               # and after [mol]
    r_p_pre: float
    r_p_post: float
    detail: dict = field(default_factory=dict)

    @property
    def mass_error_rel(self) -> float:
        scale = max(abs(self.pre_mass), 1e-300)
        return abs(self.post_mass - self.pre_mass) / scale
