"""Open-circuit potential tables with charge/discharge hysteresis.

Curves are data, not formulas.  The repo ships synthetic LFP-shaped
positive tables (exactly flat plateau between the two-phase stoichiometric
edges, smooth tails) and a graphite-shaped negative table; any two-column
CSV (theta, volts) with a header row can be substituted.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import CsespmError, ParameterError
from .params import CellParameters

log = logging.getLogger(__name__)


class OcpDomainError(CsespmError, ValueError):
    """Stoichiometry outside [0, 1]."""


@dataclass
class OcpTable:
    """Sampled OCP curve U(theta) for one electrode and direction."""

    electrode: str              # 'neg' | 'pos'
    direction: str              # 'ch' | 'dis' | 'shared'
    theta: np.ndarray
    volts: np.ndarray
    _pchip: PchipInterpolator | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.volts = np.asarray(self.volts, dtype=float)
        if self.theta.ndim != 1 or self.theta.shape != self.volts.shape:
            raise ParameterError("theta and volts must be matching 1-D arrays")
        if not np.all(np.diff(self.theta) > 0.0):
            raise ParameterError("theta samples must be strictly increasing")
        if not np.isfinite(self.volts).all():
            raise ParameterError("OCP values must be finite")

    def __call__(self, theta: float, smooth: bool = False) -> float:
        """Piecewise-linear interpolation (monotone cubic when smooth=True).

        Constant extrapolation at the table ends, with a logged warning.
        """
        if not 0.0 <= theta <= 1.0:
            raise OcpDomainError(f"theta={theta!r} outside [0, 1]")
        if theta < self.theta[0] or theta > self.theta[-1]:
            log.warning("OCP extrapolated at theta=%.4f (%s/%s table covers [%.3f, %.3f])",
                        theta, self.electrode, self.direction, self.theta[0], self.theta[-1])
            theta = min(max(theta, self.theta[0]), self.theta[-1])
        if smooth:
            if self._pchip is None:
                self._pchip = PchipInterpolator(self.theta, self.volts, extrapolate=False)
            return float(self._pchip(theta))
        return float(np.interp(theta, self.theta, self.volts))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "volts"])
            for t, u in zip(self.theta, self.volts):
                w.writerow([f"{t:.10g}", f"{u:.10g}"])

    @classmethod
    def from_csv(cls, path, electrode: str, direction: str) -> "OcpTable":
        text = Path(path).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip().lower() for c in rows[0][:2]] != ["theta", "volts"]:
            raise ParameterError(f"{path}: expected header 'theta,volts'")
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r], dtype=float)
        return cls(electrode, direction, data[:, 0], data[:, 1])


@dataclass
class OcpSet:
    """Negative table plus the two positive hysteresis branches."""

    neg: OcpTable
    pos_ch: OcpTable
    pos_dis: OcpTable

    def pick(self, electrode: str, direction: str) -> OcpTable:
        if electrode == "neg":
            return self.neg
        return self.pos_ch if direction == "ch" else self.pos_dis


def synthetic_positive_table(params: CellParameters, direction: str,
                             n: int = 241) -> OcpTable:
    """LFP-shaped curve: exactly flat plateau on [theta_alpha, theta_beta],
    logarithmic tails outside.  Plateau levels differ per direction
    (hysteresis)."""
    a = params.theta("pos", "alpha", direction)
    b = params.theta("pos", "beta", direction)
    plateau = 3.452 if direction == "ch" else 3.425
    s_left, w_left = 0.053, 0.015
    s_right, w_right = 0.260, 0.020
    theta = np.unique(np.concatenate([np.linspace(0.0, 1.0, n), [a, b]]))
    u = np.full_like(theta, plateau)
    left = theta < a
    right = theta > b
    u[left] += s_left * np.log1p((a - theta[left]) / w_left)
    u[right] -= s_right * np.log1p((theta[right] - b) / w_right)
    return OcpTable("pos", direction, theta, u)


def synthetic_negative_table(n: int = 201) -> OcpTable:
    """Graphite-shaped curve (steep rise at low theta, staged plateaus)."""
    theta = np.linspace(0.0, 1.0, n)
    t = np.clip(theta, 1e-6, 1.0)
    u = (0.6379 + 0.5416 * np.exp(-305.5309 * t)
         + 0.044 * np.tanh(-(t - 0.1958) / 0.1088)
         - 0.1978 * np.tanh((t - 1.0571) / 0.0854)
         - 0.6875 * np.tanh((t + 0.0117) / 0.0529)
         - 0.0175 * np.tanh((t - 0.5692) / 0.0875))
    return OcpTable("neg", "shared", theta, u)


def synthetic_ocp_set(params: CellParameters) -> OcpSet:
    return OcpSet(neg=synthetic_negative_table(),
                  pos_ch=synthetic_positive_table(params, "ch"),
                  pos_dis=synthetic_positive_table(params, "dis"))
