"""Parameter identification against voltage-vs-time data.

Two-stage protocol: the full 22-entry vector (stoichiometric windows for
both directions plus geometry/transport/kinetics) is fitted on C/4 charge
and discharge data; afterwards only the rate-dependent 4-entry subset
(solid diffusivities and reaction rate constants) is refitted per C-rate.

The optimizer is a seeded particle-swarm search with reflection at the
bounds; scale-like parameters are searched in log space.  Objective
evaluations are full simulations, so budgets are counted in evaluations.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BlowupError, ConfigError, ParameterError
from .ocp import OcpSet, synthetic_ocp_set
from .params import CellParameters, DiscretizationConfig, params_for_rate
from .simulate import LoadProfile, SolverConfig, cc_profile, initial_state, simulate

PENALTY_RMSE = 10.0   # volts; returned when a candidate cannot be simulated

# the 22-entry C/4 vector: stoichiometric windows for both directions, then
# geometry, transport and kinetics
LAMBDA_C4 = (
    "theta_p_100_ch", "theta_p_0_ch", "theta_n_100_ch", "theta_n_0_ch",
    "theta_p_alpha_ch", "theta_p_beta_ch",
    "theta_p_100_dis", "theta_p_0_dis", "theta_n_100_dis", "theta_n_0_dis",
    "theta_p_alpha_dis", "theta_p_beta_dis",
    "R_s_p", "R_s_n", "D_s_p", "D_s_n", "eps_p", "eps_n",
    "k_p", "k_n", "A_cell", "R_l",
)

# rate-dependent subset refitted on C/2 and 1C data
LAMBDA_C2_1C = ("D_s_p", "D_s_n", "k_p", "k_n")

_LOG_SCALE = {"R_s_p", "R_s_n", "D_s_p", "D_s_n", "k_p", "k_n", "R_l"}


@dataclass(frozen=True)
class ParameterSubset:
    """Ordered parameter names with per-name (lo, hi) bounds."""

    names: tuple
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if len(self.names) != len(self.lower) or len(self.names) != len(self.upper):
            raise ParameterError("names and bounds must align")
        if not np.all(self.lower < self.upper):
            raise ParameterError("need lower < upper for every parameter")
        bad = [n for n in self.names if not hasattr(CellParameters(), n)]
        if bad:
            raise ParameterError(f"unknown parameter names: {bad}")

    @property
    def dim(self) -> int:
        return len(self.names)

    def log_mask(self) -> np.ndarray:
        return np.array([n in _LOG_SCALE for n in self.names])

    @classmethod
    def preset(cls, which: str, base: CellParameters,
               decades: float = 1.0) -> "ParameterSubset":
        """'c4' or 'c2-1c' preset around a base parameter set.

        Scale-like entries get +-``decades`` in log10; stoichiometric
        fractions get wide physical windows.
        """
        if which == "c4":
            names = LAMBDA_C4
        elif which == "c2-1c":
            names = LAMBDA_C2_1C
        else:
            raise ConfigError(f"unknown subset preset {which!r}")
        lo, hi = [], []
        for n in names:
            v = getattr(base, n)
            if n in _LOG_SCALE:
                lo.append(v * 10.0**(-decades))
                hi.append(v * 10.0**(decades))
            elif n.startswith("theta"):
                lo.append(max(0.25 * v, 1e-3))
                hi.append(min(2.0 * v, 0.999))
            elif n.startswith("eps"):
                lo.append(0.5 * v)
                hi.append(min(1.5 * v, 0.99))
            else:
                lo.append(0.5 * v)
                hi.append(1.5 * v)
        return cls(tuple(names), np.asarray(lo), np.asarray(hi))

    def subset(self, names: tuple) -> "ParameterSubset":
        idx = [self.names.index(n) for n in names]
        return ParameterSubset(tuple(names), self.lower[idx], self.upper[idx])

    def apply(self, base: CellParameters, values: np.ndarray) -> CellParameters:
        return base.replace(**dict(zip(self.names, map(float, values))))


@dataclass
class Dataset:
    """A measured (or synthetic) voltage trace with its load profile."""

    profile: LoadProfile
    voltage: np.ndarray
    direction: str
    c_rate_label: str | None = None
    initial_soc: float | None = None
    name: str = ""

    def __post_init__(self):
        self.voltage = np.asarray(self.voltage, dtype=float)
        if self.voltage.shape != self.profile.times.shape:
            raise ParameterError("voltage and profile must share timestamps")
        if np.any(self.voltage < 1.5) or np.any(self.voltage > 4.0):
            raise ParameterError("voltages outside the physical 1.5-4.0 V window")

    @property
    def start_soc(self) -> float:
        if self.initial_soc is not None:
            return self.initial_soc
        return 0.0 if self.direction == "ch" else 1.0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "current_A", "voltage_V"])
            for t, i, v in zip(self.profile.times, self.profile.currents, self.voltage):
                w.writerow([f"{t:.10g}", f"{i:.10g}", f"{v:.10g}"])

    @classmethod
    def from_csv(cls, path, direction: str | None = None,
                 c_rate_label: str | None = None,
                 initial_soc: float | None = None) -> "Dataset":
        text = Path(path).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        want = ["time_s", "current_a", "voltage_v"]
        if not rows or [c.strip().lower() for c in rows[0][:3]] != want:
            raise ConfigError(f"{path}: expected header 'time_s,current_A,voltage_V'")
        data = np.array([[float(x) for x in r[:3]] for r in rows[1:] if r])
        if direction is None:
            direction = "dis" if np.mean(data[:, 1]) > 0 else "ch"
        return cls(LoadProfile(data[:, 0], data[:, 1]), data[:, 2], direction,
                   c_rate_label=c_rate_label, initial_soc=initial_soc,
                   name=str(path))


def voltage_rmse(params: CellParameters, dataset: Dataset,
                 disc: DiscretizationConfig, solver: SolverConfig,
                 ocp: OcpSet | None = None,
                 rate_overrides: dict | None = None) -> float:
    """Simulate the dataset's profile and compare voltages at its timestamps.

    Early cutoff or numerical blowup returns a large finite penalty so
    optimizers can keep moving.
    """
    p_run = params_for_rate(params, dataset.c_rate_label, rate_overrides)
    try:
        init = initial_state(p_run, disc, dataset.start_soc, dataset.direction)
        result = simulate(dataset.profile, init, p_run, disc, solver, ocp=ocp)
    except (BlowupError, ParameterError, ValueError):
        return PENALTY_RMSE
    if result.status != "completed" or result.time[-1] < dataset.profile.times[-1] - 0.5:
        return PENALTY_RMSE
    v_sim = np.interp(dataset.profile.times, result.time, result.voltage)
    return float(np.sqrt(np.mean((v_sim - dataset.voltage) ** 2)))


def make_synthetic_dataset(params: CellParameters, disc: DiscretizationConfig,
                           c_rate: float, direction: str,
                           duration: float | None = None, dt: float = 10.0,
                           noise_mv: float = 0.0, seed: int = 0,
                           c_rate_label: str | None = None,
                           solver: SolverConfig | None = None,
                           ocp: OcpSet | None = None) -> Dataset:
    """Simulator-generated voltage data, optionally with Gaussian noise."""
    solver = solver or SolverConfig(dt=dt, cutoffs_enabled=False)
    prof = cc_profile(params, c_rate, direction, duration)
    p_run = params_for_rate(params, c_rate_label, None)
    init = initial_state(p_run, disc, 0.0 if direction == "ch" else 1.0, direction)
    res = simulate(prof, init, p_run, disc, solver, ocp=ocp)
    volts = res.voltage.copy()
    if noise_mv > 0.0:
        volts = volts + 1e-3 * noise_mv * np.random.default_rng(seed).standard_normal(len(volts))
        volts = np.clip(volts, 1.51, 3.99)
    return Dataset(LoadProfile(res.time, res.current), volts, direction,
                   c_rate_label=c_rate_label,
                   name=f"synthetic {c_rate:g}C {direction}")


@dataclass
class FitResult:
    """Best candidate of one identification run."""

    subset: ParameterSubset
    best_values: np.ndarray
    best_params: CellParameters
    best_rmse: float
    n_evals: int
    seed: int
    trace: list = field(default_factory=list)   # (eval count, best-so-far RMSE)

    def to_dict(self) -> dict:
        return {
            "names": list(self.subset.names),
            "values": [float(v) for v in self.best_values],
            "rmse_V": self.best_rmse,
            "n_evals": self.n_evals,
            "seed": self.seed,
            "trace": [[int(k), float(v)] for k, v in self.trace],
        }


def identify(datasets: list[Dataset], subset: ParameterSubset,
             base: CellParameters, disc: DiscretizationConfig,
             solver: SolverConfig, seed: int = 0, budget: int = 500,
             ocp: OcpSet | None = None, swarm_size: int | None = None,
             rate_overrides: dict | None = None) -> FitResult:
    """Bounded particle-swarm minimization of the summed voltage RMSE.

    Deterministic given the seed.  The best-so-far trace is non-increasing
    and the returned RMSE re-evaluates to itself.
    """
    if not datasets:
        raise ConfigError("identify needs at least one dataset")
    if budget < 1:
        raise ConfigError("budget must be >= 1")
    ocp = ocp or synthetic_ocp_set(base)
    rng = np.random.default_rng(seed)
    d = subset.dim
    P = swarm_size or min(24, max(8, 4 + 2 * d))
    P = min(P, budget)

    logm = subset.log_mask()
    lo = np.where(logm, np.log10(subset.lower), subset.lower)
    hi = np.where(logm, np.log10(subset.upper), subset.upper)
    span = hi - lo

    def decode(z):
        x = lo + z * span
        return np.where(logm, 10.0**x, x)

    def objective(z):
        values = decode(z)
        try:
            cand = subset.apply(base, values)
        except ParameterError:
            return PENALTY_RMSE * len(datasets)
        return sum(voltage_rmse(cand, ds, disc, solver, ocp, rate_overrides)
                   for ds in datasets)

    # seed the swarm around the base point plus uniform cover
    z = rng.random((P, d))
    base_vals = np.array([getattr(base, n) for n in subset.names])
    base_z = (np.where(logm, np.log10(base_vals), base_vals) - lo) / span
    z[0] = np.clip(base_z, 0.0, 1.0)
    v = 0.1 * (rng.random((P, d)) - 0.5)

    pbest_z = z.copy()
    pbest_f = np.full(P, np.inf)
    gbest_z, gbest_f = None, np.inf
    trace = []
    n_evals = 0
    w, c1, c2 = 0.72, 1.49, 1.49

    while n_evals < budget:
        for k in range(P):
            if n_evals >= budget:
                break
            f = objective(z[k])
            n_evals += 1
            if f < pbest_f[k]:
                pbest_f[k] = f
                pbest_z[k] = z[k].copy()
            if f < gbest_f:
                gbest_f = f
                gbest_z = z[k].copy()
                trace.append((n_evals, gbest_f))
        if n_evals >= budget:
            break
        r1 = rng.random((P, d))
        r2 = rng.random((P, d))
        v = w * v + c1 * r1 * (pbest_z - z) + c2 * r2 * (gbest_z[None, :] - z)
        z = z + v
        # reflect at the bounds
        over = z > 1.0
        under = z < 0.0
        z[over] = 2.0 - z[over]
        z[under] = -z[under]
        z = np.clip(z, 0.0, 1.0)
        v[over | under] *= -0.5

    best_values = decode(gbest_z)
    best_params = subset.apply(base, best_values)
    return FitResult(subset=subset, best_values=best_values,
                     best_params=best_params, best_rmse=float(gbest_f),
                     n_evals=n_evals, seed=seed, trace=trace)
