"""Noisy measurements and the recursive estimators.

A measurement of the observable P against a packet pair is the quadratic
form (f_t|P f_t) plus one error sample.  Term j is recovered from the
rescaled measurement after subtracting the quadratic forms of the terms
already known:

  plain     value = N^(-lam_j m_j) [ N(f_N, f_N) - sum_{k<j} (f_N|Q_k f_N) ]
  averaged  value = (1/N) integral_N^{2N} of the same integrand in t,

with the averaged mode discretized by a midpoint rule whose node count
resolves the decorrelation scale of the packet overlaps (spacing in the
rescaled separation variable (s^lam - t^lam)/N stays below 1/resolution).
The noise over the nodes of one average is a single jointly sampled path;
that correlation is what makes the averaging effective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, NumericalError
from .noise_engine import build_kernel, sample_path
from .rng import child_seed
from .symbols import HomogeneousTerm, Observable, packet_quadratic_form
from .wave_packets import PacketProfile, WavePacketFamily

AVERAGE_RESOLUTION = 4.0
MIN_AVERAGE_NODES = 64
MAX_AVERAGE_NODES = 32768


@dataclass(frozen=True)
class MeasurementModel:
    """Ground truth observable plus the measurement setting."""

    observable: Observable
    beta: float
    x0: float
    xi0: float
    profile: PacketProfile

    def family_for(self, lam: float, x0: float | None = None) -> WavePacketFamily:
        return WavePacketFamily(
            self.x0 if x0 is None else float(x0), self.xi0, float(lam), self.profile
        )

    def truth(self, j: int, x0: float | None = None) -> complex:
        term = self.observable.terms[j - 1]
        return complex(term.eval(self.x0 if x0 is None else x0, self.xi0))


@dataclass(frozen=True)
class OrderPlan:
    """Recovery plan: mode split and packet growth rates per term.

    j_beta counts the plainly recoverable terms, k_beta the recoverable
    ones in total; orders below index k_beta are out of reach.
    """

    m_list: tuple
    beta: float
    j_beta: int
    k_beta: int
    lambdas: tuple
    modes: tuple

    def mode(self, j: int) -> str:
        return self.modes[j - 1]

    def lam(self, j: int) -> float:
        return self.lambdas[j - 1]


def plan_orders(
    m_list,
    beta: float,
    averaged_margin: float = 0.5,
    plain_margin: float = 0.0,
    lambda_overrides: dict | None = None,
) -> OrderPlan:
    """Indices, modes, and lambda choices for the recovery recursion.

    The bound for the last averaged term is strict, realized as bound
    plus ``averaged_margin``.  The bound for the last plain term admits
    equality and is taken at the bound unless ``plain_margin`` is set.
    """
    m = [float(v) for v in m_list]
    if any(b >= a for a, b in zip(m, m[1:])):
        raise ConfigError("measurement_recovery: orders must be strictly decreasing")
    if not m or m[0] <= 2.0 * beta - 0.5:
        raise ConfigError(
            "measurement_recovery: leading order must exceed 2*beta - 1/2"
        )

    k_beta = None
    for j in range(1, len(m)):
        if m[j] <= 2.0 * beta - 0.5:
            k_beta = j
            break
    if k_beta is None:
        raise ConfigError(
            "measurement_recovery: configured orders never drop to "
            "2*beta - 1/2, so the plan cannot terminate; extend the list"
        )

    j_beta = 0 if m[0] <= 2.0 * beta else None
    if j_beta is None:
        for j in range(1, len(m)):
            if m[j] <= 2.0 * beta:
                j_beta = j
                break

    lambdas = []
    modes = []
    for j in range(1, k_beta + 1):
        if j == j_beta:
            lam = max(1.0 / (m[j - 1] - 2.0 * beta), 2.0) + plain_margin
        elif j == k_beta:
            lam = max(1.0 / (m[j - 1] - 2.0 * beta + 0.5), 2.0) + averaged_margin
        else:
            lam = max(1.0 / (m[j - 1] - m[j]), 2.0)
        if lambda_overrides and j in lambda_overrides:
            lam = float(lambda_overrides[j])
        if lam <= 1.0:
            raise ConfigError("measurement_recovery: lambda overrides must exceed 1")
        lambdas.append(lam)
        modes.append("plain" if j <= j_beta else "averaged")

    return OrderPlan(tuple(m), float(beta), j_beta, k_beta, tuple(lambdas), tuple(modes))


def adaptive_average_nodes(
    N: float, lam: float, resolution: float = AVERAGE_RESOLUTION
) -> int:
    """Midpoint node count for the t-average on [N, 2N].

    Packet overlaps decorrelate once (s^lam - t^lam)/N moves by order one;
    the grid keeps ``resolution`` nodes per unit of that variable.
    """
    needed = math.ceil(resolution * lam * (2.0 * N) ** (lam - 1.0))
    k = max(MIN_AVERAGE_NODES, needed)
    if k > MAX_AVERAGE_NODES:
        raise NumericalError(
            f"measurement_recovery: average needs {k} nodes at N={N:g}, "
            f"above the cap {MAX_AVERAGE_NODES}; reduce N or lambda"
        )
    return int(k)


def average_grid(N: float, n_nodes: int) -> np.ndarray:
    """Midpoints of [N, 2N] with n_nodes cells."""
    return N + (np.arange(n_nodes) + 0.5) * (N / n_nodes)


def measure(
    model: MeasurementModel,
    t: float,
    lam: float,
    j: int,
    noise_value: complex = 0.0,
    subtract_terms=None,
    x0: float | None = None,
) -> complex:
    """One measurement of P_j = P - sum_{k<j} Q_k at packet scale t.

    ``subtract_terms`` supplies the Q_k symbols; by default the oracle
    terms of the model observable are used.
    """
    family = model.family_for(lam, x0)
    if subtract_terms is None:
        subtract_terms = model.observable.terms[: j - 1]
    value = packet_quadratic_form(family, [t], model.observable)[0]
    for term in subtract_terms:
        value -= packet_quadratic_form(family, [t], term)[0]
    return complex(value + noise_value)


def _require_mode(plan: OrderPlan, j: int, expected: str, op: str) -> None:
    if j < 1 or j > plan.k_beta:
        raise ConfigError(f"measurement_recovery: {op}: term index {j} outside plan")
    if plan.mode(j) != expected:
        raise ConfigError(
            f"measurement_recovery: {op}: term {j} is {plan.mode(j)}-mode, "
            f"not {expected} (j_beta={plan.j_beta}, k_beta={plan.k_beta})"
        )


def plain_estimate(
    model: MeasurementModel,
    plan: OrderPlan,
    j: int,
    N: float,
    seed: int = 0,
    noise: bool = True,
    x0: float | None = None,
) -> complex:
    """Single-packet estimator for a plain-mode term."""
    _require_mode(plan, j, "plain", "plain_estimate")
    lam = plan.lam(j)
    m_j = plan.m_list[j - 1]
    noise_value = 0.0 + 0.0j
    if noise:
        kernel = build_kernel(model.family_for(lam, x0), [N], model.beta)
        noise_value = sample_path(kernel, child_seed(seed, "plain", j)).values[0]
    raw = measure(model, N, lam, j, noise_value, x0=x0)
    return complex(N ** (-lam * m_j) * raw)


def averaged_estimate(
    model: MeasurementModel,
    plan: OrderPlan,
    j: int,
    N: float,
    n_nodes: int | None = None,
    seed: int = 0,
    noise: bool = True,
    x0: float | None = None,
) -> complex:
    """Ergodic-averaged estimator for an averaged-mode term."""
    _require_mode(plan, j, "averaged", "averaged_estimate")
    lam = plan.lam(j)
    m_j = plan.m_list[j - 1]
    if n_nodes is None:
        n_nodes = adaptive_average_nodes(N, lam)
    if n_nodes < 2:
        raise ConfigError("measurement_recovery: averaged mode needs >= 2 nodes")
    nodes = average_grid(N, n_nodes)
    family = model.family_for(lam, x0)
    signal = packet_quadratic_form(family, nodes, model.observable)
    for term in model.observable.terms[: j - 1]:
        signal = signal - packet_quadratic_form(family, nodes, term)
    values = signal
    if noise:
        kernel = build_kernel(family, nodes, model.beta)
        values = values + sample_path(kernel, child_seed(seed, "avg", j)).values
    weights = nodes ** (-lam * m_j) / n_nodes
    return complex(np.sum(weights * values))


# ---------------------------------------------------------------------------
# Full recovery pipeline
# ---------------------------------------------------------------------------


class TabulatedCoeff:
    """Reconstructed coefficient: cubic interpolation through the recovered
    values on the x0 grid, held constant beyond the grid hull (the packet
    envelope carries negligible mass there)."""

    is_constant = False

    def __init__(self, x_grid: np.ndarray, values: np.ndarray):
        order = np.argsort(x_grid)
        self._lo = float(x_grid[order[0]])
        self._hi = float(x_grid[order[-1]])
        self._spline = CubicSpline(np.asarray(x_grid)[order], np.asarray(values)[order])

    def __call__(self, x):
        return self._spline(np.clip(np.asarray(x, dtype=float), self._lo, self._hi))


@dataclass(frozen=True)
class RecoveryRow:
    term_index: int
    x0: float
    xi0: float
    mode: str
    subtract: str
    lam: float
    scale: float
    estimate: complex
    truth: float
    abs_error: float
    seed: int


@dataclass
class EstimatorReport:
    """Per-term recovery results plus plot-ready trajectories."""

    plan: OrderPlan
    rows: list
    trajectories: dict = field(default_factory=dict)
    alerts: list = field(default_factory=list)

    def errors(self, subtract: str = "oracle") -> np.ndarray:
        return np.array([r.abs_error for r in self.rows if r.subtract == subtract])


class RecoverySession:
    """Precomputed signals and kernels for repeated recovery trials.

    Signals are deterministic per (term, grid point); trials only redraw
    noise, so one session serves any number of seeds.
    """

    def __init__(
        self,
        model: MeasurementModel,
        plan: OrderPlan,
        x0_grid,
        N: float,
        subtract_mode: str = "oracle",
        n_nodes: int | None = None,
        alert_threshold: float = 0.5,
        noise: bool = True,
    ):
        if subtract_mode not in ("oracle", "self", "both"):
            raise ConfigError(
                "measurement_recovery: subtract mode must be oracle, self, or both"
            )
        if len(model.observable.terms) < plan.k_beta:
            raise ConfigError(
                "measurement_recovery: observable has fewer terms than the plan"
            )
        self.model = model
        self.plan = plan
        self.x0_grid = np.asarray(x0_grid, dtype=float)
        if subtract_mode in ("self", "both") and self.x0_grid.size < 4:
            raise ConfigError(
                "measurement_recovery: self-subtraction needs an x0 grid dense "
                "enough for interpolation (>= 4 points)"
            )
        self.N = float(N)
        self.subtract_mode = subtract_mode
        self.alert_threshold = float(alert_threshold)
        self.noise = noise

        self.nodes = {}
        self.weights = {}
        self.kernels = {}
        self.signal_p = {}
        self.signal_q = {}
        for j in range(1, plan.k_beta + 1):
            lam = plan.lam(j)
            m_j = plan.m_list[j - 1]
            if plan.mode(j) == "plain":
                nodes = np.array([self.N])
            else:
                k = n_nodes if n_nodes is not None else adaptive_average_nodes(self.N, lam)
                nodes = average_grid(self.N, k)
            self.nodes[j] = nodes
            self.weights[j] = nodes ** (-lam * m_j) / nodes.size
            if noise:
                self.kernels[j] = build_kernel(
                    model.family_for(lam), nodes, model.beta
                )
            for i, x0 in enumerate(self.x0_grid):
                family = model.family_for(lam, x0)
                self.signal_p[(j, i)] = packet_quadratic_form(
                    family, nodes, model.observable
                )
                for l in range(1, j):
                    self.signal_q[(j, i, l)] = packet_quadratic_form(
                        family, nodes, model.observable.terms[l - 1]
                    )

    def _noise_values(self, seed: int, j: int, i: int) -> np.ndarray:
        if not self.noise:
            return np.zeros(self.nodes[j].size, dtype=complex)
        path_seed = child_seed(seed, "recover", j, i)
        return sample_path(self.kernels[j], path_seed).values

    def run_seed(self, seed: int) -> EstimatorReport:
        report = EstimatorReport(self.plan, [])
        modes = ("oracle", "self") if self.subtract_mode == "both" else (self.subtract_mode,)
        noise_cache = {
            (j, i): self._noise_values(seed, j, i)
            for j in range(1, self.plan.k_beta + 1)
            for i in range(self.x0_grid.size)
        }

        for subtract in modes:
            recovered_terms = []
            for j in range(1, self.plan.k_beta + 1):
                lam = self.plan.lam(j)
                estimates = np.empty(self.x0_grid.size, dtype=complex)
                for i, x0 in enumerate(self.x0_grid):
                    signal = self.signal_p[(j, i)].copy()
                    if subtract == "oracle":
                        for l in range(1, j):
                            signal -= self.signal_q[(j, i, l)]
                    else:
                        family = self.model.family_for(lam, x0)
                        for term in recovered_terms:
                            signal -= packet_quadratic_form(family, self.nodes[j], term)
                    values = signal + noise_cache[(j, i)]
                    estimates[i] = np.sum(self.weights[j] * values)
                    truth = float(self.model.truth(j, x0).real)
                    err = float(abs(estimates[i] - truth))
                    report.rows.append(
                        RecoveryRow(
                            term_index=j,
                            x0=float(x0),
                            xi0=self.model.xi0,
                            mode=self.plan.mode(j),
                            subtract=subtract,
                            lam=lam,
                            scale=self.N,
                            estimate=complex(estimates[i]),
                            truth=truth,
                            abs_error=err,
                            seed=int(seed),
                        )
                    )
                    if err > self.alert_threshold:
                        report.alerts.append((subtract, j, float(x0), err))
                    report.trajectories[(subtract, j, float(x0))] = (
                        self.nodes[j],
                        self.weights[j] * values * self.nodes[j].size,
                    )
                if subtract == "self":
                    # Extend by homogeneity on the measured side of the sphere;
                    # the opposite side never meets a packet window.
                    side = {"h_plus": 1.0, "h_minus": 0.0} if self.model.xi0 > 0 else {
                        "h_plus": 0.0,
                        "h_minus": 1.0,
                    }
                    recovered_terms.append(
                        HomogeneousTerm(
                            order=self.plan.m_list[j - 1],
                            coefficient=TabulatedCoeff(self.x0_grid, estimates),
                            **side,
                        )
                    )
        return report


def recover_expansion(
    model: MeasurementModel,
    plan: OrderPlan,
    x0_grid,
    xi0: float,
    N: float,
    subtract_mode: str = "oracle",
    seed: int = 0,
    n_nodes: int | None = None,
    noise: bool = True,
    alert_threshold: float = 0.5,
) -> EstimatorReport:
    """Recover a_1 .. a_{k_beta} on a grid of base points for one trial."""
    if xi0 != model.xi0:
        model = MeasurementModel(
            model.observable, model.beta, model.x0, float(xi0), model.profile
        )
    session = RecoverySession(
        model, plan, x0_grid, N, subtract_mode, n_nodes, alert_threshold, noise
    )
    return session.run_seed(seed)
