"""Mean-variance objective with two stocks and no bank account.

The equilibrium allocation is u^(t, x) = k1(t) x + k2(t).  The gain k1
solves the same nonlinear backward equation as the variance-only model and
is independent of risk aversion; the intercept k2 solves a linear Volterra
equation of the second kind built from the exponential kernels of k1 and
scales as 1/gamma.

All kernels are separable in (t, v), so each is generated from a single
cumulative integral and every Picard sweep as well as the nested double
integral in the variance coefficients runs in O(N).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateMarketError
from .market import MarketParams, ObjectiveSpec, validate_distinct_volatility
from .model2 import _coeffs, gain_equation_map, portfolio_variance_rate
from .numerics import (
    PicardConfig,
    PicardResult,
    SampledFunction,
    TimeGrid,
    forward_integrals,
    picard_solve,
    tail_integrals,
)


def solve_k1(
    params: MarketParams,
    grid: TimeGrid,
    cfg: PicardConfig | None = None,
    record_history: bool = False,
) -> tuple[SampledFunction, PicardResult]:
    """Solve the wealth-proportional gain; identical to the variance-only k."""
    check = validate_distinct_volatility(params)
    if not check.passed:
        raise DegenerateMarketError(check)
    result = picard_solve(
        gain_equation_map(params, grid), grid.n_nodes, cfg, record_history
    )
    return SampledFunction(grid, result.values), result


def constant_gain_equal_drifts(params: MarketParams) -> float:
    """Closed-form k1 when the two drifts coincide (time-independent)."""
    _, _, _, _, denom, csig, _ = _coeffs(params)
    return -csig / denom


@dataclass(frozen=True)
class KernelTables:
    """Exponential kernels of the Volterra equation, stored separably.

    I1(t,v) = exp(cum_drift[t] - cum_drift[v]),
    I2(t,v) = exp(cum_vol[t] - cum_vol[v]),
    I3(t,v) = dalpha * I2(t,T) - h(v) * I2(t,v),
    with h(v) = dalpha + (s11-s21){s21 + k1(v)(s11-s21)}
              + (s12-s22){s22 + k1(v)(s12-s22)}.
    """

    grid: TimeGrid
    gamma: float
    lam: float  # dalpha / denom
    dalpha: float
    denom: float
    cum_drift: np.ndarray  # int_0^t {a2 + k1 (a1-a2)}
    cum_vol: np.ndarray  # int_0^t of the portfolio variance rate
    h: np.ndarray

    def I1(self, i, j):
        return np.exp(self.cum_drift[i] - self.cum_drift[j])

    def I2(self, i, j):
        return np.exp(self.cum_vol[i] - self.cum_vol[j])

    def I3(self, i, j):
        return self.dalpha * self.I2(i, -1) - self.h[j] * self.I2(i, j)

    def forcing(self) -> np.ndarray:
        """phi(t) = (lam / gamma) I1(t,T) I2(t,T) at every node."""
        return (self.lam / self.gamma) * np.exp(
            (self.cum_drift - self.cum_drift[-1]) + (self.cum_vol - self.cum_vol[-1])
        )

    @cached_property
    def M3(self) -> float:
        """sup over grid pairs t <= v of |I1(t,v) I3(t,v)|."""
        n = self.grid.n_nodes
        idx = np.arange(n)
        best = 0.0
        for i in range(n):
            j = idx[i:]
            best = max(best, float(np.max(np.abs(self.I1(i, j) * self.I3(i, j)))))
        return best


def build_kernels(
    params: MarketParams, k1: SampledFunction, gamma: float, grid: TimeGrid
) -> KernelTables:
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    s21, s22, ds1, ds2, denom, _, dalpha = _coeffs(params)
    k = k1.values
    drift = params.alpha[1] + k * dalpha
    cum_drift = forward_integrals(drift, grid.dt)
    cum_vol = forward_integrals(portfolio_variance_rate(params, k), grid.dt)
    h = dalpha + ds1 * (s21 + k * ds1) + ds2 * (s22 + k * ds2)
    return KernelTables(
        grid, float(gamma), dalpha / denom, dalpha, denom, cum_drift, cum_vol, h
    )


def intercept_equation_map(kernels: KernelTables, gamma: float):
    """Picard map of k2(t) = phi(t) + lam int_t^T I1(t,v) I3(t,v) k2(v) dv."""
    grid = kernels.grid
    dt = grid.dt
    lam, dalpha = kernels.lam, kernels.dalpha
    cum_a, cum_b = kernels.cum_drift, kernels.cum_vol
    exp_a = np.exp(cum_a)
    inv_a = np.exp(-cum_a)
    exp_ab = np.exp(cum_a + cum_b)
    inv_ab_h = np.exp(-(cum_a + cum_b)) * kernels.h
    i2_tT = np.exp(cum_b - cum_b[-1])
    phi = (lam / gamma) * np.exp(cum_a - cum_a[-1]) * i2_tT

    def step(k2: np.ndarray) -> np.ndarray:
        u = exp_a * tail_integrals(inv_a * k2, dt)  # int I1 k2
        w = exp_ab * tail_integrals(inv_ab_h * k2, dt)  # int I1 I2 h k2
        return phi + lam * (dalpha * i2_tT * u - w)

    return step


def solve_k2(
    kernels: KernelTables,
    gamma: float,
    cfg: PicardConfig | None = None,
    record_history: bool = False,
) -> tuple[SampledFunction, PicardResult]:
    result = picard_solve(
        intercept_equation_map(kernels, gamma),
        kernels.grid.n_nodes,
        cfg,
        record_history,
    )
    return SampledFunction(kernels.grid, result.values), result


def intercept_residual(kernels: KernelTables, gamma: float, k2: np.ndarray) -> float:
    """Sup-norm defect of k2 substituted back into the Volterra equation."""
    return float(np.max(np.abs(intercept_equation_map(kernels, gamma)(k2) - k2)))


@dataclass(frozen=True)
class MomentCoefficients:
    """Conditional moments of terminal wealth under u^ = k1 x + k2.

    mean(t, x)     = I1(t,T)^{-1} {x + dalpha int_t^T I1(t,v) k2(v) dv}
    variance(t, x) = I1(t,T)^{-2} {c0(t) x^2 + c1(t) x + c2(t)}
    """

    grid: TimeGrid
    gamma: float
    c0: SampledFunction
    c1: SampledFunction
    c2: SampledFunction
    i1_inv: SampledFunction  # I1(t,T)^{-1}
    drift_load: SampledFunction  # dalpha int_t^T I1(t,v) k2(v) dv

    def mean(self, t, x):
        return self.i1_inv(t) * (x + self.drift_load(t))

    def variance(self, t, x):
        inv = self.i1_inv(t)
        return inv * inv * (self.c0(t) * x * x + self.c1(t) * x + self.c2(t))

    def second_moment(self, t, x):
        m = self.mean(t, x)
        return self.variance(t, x) + m * m

    def expected_wealth(self, t, x):
        return self.mean(t, x)

    def value(self, t, x):
        return self.mean(t, x) - 0.5 * self.gamma * self.variance(t, x)


def moments(
    params: MarketParams,
    k1: SampledFunction,
    k2: SampledFunction,
    gamma: float,
    grid: TimeGrid,
) -> MomentCoefficients:
    """Build c0, c1, c2 and the mean loading from the solved pair (k1, k2)."""
    kernels = build_kernels(params, k1, gamma, grid)
    dt = grid.dt
    dalpha, denom = kernels.dalpha, kernels.denom
    cum_a, cum_b = kernels.cum_drift, kernels.cum_vol
    kv = k2.values

    inv_a = np.exp(-cum_a)  # e^{-cumA(v)}
    inv_b = np.exp(-cum_b)
    i2_tT = np.exp(cum_b - cum_b[-1])
    i2_tT_inv = np.exp(cum_b[-1] - cum_b)
    i1_tT_inv = np.exp(cum_a[-1] - cum_a)

    # int_t^T I1 k2 and int_t^T I1 I3 k2
    u = np.exp(cum_a) * tail_integrals(inv_a * kv, dt)
    w = np.exp(cum_a + cum_b) * tail_integrals(inv_a * inv_b * kernels.h * kv, dt)
    j = dalpha * i2_tT * u - w

    c0 = np.expm1(cum_b[-1] - cum_b)
    c1 = -2.0 * i2_tT_inv * j

    # int_t^T I1^2 I2 k2^2
    s = np.exp(2 * cum_a + cum_b) * tail_integrals(inv_a**2 * inv_b * kv**2, dt)
    # nested double integral: int_t^T I1 I3 k2 (int_t^v I1 k2 dw) dv, written
    # with the forward cumulative Q(v) = int_0^v e^{-cumA} k2 dw
    q = forward_integrals(inv_a * kv, dt)
    m = kv * inv_a * (dalpha * inv_b[-1] - kernels.h * inv_b)
    z = np.exp(2 * cum_a + cum_b) * (
        tail_integrals(m * q, dt) - q * tail_integrals(m, dt)
    )
    c2 = i2_tT_inv * (denom * s - 2.0 * dalpha * z)

    return MomentCoefficients(
        grid,
        float(gamma),
        SampledFunction(grid, c0),
        SampledFunction(grid, c1),
        SampledFunction(grid, c2),
        SampledFunction(grid, i1_tT_inv),
        SampledFunction(grid, dalpha * u),
    )


@dataclass(frozen=True)
class PicardMeta:
    iterations: int
    delta: float


@dataclass(frozen=True)
class Model3Solution:
    params: MarketParams
    obj: ObjectiveSpec
    grid: TimeGrid
    k1: SampledFunction
    k2: SampledFunction
    kernels: KernelTables
    moments: MomentCoefficients
    k1_meta: PicardMeta
    k2_meta: PicardMeta
    k1_history: list[np.ndarray] | None = None
    k2_history: list[np.ndarray] | None = None


def solve_model3(
    params: MarketParams,
    obj: ObjectiveSpec,
    grid: TimeGrid | None = None,
    cfg: PicardConfig | None = None,
    record_history: bool = False,
) -> Model3Solution:
    """Full pipeline: k1 -> kernels -> k2 -> moment coefficients."""
    grid = grid or TimeGrid.default(obj.horizon_T)
    k1, res1 = solve_k1(params, grid, cfg, record_history)
    kernels = build_kernels(params, k1, obj.gamma, grid)
    k2, res2 = solve_k2(kernels, obj.gamma, cfg, record_history)
    mom = moments(params, k1, k2, obj.gamma, grid)
    return Model3Solution(
        params,
        obj,
        grid,
        k1,
        k2,
        kernels,
        mom,
        PicardMeta(res1.iterations, res1.delta),
        PicardMeta(res2.iterations, res2.delta),
        res1.history,
        res2.history,
    )


def control(solution: Model3Solution, t: float, x: float) -> tuple[float, float]:
    """Dollar amounts (stock 1, stock 2); linear interpolation between nodes."""
    T = solution.grid.T
    if t < 0.0 or t > T:
        raise ValueError(f"time {t} outside [0, {T}]")
    u1 = solution.k1(t) * x + solution.k2(t)
    return float(u1), float(x - u1)


# ---------------------------------------------------------------------------
# Constants for the factorial-tail error bound of the Picard iterates.
# ---------------------------------------------------------------------------


def _first_sweep_l1(history: list[np.ndarray], dt: float) -> float:
    """omega_1(0) = int_0^T |k^(1) - k^(0)| ds from the recorded iterates."""
    if history is None or len(history) < 2:
        raise ValueError("need a recorded history with at least one sweep")
    diff = np.abs(history[1] - history[0])
    return float(forward_integrals(diff, dt)[-1])


def _inflate_for_domination(base: float, omega1: float, horizon: float) -> float:
    """Smallest K (up to 5% steps) whose factorial-tail bound provably
    dominates the sweep-error recursion for n = 1..10.

    A Gronwall-style induction gives |k^(n) - k*|(t) <= omega_1(0) *
    sum_{i>=n-1} base^{i+1} (T-t)^i / i!; K is grown from
    1.01 max(base, omega_1 base) until the single-constant form
    sum_{i>=n} K^{i+1} (T-t)^i / i! dominates that series.
    """
    from .numerics import convergence_bound

    base = max(base, 1e-12)
    omega1 = max(omega1, 1e-12)
    k = 1.01 * max(base, omega1 * base)
    for _ in range(400):
        ok = True
        for n in range(1, 11):
            target = omega1 * (
                convergence_bound(base, horizon, n - 1)
                if n > 1
                else base * np.exp(base * horizon)  # sum_{i>=0} base^{i+1} h^i / i!
            )
            if convergence_bound(k, horizon, n) < target:
                ok = False
                break
        if ok:
            return k
        k *= 1.05
    return k


def intercept_bound_constant(kernels: KernelTables, history: list[np.ndarray]) -> float:
    """Constant K for the k2 iterate error bound, from grid suprema."""
    base = abs(kernels.lam) * kernels.M3
    omega1 = _first_sweep_l1(history, kernels.grid.dt)
    return _inflate_for_domination(base, omega1, kernels.grid.T)


def gain_bound_constant(
    params: MarketParams, grid: TimeGrid, history: list[np.ndarray]
) -> float:
    """Constant K for the k1 iterate error bound.

    The map's Gronwall constant is (|dalpha| / denom) times the Lipschitz
    rate of the variance-rate integrand in k, maximized over the range the
    iterates actually visited.
    """
    s21, s22, ds1, ds2, denom, _, dalpha = _coeffs(params)
    lo = min(float(np.min(h)) for h in history)
    hi = max(float(np.max(h)) for h in history)

    def rate(k):
        return 2.0 * (abs(s21 + k * ds1) * abs(ds1) + abs(s22 + k * ds2) * abs(ds2))

    base = abs(dalpha) / denom * max(rate(lo), rate(hi))
    omega1 = _first_sweep_l1(history, grid.dt)
    return _inflate_for_domination(base, omega1, grid.T)


def iterate_sup_errors(history: list[np.ndarray], solution: np.ndarray) -> list[float]:
    """‖k^(n) - k*‖_inf for n = 1 .. len(history)-1."""
    return [float(np.max(np.abs(h - solution))) for h in history[1:]]
