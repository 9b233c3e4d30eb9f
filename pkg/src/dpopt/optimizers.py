"""Steppers for DP-AdamW, DP-AdamW-BC, DP-Adam, DP-AdamBC, and DP-SGD,
plus the non-private SGD/Adam/AdamW steppers used as oracles.

All steppers are pure: they take an OptimizerState and return a fresh one
together with per-step diagnostics. DP steppers consume PrivatizedGradient
values only; the non-private ones take raw gradients. Privacy certification
leans on that signature split.

Update rules (per step t, 1-based):
    m_t = beta1 * m_{t-1} + (1 - beta1) * g
    v_t = beta2 * v_{t-1} + (1 - beta2) * g^2          (elementwise)
    m_hat = m_t / (1 - beta1^t);  v_hat = v_t / (1 - beta2^t)
    AdamW:     theta -= eta_t * (m_hat / sqrt(v_hat + stability) + wd * theta)
    AdamW-BC:  theta -= eta_t * (m_hat / sqrt(max(v_hat - phi, bc_floor)) + wd * theta)
The stability constant sits inside the square root; the BC variant drops it
entirely and relies on the bc_floor clamp alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import StepBudgetExhaustedError
from .numerics import l2_norm
from .privatize import ClipConfig, PrivatizedGradient

__all__ = [
    "SCHEDULES",
    "HyperParams",
    "OptimizerState",
    "StepDiagnostics",
    "eta_at",
    "eta_series",
    "step_dp_adamw",
    "step_dp_adamw_bc",
    "step_dp_adam",
    "step_dp_adambc",
    "step_dp_sgd",
    "step_reference_adamw",
    "step_reference_adam",
    "step_reference_sgd",
    "PRIVATE_OPTIMIZERS",
    "REFERENCE_OPTIMIZERS",
]

#: "constant" is eta; "thm2" is eta * sqrt((1-beta2^t)/(1-beta2)); "thm3" is
#: the same ramp scaled by (1-beta1). The latter two are the schedules the
#: convergence theorems assume.
SCHEDULES = ("constant", "thm2", "thm3")

# Names of optimizers that only ever see privatized gradients, vs. the
# non-private reference steppers fed raw batch means.
PRIVATE_OPTIMIZERS = frozenset(
    {"dp-sgd", "dp-adam", "dp-adambc", "dp-adamw", "dp-adamw-bc"}
)
REFERENCE_OPTIMIZERS = frozenset({"sgd", "adam", "adamw"})


@dataclass(frozen=True)
class HyperParams:
    """Every optimizer knob: base rate and schedule, moment decays, decoupled
    weight decay, the two stability constants, clipping, and the horizon T."""

    eta: float
    total_steps: int
    clip: ClipConfig = field(default_factory=ClipConfig)
    schedule: str = "constant"
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.0
    stability: float = 5e-8
    bc_floor: float = 1e-8

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.total_steps < 1:
            raise ValueError(f"total_steps must be >= 1, got {self.total_steps}")
        if self.schedule not in SCHEDULES:
            raise ValueError(
                f"unknown schedule '{self.schedule}'; expected one of {SCHEDULES}"
            )
        if not 0.0 <= self.beta1 < 1.0:
            raise ValueError(f"beta1 must lie in [0, 1), got {self.beta1}")
        if not 0.0 < self.beta2 < 1.0:
            raise ValueError(f"beta2 must lie in (0, 1), got {self.beta2}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.stability < 0:
            raise ValueError(f"stability must be >= 0, got {self.stability}")
        if self.bc_floor <= 0:
            raise ValueError(f"bc_floor must be > 0, got {self.bc_floor}")


@dataclass(frozen=True)
class OptimizerState:
    """Parameters plus first/second moment EMAs and the step counter."""

    theta: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def initial(cls, theta0: np.ndarray) -> "OptimizerState":
        theta0 = np.asarray(theta0, dtype=float)
        return cls(theta=theta0, m=np.zeros_like(theta0), v=np.zeros_like(theta0), t=0)


@dataclass(frozen=True)
class StepDiagnostics:
    """Debiased moments, BC clamp rate, and the realized parameter step size.

    clamp_fraction is the fraction of coordinates where max(v_hat - phi,
    bc_floor) selected the floor; it is 0 for every non-BC stepper.
    """

    m_hat: np.ndarray
    v_hat: np.ndarray
    clamp_fraction: float
    update_norm: float


def eta_at(hp: HyperParams, t: int) -> float:
    """Learning rate at step t (1-based) under hp.schedule."""
    if hp.schedule == "constant":
        return hp.eta
    ramp = math.sqrt((1.0 - hp.beta2**t) / (1.0 - hp.beta2))
    if hp.schedule == "thm2":
        return hp.eta * ramp
    return hp.eta * (1.0 - hp.beta1) * ramp


def eta_series(hp: HyperParams, total_steps: int | None = None) -> np.ndarray:
    """eta_t for t = 1..T as an array (exact elementwise evaluation)."""
    T = hp.total_steps if total_steps is None else total_steps
    t = np.arange(1, T + 1, dtype=float)
    if hp.schedule == "constant":
        return np.full(T, hp.eta)
    ramp = np.sqrt((1.0 - hp.beta2**t) / (1.0 - hp.beta2))
    if hp.schedule == "thm2":
        return hp.eta * ramp
    return hp.eta * (1.0 - hp.beta1) * ramp


def _advance_moments(state: OptimizerState, g: np.ndarray, hp: HyperParams):
    t = state.t + 1
    if t > hp.total_steps:
        raise StepBudgetExhaustedError(
            f"step budget exhausted: t={state.t} has already reached "
            f"total_steps={hp.total_steps}"
        )
    if g.shape != state.theta.shape:
        raise ValueError(
            f"dimension mismatch: gradient has shape {g.shape}, "
            f"parameters have shape {state.theta.shape}"
        )
    m = hp.beta1 * state.m + (1.0 - hp.beta1) * g
    v = hp.beta2 * state.v + (1.0 - hp.beta2) * g * g
    m_hat = m / (1.0 - hp.beta1**t)
    v_hat = v / (1.0 - hp.beta2**t)
    return t, m, v, m_hat, v_hat


def _adamw_core(state, g, hp):
    t, m, v, m_hat, v_hat = _advance_moments(state, g, hp)
    direction = m_hat / np.sqrt(v_hat + hp.stability)
    theta = state.theta - eta_at(hp, t) * (direction + hp.weight_decay * state.theta)
    new = OptimizerState(theta=theta, m=m, v=v, t=t)
    diag = StepDiagnostics(m_hat, v_hat, 0.0, l2_norm(theta - state.theta))
    return new, diag


def _adamw_bc_core(state, g, hp, phi_value):
    t, m, v, m_hat, v_hat = _advance_moments(state, g, hp)
    gap = v_hat - phi_value
    clamped = gap < hp.bc_floor
    direction = m_hat / np.sqrt(np.maximum(gap, hp.bc_floor))
    theta = state.theta - eta_at(hp, t) * (direction + hp.weight_decay * state.theta)
    new = OptimizerState(theta=theta, m=m, v=v, t=t)
    diag = StepDiagnostics(
        m_hat,
        v_hat,
        float(np.count_nonzero(clamped)) / clamped.size,
        l2_norm(theta - state.theta),
    )
    return new, diag


def _sgd_core(state, g, hp):
    t = state.t + 1
    if t > hp.total_steps:
        raise StepBudgetExhaustedError(
            f"step budget exhausted: t={state.t} has already reached "
            f"total_steps={hp.total_steps}"
        )
    if g.shape != state.theta.shape:
        raise ValueError(
            f"dimension mismatch: gradient has shape {g.shape}, "
            f"parameters have shape {state.theta.shape}"
        )
    theta = state.theta - eta_at(hp, t) * g
    new = OptimizerState(theta=theta, m=state.m, v=state.v, t=t)
    diag = StepDiagnostics(state.m, state.v, 0.0, l2_norm(theta - state.theta))
    return new, diag


def step_dp_adamw(
    state: OptimizerState, grad: PrivatizedGradient, hp: HyperParams
) -> tuple[OptimizerState, StepDiagnostics]:
    """One DP-AdamW step: Adam moments on the privatized gradient plus
    decoupled weight decay applied directly to the parameters."""
    return _adamw_core(state, grad.g_tilde, hp)


def step_dp_adamw_bc(
    state: OptimizerState,
    grad: PrivatizedGradient,
    hp: HyperParams,
    phi_value: float,
) -> tuple[OptimizerState, StepDiagnostics]:
    """DP-AdamW with the DP bias of the second moment subtracted.

    phi_value is (sigma*C/B)^2, the per-coordinate variance the privatizer
    noise injects into v_hat; the denominator is sqrt(max(v_hat - phi_value,
    bc_floor)) with no additive stability term.
    """
    if phi_value < 0:
        raise ValueError(f"phi_value must be >= 0, got {phi_value}")
    return _adamw_bc_core(state, grad.g_tilde, hp, phi_value)


def step_dp_adam(
    state: OptimizerState, grad: PrivatizedGradient, hp: HyperParams
) -> tuple[OptimizerState, StepDiagnostics]:
    """DP-Adam: exactly DP-AdamW with the weight decay forced to 0."""
    return step_dp_adamw(state, grad, replace(hp, weight_decay=0.0))


def step_dp_adambc(
    state: OptimizerState,
    grad: PrivatizedGradient,
    hp: HyperParams,
    phi_value: float,
) -> tuple[OptimizerState, StepDiagnostics]:
    """DP-AdamBC: exactly DP-AdamW-BC with the weight decay forced to 0."""
    return step_dp_adamw_bc(state, grad, replace(hp, weight_decay=0.0), phi_value)


def step_dp_sgd(
    state: OptimizerState, grad: PrivatizedGradient, hp: HyperParams
) -> tuple[OptimizerState, StepDiagnostics]:
    """DP-SGD: theta -= eta_t * g_tilde; the moment EMAs are untouched."""
    return _sgd_core(state, grad.g_tilde, hp)


def step_reference_adamw(
    state: OptimizerState, g: np.ndarray, hp: HyperParams
) -> OptimizerState:
    """Non-private AdamW on a raw gradient; oracle twin of step_dp_adamw."""
    return _adamw_core(state, np.asarray(g, dtype=float), hp)[0]


def step_reference_adam(
    state: OptimizerState, g: np.ndarray, hp: HyperParams
) -> OptimizerState:
    """Non-private Adam (AdamW with weight decay forced to 0)."""
    return step_reference_adamw(state, g, replace(hp, weight_decay=0.0))


def step_reference_sgd(
    state: OptimizerState, g: np.ndarray, hp: HyperParams
) -> OptimizerState:
    """Non-private SGD on a raw gradient."""
    return _sgd_core(state, np.asarray(g, dtype=float), hp)[0]
