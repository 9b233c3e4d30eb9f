"""(epsilon, delta) budgeting for the subsampled Gaussian mechanism.

Two calibration modes:

* ``closed_form``: sigma = c2 * q * sqrt(T * ln(1/delta)) / epsilon. The
  constant c2 is symbolic in the underlying composition theorem, so this is
  an order-of-magnitude guideline with c2 defaulting to 1; treat the RDP
  path as authoritative for experiment budgets.
* ``rdp``: Renyi-DP accounting of the subsampled Gaussian mechanism over an
  order grid, composed linearly over steps and converted through
  eps = min_a [ rdp(a) + ln(1/delta) / (a - 1) ].

sigma == 0 is a non-private release: it maps to epsilon = inf internally
and to the string marker "non-private" in serialized records, never to a
float infinity on the wire.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import BudgetError, CertificationRefusedError

__all__ = [
    "DEFAULT_ORDERS",
    "NON_PRIVATE",
    "PrivacySpec",
    "RdpCurve",
    "calibrate_sigma_closed_form",
    "rdp_subsampled_gaussian",
    "compute_rdp_curve",
    "rdp_to_dp",
    "epsilon_spent",
    "calibrate_sigma_rdp",
    "certify_postprocessing",
    "ledger_record",
]

DEFAULT_ORDERS = (1.25, 1.5, 2.0, 3.0, 4.0, 8.0, 16.0, 32.0, 64.0)

#: Serialized stand-in for epsilon = inf (sigma == 0).
NON_PRIVATE = "non-private"

ACCOUNTANT_MODES = ("closed_form", "rdp")


@dataclass(frozen=True)
class PrivacySpec:
    """A privacy budget: (epsilon, delta) at sampling rate q over T steps,
    realized by noise multiplier sigma under the given accountant mode.

    delta should be well below 1/N for a dataset of N records; only
    delta in (0, 1) is enforced here.
    """

    epsilon: float
    delta: float
    sampling_rate: float
    total_steps: int
    sigma: float
    mode: str = "rdp"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise BudgetError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise BudgetError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 < self.sampling_rate <= 1.0:
            raise BudgetError(
                f"sampling_rate must lie in (0, 1], got {self.sampling_rate}"
            )
        if self.total_steps < 1:
            raise BudgetError(f"total_steps must be >= 1, got {self.total_steps}")
        if self.sigma < 0:
            raise BudgetError(f"sigma must be >= 0, got {self.sigma}")
        if self.mode not in ACCOUNTANT_MODES:
            raise BudgetError(
                f"unknown accountant mode '{self.mode}'; expected {ACCOUNTANT_MODES}"
            )


@dataclass(frozen=True)
class RdpCurve:
    """Per-order RDP values for some number of composed steps.

    Composition is linear: the curve for T steps is T times the curve for
    one step, which ``scaled`` implements.
    """

    orders: tuple[float, ...]
    rdp_values: tuple[float, ...]

    def __post_init__(self):
        if len(self.orders) != len(self.rdp_values):
            raise ValueError("orders and rdp_values must have equal length")
        if any(a <= 1.0 for a in self.orders):
            raise ValueError("all RDP orders must be > 1")
        if any(v < 0 for v in self.rdp_values):
            raise ValueError("RDP values must be >= 0")

    def scaled(self, steps: int) -> "RdpCurve":
        if steps < 1:
            raise ValueError(f"steps must be >= 1, got {steps}")
        return RdpCurve(self.orders, tuple(steps * v for v in self.rdp_values))


def _validate_budget(epsilon: float, delta: float, q: float, total_steps: int) -> None:
    if not epsilon > 0:
        raise BudgetError(f"epsilon must be > 0, got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise BudgetError(f"delta must lie in (0, 1), got {delta}")
    if not 0.0 < q <= 1.0:
        raise BudgetError(f"sampling rate q must lie in (0, 1], got {q}")
    if total_steps < 1:
        raise BudgetError(f"total_steps must be >= 1, got {total_steps}")


def calibrate_sigma_closed_form(
    epsilon: float, delta: float, q: float, total_steps: int, c2: float = 1.0
) -> float:
    """Minimal sigma satisfying sigma >= c2 * q * sqrt(T ln(1/delta)) / eps.

    c2 is left symbolic by the composition theorem this comes from; the
    default of 1 makes the output a guideline, not a certified budget. Use
    the RDP path when the budget matters.
    """
    _validate_budget(epsilon, delta, q, total_steps)
    if c2 <= 0:
        raise BudgetError(f"c2 must be > 0, got {c2}")
    return c2 * q * math.sqrt(total_steps * math.log(1.0 / delta)) / epsilon


# --- Renyi DP of the subsampled Gaussian mechanism ------------------------
#
# Computes log A_alpha = log E_{x ~ N(0, sigma^2)} [ ((1-q) + q *
# exp((2x-1)/(2 sigma^2)))^alpha ] in log space: a finite binomial sum for
# integer alpha and a two-sided series for fractional alpha.

_MAX_FRACTIONAL_TERMS = 1000


def _log_add(logx: float, logy: float) -> float:
    a, b = min(logx, logy), max(logx, logy)
    if a == -math.inf:
        return b
    return math.log1p(math.exp(a - b)) + b


def _log_comb(n: float, k: float) -> float:
    return (
        special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)
    )


def _log_erfc(x: float) -> float:
    return math.log(2.0) + special.log_ndtr(-x * 2**0.5)


def _log_a_int(q: float, sigma: float, alpha: int) -> float:
    log_a = -math.inf
    log1mq = math.log1p(-q)
    for i in range(alpha + 1):
        log_coef = _log_comb(alpha, i) + i * math.log(q) + (alpha - i) * log1mq
        log_a = _log_add(log_a, log_coef + (i * i - i) / (2.0 * sigma**2))
    return log_a


def _log_a_frac(q: float, sigma: float, alpha: float) -> float:
    log_a0, log_a1 = -math.inf, -math.inf
    z0 = sigma**2 * math.log(1.0 / q - 1.0) + 0.5
    log1mq = math.log1p(-q)
    last_s0 = last_s1 = -math.inf
    for i in range(_MAX_FRACTIONAL_TERMS):
        log_coef = _log_comb(alpha, i)
        j = alpha - i
        log_t0 = log_coef + i * math.log(q) + j * log1mq
        log_t1 = log_coef + j * math.log(q) + i * log1mq
        log_e0 = math.log(0.5) + _log_erfc((i - z0) / (math.sqrt(2.0) * sigma))
        log_e1 = math.log(0.5) + _log_erfc((z0 - j) / (math.sqrt(2.0) * sigma))
        log_s0 = log_t0 + (i * i - i) / (2.0 * sigma**2) + log_e0
        log_s1 = log_t1 + (j * j - j) / (2.0 * sigma**2) + log_e1
        log_a0 = _log_add(log_a0, log_s0)
        log_a1 = _log_add(log_a1, log_s1)
        total = _log_add(log_a0, log_a1)
        if log_s0 < last_s0 and log_s1 < last_s1 and max(log_s0, log_s1) < total - 30:
            return total
        last_s0, last_s1 = log_s0, log_s1
    raise ArithmeticError(
        f"fractional-order RDP series did not converge (q={q}, sigma={sigma}, "
        f"alpha={alpha})"
    )


def rdp_subsampled_gaussian(sigma: float, q: float, order: float) -> float:
    """Per-step RDP of one subsampled Gaussian release at the given order.

    q == 1 reduces exactly to the plain Gaussian mechanism's
    order / (2 sigma^2). sigma == 0 signals a non-private release by
    returning math.inf rather than raising.
    """
    if not 0.0 < q <= 1.0:
        raise BudgetError(f"sampling rate q must lie in (0, 1], got {q}")
    if order <= 1.0:
        raise BudgetError(f"RDP order must be > 1, got {order}")
    if sigma < 0:
        raise BudgetError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        return math.inf
    if q == 1.0:
        return order / (2.0 * sigma**2)
    if float(order).is_integer():
        log_a = _log_a_int(q, sigma, int(order))
    else:
        log_a = _log_a_frac(q, sigma, order)
    return max(log_a / (order - 1.0), 0.0)


def compute_rdp_curve(
    sigma: float,
    q: float,
    orders: tuple[float, ...] = DEFAULT_ORDERS,
    steps: int = 1,
) -> RdpCurve:
    """RDP at every order, composed over the given number of steps."""
    per_step = RdpCurve(
        tuple(orders), tuple(rdp_subsampled_gaussian(sigma, q, a) for a in orders)
    )
    return per_step if steps == 1 else per_step.scaled(steps)


def rdp_to_dp(curve: RdpCurve, delta: float) -> tuple[float, float]:
    """Convert an RDP curve to (epsilon, argmin_order) at the given delta."""
    if len(curve.orders) == 0:
        raise ValueError("cannot convert an empty RDP curve")
    if not 0.0 < delta < 1.0:
        raise BudgetError(f"delta must lie in (0, 1), got {delta}")
    log_inv_delta = math.log(1.0 / delta)
    best_eps, best_order = math.inf, curve.orders[0]
    for order, rdp in zip(curve.orders, curve.rdp_values):
        eps = rdp + log_inv_delta / (order - 1.0)
        if eps < best_eps:
            best_eps, best_order = eps, order
    return best_eps, best_order


def epsilon_spent(
    sigma: float,
    q: float,
    total_steps: int,
    delta: float,
    orders: tuple[float, ...] = DEFAULT_ORDERS,
) -> tuple[float, float | None]:
    """Total (epsilon, argmin_order) after total_steps releases.

    Returns (math.inf, None) for sigma == 0.
    """
    if sigma == 0.0:
        return math.inf, None
    curve = compute_rdp_curve(sigma, q, orders, steps=total_steps)
    return rdp_to_dp(curve, delta)


def calibrate_sigma_rdp(
    epsilon: float,
    delta: float,
    q: float,
    total_steps: int,
    orders: tuple[float, ...] = DEFAULT_ORDERS,
    rel_tol: float = 1e-4,
    max_iter: int = 200,
) -> float:
    """Smallest sigma whose RDP-accounted epsilon meets the target.

    Bisection on sigma until the bracketing epsilons agree to rel_tol of the
    target; the returned sigma always satisfies eps(sigma) <= epsilon.
    """
    _validate_budget(epsilon, delta, q, total_steps)

    def eps_of(sig: float) -> float:
        return epsilon_spent(sig, q, total_steps, delta, orders)[0]

    hi = 1.0
    grow = 0
    while eps_of(hi) > epsilon:
        hi *= 2.0
        grow += 1
        if grow > 80:
            raise BudgetError(
                f"cannot satisfy epsilon={epsilon} at q={q}, T={total_steps}"
            )
    lo = hi / 2.0
    while lo > 1e-8 and eps_of(lo) <= epsilon:
        hi, lo = lo, lo / 2.0
    eps_lo, eps_hi = eps_of(lo), eps_of(hi)
    for _ in range(max_iter):
        if eps_lo - eps_hi <= rel_tol * epsilon:
            break
        mid = 0.5 * (lo + hi)
        eps_mid = eps_of(mid)
        if eps_mid <= epsilon:
            hi, eps_hi = mid, eps_mid
        else:
            lo, eps_lo = mid, eps_mid
    return hi


def certify_postprocessing(optimizer_name: str, spec: PrivacySpec) -> PrivacySpec:
    """Return the unchanged budget for optimizers that only postprocess
    privatized gradients.

    The check is structural: the DP steppers take PrivatizedGradient values
    and have no access to raw per-sample gradients, so the budget depends on
    (sigma, C, B, q, T) only, never on which of them runs. Raw-gradient
    optimizers are refused.
    """
    from .optimizers import PRIVATE_OPTIMIZERS

    if optimizer_name in PRIVATE_OPTIMIZERS:
        return spec
    raise CertificationRefusedError(
        f"optimizer '{optimizer_name}' is not a registered privatized-gradient "
        f"optimizer; it may read raw per-sample gradients, so the privacy "
        f"analysis does not transfer"
    )


def ledger_record(spec: PrivacySpec, argmin_order: float | None = None) -> dict:
    """JSON-ready accountant record; epsilon = inf serializes as the
    non-private marker, never as a float infinity."""
    eps = spec.epsilon
    return {
        "epsilon": NON_PRIVATE if math.isinf(eps) else eps,
        "delta": spec.delta,
        "sigma": spec.sigma,
        "q": spec.sampling_rate,
        "T": spec.total_steps,
        "mode": spec.mode,
        "argmin_order": argmin_order,
    }
