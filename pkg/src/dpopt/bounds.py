"""Evaluators for the high-probability convergence bounds of the DP-AdamW
family, as executable float64 formulas.

Two theorems are implemented. Theorem 2 covers the zero-momentum regime
(beta1 = 0, schedule "thm2") and bounds the average squared gradient of the
true objective over the horizon. Theorem 3 covers momentum (0 < beta1 <
beta2, schedule "thm3") and bounds the squared gradient at a step tau drawn
from P(tau = t) proportional to 1 - beta1^(T - t). Each theorem has an
uncorrected ("adamw") and a bias-corrected ("adamw_bc") variant.

Shared ingredients:
    phi = (sigma * C / B)^2, the DP contribution to the second moment;
    mu*, nu*, b*, the concentration constants gating the denominator bound
    delta0 (admissible only above a piecewise floor);
    R, the log-volume constant d * (ln(...) - T ln beta2);
    c(lambda) = (1 + 1/lambda) * max_t(eta_t + eta_t^2), folded into the
    weight-decay penalty.

The bias-corrected R takes ln|1 - x| literally as printed; it can come out
negative, which is flagged on the report rather than clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    AdmissibilityError,
    HorizonTooShortError,
    PreconditionError,
    UndefinedBoundError,
    WrongTheoremError,
)
from .numerics import RngStream
from .optimizers import HyperParams, eta_series

__all__ = [
    "VARIANTS",
    "AssumptionConstants",
    "ConcentrationConstants",
    "BoundReport",
    "BoundComparison",
    "phi",
    "concentration_constants",
    "delta0_admissible",
    "min_admissible_delta0",
    "r_term",
    "c_lambda",
    "bound_rhs_no_momentum",
    "bound_rhs_momentum",
    "tau_distribution",
    "sample_tau",
    "empirical_bound_check",
]

VARIANTS = ("adamw", "adamw_bc")

THEOREM_NO_MOMENTUM = 2
THEOREM_MOMENTUM = 3


@dataclass(frozen=True)
class AssumptionConstants:
    """Problem constants the bounds consume.

    c1 is the almost-sure gradient norm bound (must not exceed the clip
    norm C), lipschitz the gradient Lipschitz constant L, f_star a lower
    bound on the objective, f_theta0 the initial objective value, dim the
    parameter count, alpha the failure probability, and theta0_norm the
    norm of the initial iterate.
    """

    c1: float
    lipschitz: float
    f_star: float
    f_theta0: float
    dim: int
    alpha: float
    theta0_norm: float

    def __post_init__(self):
        if self.c1 <= 0:
            raise PreconditionError(f"c1 must be > 0, got {self.c1}")
        if self.lipschitz <= 0:
            raise PreconditionError(f"lipschitz must be > 0, got {self.lipschitz}")
        if self.f_theta0 < self.f_star:
            raise PreconditionError(
                f"f_theta0 >= f_star violated: {self.f_theta0} < {self.f_star}"
            )
        if self.dim < 1:
            raise PreconditionError(f"dim must be >= 1, got {self.dim}")
        if not 0.0 < self.alpha < 1.0:
            raise PreconditionError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.theta0_norm < 0:
            raise PreconditionError(
                f"theta0_norm must be >= 0, got {self.theta0_norm}"
            )


class ConcentrationConstants(NamedTuple):
    mu_star: float
    nu_star: float
    b_star: float


@dataclass(frozen=True)
class BoundReport:
    """Every intermediate of one bound evaluation plus the assembled RHS."""

    variant: str
    theorem: int
    total_steps: int
    beta1: float
    phi: float
    mu_star: float
    nu_star: float
    b_star: float
    delta0: float
    delta0_admissible: bool
    r_value: float
    e_value: float | None
    c_lambda: float
    leading_term: float
    second_moment_term: float
    decay_term: float
    rhs: float
    forced: bool = False
    r_negative: bool = False

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "theorem": self.theorem,
            "total_steps": self.total_steps,
            "beta1": self.beta1,
            "phi": self.phi,
            "mu_star": self.mu_star,
            "nu_star": self.nu_star,
            "b_star": self.b_star,
            "delta0": self.delta0,
            "delta0_admissible": self.delta0_admissible,
            "R": self.r_value,
            "E": self.e_value,
            "c_lambda": self.c_lambda,
            "leading_term": self.leading_term,
            "second_moment_term": self.second_moment_term,
            "decay_term": self.decay_term,
            "rhs": self.rhs,
            "forced": self.forced,
            "r_negative": self.r_negative,
        }


@dataclass(frozen=True)
class BoundComparison:
    """Measured LHS vs evaluated RHS for one training run."""

    seed: int
    lhs: float
    rhs: float
    satisfied: bool
    warning: bool
    theorem: int
    variant: str


def phi(sigma: float, clip_norm: float, batch_size: int) -> float:
    """(sigma * C / B)^2: the per-coordinate variance the privatizer noise
    adds to the second-moment estimate."""
    if batch_size < 1:
        raise PreconditionError(f"batch_size must be >= 1, got {batch_size}")
    if sigma < 0:
        raise PreconditionError(f"sigma must be >= 0, got {sigma}")
    if clip_norm <= 0:
        raise PreconditionError(f"clip_norm must be > 0, got {clip_norm}")
    return (sigma * clip_norm / batch_size) ** 2


def concentration_constants(
    beta2: float, total_steps: int, phi_value: float, clip_norm: float
) -> ConcentrationConstants:
    """The constants (mu*, nu*, b*) gating delta0 admissibility:

        mu* = beta2 (1 - beta2^T) / (1 - beta2)
              * [(phi - 2 phi / pi) + (C + sqrt(2 phi / pi))^2]
        nu* = 2 beta2^2 phi sqrt((1 - beta2^(2T)) / (1 - beta2^2))
        b*  = 4 beta2 phi
    """
    if not 0.0 < beta2 < 1.0:
        raise PreconditionError(f"beta2 must lie in (0, 1), got {beta2}")
    if total_steps < 1:
        raise PreconditionError(f"total_steps must be >= 1, got {total_steps}")
    if phi_value < 0:
        raise PreconditionError(f"phi must be >= 0, got {phi_value}")
    if clip_norm <= 0:
        raise PreconditionError(f"clip_norm must be > 0, got {clip_norm}")
    geom = beta2 * (1.0 - beta2**total_steps) / (1.0 - beta2)
    bracket = (phi_value - 2.0 * phi_value / math.pi) + (
        clip_norm + math.sqrt(2.0 * phi_value / math.pi)
    ) ** 2
    mu_star = geom * bracket
    nu_star = (
        2.0
        * beta2**2
        * phi_value
        * math.sqrt((1.0 - beta2 ** (2 * total_steps)) / (1.0 - beta2**2))
    )
    b_star = 4.0 * beta2 * phi_value
    return ConcentrationConstants(mu_star, nu_star, b_star)


def _admissibility_floors(
    alpha: float, total_steps: int, mu_star: float, nu_star: float, b_star: float
) -> tuple[float, float, float]:
    """(sub-Gaussian floor, sub-exponential floor, branch boundary)."""
    log_term = math.log(2.0 * total_steps / alpha)
    boundary = nu_star**2 / b_star if b_star > 0 else 0.0
    sub_gaussian = mu_star + math.sqrt(log_term * 2.0 * nu_star**2)
    sub_exponential = mu_star + log_term * 2.0 * b_star
    return sub_gaussian, sub_exponential, boundary


def delta0_admissible(
    delta0: float,
    alpha: float,
    total_steps: int,
    mu_star: float,
    nu_star: float,
    b_star: float,
) -> bool:
    """Whether delta0 clears its piecewise concentration floor.

    The branch is selected by comparing delta0 to (nu*)^2 / b*: at or below
    the boundary the sub-Gaussian floor mu* + sqrt(ln(2T/alpha) * 2 nu*^2)
    applies, at or above it the sub-exponential floor mu* + ln(2T/alpha) *
    2 b*. With b* = 0 (phi = 0) only the sub-Gaussian branch with nu* = 0
    remains, i.e. delta0 >= mu*.
    """
    if delta0 < 0:
        raise PreconditionError(f"delta0 must be >= 0, got {delta0}")
    if not 0.0 < alpha < 1.0:
        raise PreconditionError(f"alpha must lie in (0, 1), got {alpha}")
    if b_star == 0.0:
        return delta0 >= mu_star
    sub_gaussian, sub_exponential, boundary = _admissibility_floors(
        alpha, total_steps, mu_star, nu_star, b_star
    )
    in_window = delta0 <= boundary and delta0 >= sub_gaussian
    in_tail = delta0 >= boundary and delta0 >= sub_exponential
    return in_window or in_tail


def min_admissible_delta0(
    alpha: float,
    total_steps: int,
    mu_star: float,
    nu_star: float,
    b_star: float,
) -> float:
    """Smallest admissible delta0 across both branches."""
    if b_star == 0.0:
        return mu_star
    sub_gaussian, sub_exponential, boundary = _admissibility_floors(
        alpha, total_steps, mu_star, nu_star, b_star
    )
    candidates = [max(boundary, sub_exponential)]
    if sub_gaussian <= boundary:
        candidates.append(sub_gaussian)
    best = min(candidates)
    # Guard the branch boundary against float roundoff.
    for _ in range(4):
        if delta0_admissible(best, alpha, total_steps, mu_star, nu_star, b_star):
            return best
        best = math.nextafter(best, math.inf)
    return best


def r_term(
    dim: int,
    clip_norm: float,
    phi_value: float,
    beta2: float,
    stability: float,
    total_steps: int,
    variant: str,
    delta0: float | None = None,
) -> float:
    """The log-volume constant R.

    With delta0 omitted (theorem-2 forms) the log argument is built from
    C^2 + phi; passing delta0 selects the theorem-3 forms built from
    delta0^2. All logs are natural.

        adamw:    d * (ln(1 + num / ((1 - beta2) * stability)) - T ln beta2)
        adamw_bc: d * (ln|1 - num / ((1 - beta2) * phi)|       - T ln beta2)

    The bias-corrected form is evaluated literally; its log can be negative.
    """
    if variant not in VARIANTS:
        raise PreconditionError(f"unknown variant '{variant}'; expected {VARIANTS}")
    if not 0.0 < beta2 < 1.0:
        raise PreconditionError(f"beta2 must lie in (0, 1), got {beta2}")
    if total_steps < 1:
        raise PreconditionError(f"total_steps must be >= 1, got {total_steps}")
    num = clip_norm**2 + phi_value if delta0 is None else delta0**2
    tail = -total_steps * math.log(beta2)
    if variant == "adamw":
        if stability <= 0:
            raise PreconditionError(
                "stability (the additive constant under the square root) must be "
                f"> 0 for the uncorrected R, got {stability}"
            )
        return dim * (math.log1p(num / ((1.0 - beta2) * stability)) + tail)
    if phi_value <= 0:
        raise UndefinedBoundError(
            "bias-corrected R is undefined at phi = 0 (division by zero inside "
            "the log)"
        )
    inner = abs(1.0 - num / ((1.0 - beta2) * phi_value))
    if inner == 0.0:
        raise UndefinedBoundError(
            "bias-corrected R is undefined: |1 - num / ((1 - beta2) phi)| = 0"
        )
    return dim * (math.log(inner) + tail)


def c_lambda(weight_decay: float, etas: np.ndarray) -> float:
    """(1 + 1/lambda) * max_t(eta_t + eta_t^2).

    Exactly 0 at lambda = 0: every summand of the decay penalty carries a
    lambda factor, so the whole term vanishes and no division occurs.
    """
    if weight_decay < 0:
        raise PreconditionError(f"weight_decay must be >= 0, got {weight_decay}")
    if weight_decay == 0.0:
        return 0.0
    etas = np.asarray(etas, dtype=float)
    peak = float(np.max(etas + etas * etas))
    return (1.0 + 1.0 / weight_decay) * peak


def _decay_term(
    consts: AssumptionConstants, hp: HyperParams, etas: np.ndarray, r_value: float
) -> tuple[float, float]:
    """(1/2T) (C1^2 + ||theta0||^2 + c(lambda) R)
       * (lambda sum eta_t + (L/2)(lambda + lambda^2) sum eta_t^2)."""
    cl = c_lambda(hp.weight_decay, etas)
    lam = hp.weight_decay
    bracket = consts.c1**2 + consts.theta0_norm**2 + cl * r_value
    sums = lam * float(etas.sum()) + 0.5 * consts.lipschitz * (lam + lam**2) * float(
        (etas * etas).sum()
    )
    return bracket * sums / (2.0 * hp.total_steps), cl


def _common_preamble(
    consts: AssumptionConstants,
    hp: HyperParams,
    delta0: float,
    variant: str,
    force: bool,
):
    if variant not in VARIANTS:
        raise PreconditionError(f"unknown variant '{variant}'; expected {VARIANTS}")
    if consts.c1 > hp.clip.clip_norm:
        raise PreconditionError(
            f"C1 <= C violated: c1={consts.c1} > clip_norm={hp.clip.clip_norm}"
        )
    phi_value = phi(hp.clip.noise_multiplier, hp.clip.clip_norm, hp.clip.batch_size)
    cc = concentration_constants(
        hp.beta2, hp.total_steps, phi_value, hp.clip.clip_norm
    )
    admissible = delta0_admissible(
        delta0, consts.alpha, hp.total_steps, cc.mu_star, cc.nu_star, cc.b_star
    )
    if not admissible and not force:
        floor = min_admissible_delta0(
            consts.alpha, hp.total_steps, cc.mu_star, cc.nu_star, cc.b_star
        )
        raise AdmissibilityError(
            f"delta0={delta0} is below its concentration floor "
            f"(minimal admissible value {floor}); pass force=True to evaluate "
            f"anyway with a warning flag"
        )
    return phi_value, cc, admissible


def bound_rhs_no_momentum(
    consts: AssumptionConstants,
    hp: HyperParams,
    delta0: float,
    variant: str = "adamw",
    force: bool = False,
) -> BoundReport:
    """Theorem-2 RHS (beta1 = 0, schedule "thm2"), bounding the average
    squared true-objective gradient over the horizon.

        leading:  2 (delta0 + C1) (F(theta0) - F*) / (eta T)
                  (BC: 2 sqrt((delta0 + C1)^2 - phi) (F(theta0) - F*) / (eta T))
        second:   [4 d (C^2 + phi) / sqrt(1 - beta2)
                   + eta d L sqrt(C^2 + phi) (1 + lambda) / (1 - beta2)] * R / T
                  (BC: C^2 and C in place of C^2 + phi and sqrt(C^2 + phi))
        decay:    the c(lambda)-weighted penalty from _decay_term
    """
    if hp.beta1 != 0.0:
        raise WrongTheoremError(
            f"the no-momentum bound requires beta1 = 0, got beta1={hp.beta1}; "
            f"use the momentum bound (theorem 3) instead"
        )
    if hp.schedule != "thm2":
        raise WrongTheoremError(
            f"the no-momentum bound requires schedule 'thm2', got "
            f"'{hp.schedule}'"
        )
    phi_value, cc, admissible = _common_preamble(consts, hp, delta0, variant, force)
    T = hp.total_steps
    d = consts.dim
    C = hp.clip.clip_norm
    L = consts.lipschitz
    lam = hp.weight_decay
    delta_f = consts.f_theta0 - consts.f_star
    etas = eta_series(hp)
    if variant == "adamw":
        r_value = r_term(d, C, phi_value, hp.beta2, hp.stability, T, "adamw")
        leading = 2.0 * (delta0 + consts.c1) * delta_f / (hp.eta * T)
        coef = 4.0 * d * (C**2 + phi_value) / math.sqrt(1.0 - hp.beta2) + (
            hp.eta * d * L * math.sqrt(C**2 + phi_value) * (1.0 + lam)
        ) / (1.0 - hp.beta2)
    else:
        gap = (delta0 + consts.c1) ** 2 - phi_value
        if gap <= 0:
            raise PreconditionError(
                f"(delta0 + C1)^2 > phi violated: "
                f"({delta0} + {consts.c1})^2 <= {phi_value}"
            )
        r_value = r_term(d, C, phi_value, hp.beta2, hp.stability, T, "adamw_bc")
        leading = 2.0 * math.sqrt(gap) * delta_f / (hp.eta * T)
        coef = 4.0 * d * C**2 / math.sqrt(1.0 - hp.beta2) + (
            hp.eta * d * L * (1.0 + lam) * C
        ) / (1.0 - hp.beta2)
    second = coef * r_value / T
    decay, cl = _decay_term(consts, hp, etas, r_value)
    return BoundReport(
        variant=variant,
        theorem=THEOREM_NO_MOMENTUM,
        total_steps=T,
        beta1=hp.beta1,
        phi=phi_value,
        mu_star=cc.mu_star,
        nu_star=cc.nu_star,
        b_star=cc.b_star,
        delta0=delta0,
        delta0_admissible=admissible,
        r_value=r_value,
        e_value=None,
        c_lambda=cl,
        leading_term=leading,
        second_moment_term=second,
        decay_term=decay,
        rhs=leading + second + decay,
        forced=force and not admissible,
        r_negative=r_value < 0,
    )


def bound_rhs_momentum(
    consts: AssumptionConstants,
    hp: HyperParams,
    delta0: float,
    variant: str = "adamw",
    force: bool = False,
) -> BoundReport:
    """Theorem-3 RHS (0 < beta1 < beta2, schedule "thm3"), bounding the
    squared gradient at a tau-sampled step over the effective horizon
    T~ = T - beta1 / (1 - beta1).

        E = eta d L (1 - beta1) delta0 / ((1 - beta1/beta2)(1 - beta2))
            + 2 eta^2 d L^2 beta1 / ((1 - beta1/beta2)(1 - beta2)^{3/2})
            + 12 d delta0^2 sqrt(1 - beta1) / ((1 - beta1/beta2)^{3/2}
                                               sqrt(1 - beta2))
    with sqrt(delta0^2 - phi) and (delta0^2 - phi) replacing delta0 and
    delta0^2 in the bias-corrected variant, and R in its theorem-3 form.
    """
    if not 0.0 < hp.beta1 < 1.0:
        raise WrongTheoremError(
            f"the momentum bound requires 0 < beta1 < 1, got beta1={hp.beta1}; "
            f"use the no-momentum bound (theorem 2) for beta1 = 0"
        )
    if hp.beta1 >= hp.beta2:
        raise PreconditionError(
            f"beta1 < beta2 violated: 1 - beta1/beta2 = "
            f"{1.0 - hp.beta1 / hp.beta2} <= 0"
        )
    if hp.schedule != "thm3":
        raise WrongTheoremError(
            f"the momentum bound requires schedule 'thm3', got '{hp.schedule}'"
        )
    t_eff = hp.total_steps - hp.beta1 / (1.0 - hp.beta1)
    if t_eff <= 0:
        raise HorizonTooShortError(
            f"T - beta1/(1 - beta1) > 0 violated: "
            f"{hp.total_steps} - {hp.beta1 / (1.0 - hp.beta1)} = {t_eff}"
        )
    phi_value, cc, admissible = _common_preamble(consts, hp, delta0, variant, force)
    T = hp.total_steps
    d = consts.dim
    L = consts.lipschitz
    eta = hp.eta
    ratio = 1.0 - hp.beta1 / hp.beta2
    one_m_b2 = 1.0 - hp.beta2
    delta_f = consts.f_theta0 - consts.f_star
    etas = eta_series(hp)
    middle = 2.0 * eta**2 * d * L**2 * hp.beta1 / (ratio * one_m_b2**1.5)
    if variant == "adamw":
        r_value = r_term(
            d, hp.clip.clip_norm, phi_value, hp.beta2, hp.stability, T, "adamw",
            delta0=delta0,
        )
        e_value = (
            eta * d * L * (1.0 - hp.beta1) * delta0 / (ratio * one_m_b2)
            + middle
            + 12.0 * d * delta0**2 * math.sqrt(1.0 - hp.beta1)
            / (ratio**1.5 * math.sqrt(one_m_b2))
        )
        leading = 2.0 * (delta0 + consts.c1) * delta_f / (eta * t_eff)
    else:
        if delta0**2 <= phi_value:
            raise PreconditionError(
                f"delta0^2 > phi violated: {delta0}^2 <= {phi_value}"
            )
        lead_gap = (delta0 + consts.c1) ** 2 - phi_value
        if lead_gap <= 0:
            raise PreconditionError(
                f"(delta0 + C1)^2 > phi violated: "
                f"({delta0} + {consts.c1})^2 <= {phi_value}"
            )
        r_value = r_term(
            d, hp.clip.clip_norm, phi_value, hp.beta2, hp.stability, T, "adamw_bc",
            delta0=delta0,
        )
        corrected = delta0**2 - phi_value
        e_value = (
            eta * d * L * (1.0 - hp.beta1) * math.sqrt(corrected) / (ratio * one_m_b2)
            + middle
            + 12.0 * d * corrected * math.sqrt(1.0 - hp.beta1)
            / (ratio**1.5 * math.sqrt(one_m_b2))
        )
        leading = 2.0 * math.sqrt(lead_gap) * delta_f / (eta * t_eff)
    second = e_value * r_value
    decay, cl = _decay_term(consts, hp, etas, r_value)
    return BoundReport(
        variant=variant,
        theorem=THEOREM_MOMENTUM,
        total_steps=T,
        beta1=hp.beta1,
        phi=phi_value,
        mu_star=cc.mu_star,
        nu_star=cc.nu_star,
        b_star=cc.b_star,
        delta0=delta0,
        delta0_admissible=admissible,
        r_value=r_value,
        e_value=e_value,
        c_lambda=cl,
        leading_term=leading,
        second_moment_term=second,
        decay_term=decay,
        rhs=leading + second + decay,
        forced=force and not admissible,
        r_negative=r_value < 0,
    )


def tau_distribution(total_steps: int, beta1: float) -> np.ndarray:
    """P(tau = t) proportional to 1 - beta1^(T - t) over t = 0..T-1."""
    if total_steps < 1:
        raise PreconditionError(f"total_steps must be >= 1, got {total_steps}")
    if not 0.0 <= beta1 < 1.0:
        raise PreconditionError(f"beta1 must lie in [0, 1), got {beta1}")
    t = np.arange(total_steps, dtype=float)
    weights = 1.0 - beta1 ** (total_steps - t)
    return weights / weights.sum()


def sample_tau(
    total_steps: int,
    beta1: float,
    rng: RngStream,
    size: int | None = None,
) -> int | np.ndarray:
    """Draw step indices tau from the distribution above (beta1 = 0 is
    uniform over 0..T-1)."""
    p = tau_distribution(total_steps, beta1)
    draw = rng.generator.choice(total_steps, size=size, p=p)
    return int(draw) if size is None else draw


def empirical_bound_check(
    run_metrics,
    report: BoundReport,
    rng: RngStream | None = None,
    tau_draws: int = 10_000,
) -> BoundComparison:
    """Compare a run's measured LHS against the evaluated RHS.

    For theorem 2 the LHS is the plain average of the squared exact
    gradient norms over the horizon; for theorem 3 it is the tau-sampled
    expectation estimated by Monte Carlo with tau_draws draws. The
    comparison carries a warning flag when the report was produced by
    forcing an inadmissible delta0 or when the literal bias-corrected R
    came out negative.
    """
    grads = np.asarray(run_metrics.grad_norm_F, dtype=float)
    if grads.size == 0 or not np.all(np.isfinite(grads)):
        raise PreconditionError(
            "run metrics are missing exact gradient norms (grad_norm_F); the "
            "empirical check needs the quadratic task"
        )
    if grads.size != report.total_steps:
        raise PreconditionError(
            f"gradient-norm series has length {grads.size}, report expects "
            f"total_steps={report.total_steps}"
        )
    squared = grads * grads
    if report.theorem == THEOREM_NO_MOMENTUM:
        lhs = float(squared.mean())
    else:
        rng = rng if rng is not None else RngStream(0, 0)
        taus = sample_tau(report.total_steps, report.beta1, rng, size=tau_draws)
        lhs = float(squared[taus].mean())
    warning = report.forced or (not report.delta0_admissible) or report.r_negative
    return BoundComparison(
        seed=getattr(run_metrics, "seed", -1),
        lhs=lhs,
        rhs=report.rhs,
        satisfied=lhs <= report.rhs,
        warning=warning,
        theorem=report.theorem,
        variant=report.variant,
    )
