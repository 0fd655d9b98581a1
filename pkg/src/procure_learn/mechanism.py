"""Budgeted data-purchasing mechanisms around an importance-weighted learner.

Each round the mechanism posts the learner's hypothesis, draws a price from
the randomized law scaled by the current ``price_scale``, and — if the agent
accepts (price >= cost) — pays per the payment mode, reveals the cost, and
feeds the gradient weighted by one over the acceptance probability at that
cost. Rejected rounds feed the zero function. Losses accrue every round
regardless of purchase.

The budget is an expectation constraint by default: the scale is chosen so
expected spend stays within it, and realized spend is reported. ``hard_stop``
additionally forces the posted price to zero once spend reaches the budget
(free arrivals are still collected) while hypotheses and losses keep flowing.

``naive`` offers the maximum price to every arrival until the budget cannot
cover another purchase, then posts price zero; ``baseline`` acquires every
arrival and pays nothing (the unconstrained reference).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import Hypothesis, InvalidConfigError, project_coords
from .environment import ProblemInstance
from .ftrl import FtrlLearner
from .pricing import sample_price, survival

POSTED_PRICE = "posted-price"
AT_COST = "at-cost"
PAYMENT_MODES = (POSTED_PRICE, AT_COST)

PRICED = "priced"
NAIVE = "naive"
BASELINE = "baseline"
POLICIES = (PRICED, NAIVE, BASELINE)

SCALE_CAP = 1e6


class MechanismStateError(RuntimeError):
    """Run-protocol misuse: finalizing early or re-running a finished run."""


# ---------------------------------------------------------------------------
# Scale and learning-rate selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriorKnowledge:
    """Rough sequence statistics known in advance, each in [0, 1].

    Any one suffices; better knowledge buys a tighter price scale. Priority
    when several are present: (avg_value_cost & avg_value) > avg_value_cost >
    avg_sqrt_cost > avg_cost.
    """

    avg_value_cost: Optional[float] = None
    avg_value: Optional[float] = None
    avg_sqrt_cost: Optional[float] = None
    avg_cost: Optional[float] = None

    def __post_init__(self):
        for name in ("avg_value_cost", "avg_value", "avg_sqrt_cost", "avg_cost"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise InvalidConfigError(f"{name} must lie in [0, 1], got {v}")


def choose_price_scale(
    knowledge: PriorKnowledge,
    horizon: int,
    budget: float,
    payment_mode: str = POSTED_PRICE,
    c_max: float = 1.0,
) -> float:
    """Smallest price scale whose expected spend provably fits the budget.

    At-cost: horizon * stat / budget with stat the best cost-value bound
    available (avg_value_cost, else avg_sqrt_cost, else sqrt(avg_cost)).
    Posted-price: (horizon / budget) * (2 * avg_value * sqrt(c_max) -
    avg_value_cost), degrading by substituting sqrt(c_max) bounds for unknown
    statistics.
    """
    if not budget > 0:
        raise InvalidConfigError("budget must be positive")
    if payment_mode not in PAYMENT_MODES:
        raise InvalidConfigError(f"unknown payment mode {payment_mode!r}")
    ratio = horizon / budget
    k = knowledge
    if payment_mode == AT_COST:
        if k.avg_value_cost is not None:
            return ratio * k.avg_value_cost
        if k.avg_sqrt_cost is not None:
            return ratio * k.avg_sqrt_cost
        if k.avg_cost is not None:
            return ratio * math.sqrt(k.avg_cost)
        raise InvalidConfigError("no usable prior statistic supplied")
    root = math.sqrt(c_max)
    if k.avg_value_cost is not None and k.avg_value is not None:
        return ratio * (2.0 * k.avg_value * root - k.avg_value_cost)
    if k.avg_value_cost is not None:
        return ratio * (2.0 * root - k.avg_value_cost)
    if k.avg_sqrt_cost is not None or k.avg_cost is not None:
        return ratio * 2.0 * root
    raise InvalidConfigError("no usable prior statistic supplied")


def theory_learning_rate(
    reg_bound: float,
    horizon: int,
    budget: float,
    price_scale: float,
    scale: float = 1.0,
) -> float:
    """Rate balancing the regret bound: sqrt(reg_bound) over the larger of
    sqrt(horizon) and price_scale * sqrt(budget)."""
    return scale * math.sqrt(reg_bound) / max(math.sqrt(horizon), price_scale * math.sqrt(budget))


@dataclass(frozen=True)
class FixedScale:
    value: float

    def __post_init__(self):
        if self.value < 0:
            raise InvalidConfigError("price scale must be nonnegative")


@dataclass(frozen=True)
class KnowledgeScale:
    knowledge: PriorKnowledge


@dataclass(frozen=True)
class AdaptiveScale:
    """Track the burn rate: scale_t = estimate_t * rounds_left / budget_left.

    Starts at zero (buy everything at the maximum price) and re-estimates the
    value-cost statistic from purchases, importance-weighted by 1/q. The
    budget-left denominator is floored and the scale capped so spending shuts
    off rather than dividing by zero near exhaustion.
    """

    cap: float = SCALE_CAP


ScalePolicy = Union[FixedScale, KnowledgeScale, AdaptiveScale]


@dataclass(frozen=True)
class FixedRate:
    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise InvalidConfigError("learning rate must be positive")


@dataclass(frozen=True)
class TheoryRate:
    scale: float = 1.0


RatePolicy = Union[FixedRate, TheoryRate]


@dataclass(frozen=True)
class MechanismConfig:
    budget: float
    payment_mode: str = POSTED_PRICE
    purchase_policy: str = PRICED
    price_scale: ScalePolicy = AdaptiveScale()
    learning_rate: RatePolicy = TheoryRate()
    hard_stop: bool = False
    c_max: float = 1.0
    horizon: Optional[int] = None  # None: take the instance's length

    def __post_init__(self):
        if not self.budget > 0:
            raise InvalidConfigError("budget must be positive")
        if self.payment_mode not in PAYMENT_MODES:
            raise InvalidConfigError(f"unknown payment mode {self.payment_mode!r}")
        if self.purchase_policy not in POLICIES:
            raise InvalidConfigError(f"unknown purchase policy {self.purchase_policy!r}")
        if not self.c_max > 0:
            raise InvalidConfigError("maximum price must be positive")
        if self.horizon is not None and self.horizon < 1:
            raise InvalidConfigError("horizon must be >= 1")


# ---------------------------------------------------------------------------
# Transcript
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundRecord:
    """One audit row. ``accepted`` holds exactly when the posted price met the
    cost and the acceptance probability q was positive (worthless arrivals
    post the degenerate price 0 and are never bought); ``payment`` is the
    price (posted-price), the cost (at-cost), or 0 (rejected or baseline)."""

    t: int
    delta: float
    cost: float
    price: float
    accepted: bool
    q: float
    payment: float
    loss: float
    cum_spend: float


class Transcript:
    """Column-oriented per-round audit log."""

    COLUMNS = ("t", "delta", "cost", "price", "accepted", "q", "payment", "loss", "cum_spend")

    def __init__(self):
        self.delta: list[float] = []
        self.cost: list[float] = []
        self.price: list[float] = []
        self.accepted: list[bool] = []
        self.q: list[float] = []
        self.payment: list[float] = []
        self.loss: list[float] = []
        self.cum_spend: list[float] = []

    def append(self, delta, cost, price, accepted, q, payment, loss, cum_spend):
        self.delta.append(delta)
        self.cost.append(cost)
        self.price.append(price)
        self.accepted.append(accepted)
        self.q.append(q)
        self.payment.append(payment)
        self.loss.append(loss)
        self.cum_spend.append(cum_spend)

    def __len__(self) -> int:
        return len(self.loss)

    def row(self, t: int) -> RoundRecord:
        return RoundRecord(
            t,
            self.delta[t],
            self.cost[t],
            self.price[t],
            self.accepted[t],
            self.q[t],
            self.payment[t],
            self.loss[t],
            self.cum_spend[t],
        )

    def __iter__(self):
        return (self.row(t) for t in range(len(self)))


# ---------------------------------------------------------------------------
# Round decision (pure)
# ---------------------------------------------------------------------------


def priced_round(
    delta: float, cost: float, u: float, price_scale: float, c_max: float = 1.0
) -> tuple[float, float, bool]:
    """One posted-price decision: (price, acceptance probability at the
    revealed cost, accepted). Ties accept. ``price_scale == 0`` posts the
    fixed maximum price."""
    if price_scale == 0.0:
        price, q = c_max, 1.0
    elif delta <= 0.0:
        price, q = 0.0, 0.0
    else:
        price = sample_price(delta, price_scale, u, c_max)
        q = survival(delta, price_scale, cost, c_max)
    accepted = q > 0.0 and price >= cost
    return price, q, accepted


# ---------------------------------------------------------------------------
# Mechanism
# ---------------------------------------------------------------------------


class Mechanism:
    """One run's mutable state: learner, budget ledger, scale policy, audit."""

    def __init__(
        self,
        config: MechanismConfig,
        instance: ProblemInstance,
        *,
        record_transcript: bool = True,
        record_hypotheses: bool = False,
    ):
        horizon = config.horizon if config.horizon is not None else instance.horizon
        if horizon != instance.horizon:
            raise InvalidConfigError(
                f"configured horizon {horizon} != instance length {instance.horizon}"
            )
        if float(instance.costs.max(initial=0.0)) > config.c_max + 1e-12:
            raise InvalidConfigError("instance contains costs above c_max")
        self.config = config
        self.instance = instance
        self.horizon = horizon

        if config.purchase_policy != PRICED:
            # naive and baseline never evaluate the price law; a scale would
            # only leak the budget into their theory learning rate
            self.price_scale = 0.0
        elif isinstance(config.price_scale, FixedScale):
            self.price_scale = config.price_scale.value
        elif isinstance(config.price_scale, KnowledgeScale):
            self.price_scale = choose_price_scale(
                config.price_scale.knowledge,
                horizon,
                config.budget,
                config.payment_mode,
                config.c_max,
            )
        else:
            self.price_scale = 0.0

        if isinstance(config.learning_rate, FixedRate):
            rate = config.learning_rate.value
        else:
            rate = theory_learning_rate(
                instance.space.reg_bound,
                horizon,
                config.budget,
                self.price_scale,
                config.learning_rate.scale,
            )
        self.learner = FtrlLearner(instance.space, rate)

        self.spend = 0.0
        self.purchases = 0
        self.loss_total = 0.0
        self.value_cost_total = 0.0  # sum of delta * sqrt(cost)
        self.value_total = 0.0  # sum of delta
        self.estimate_total = 0.0  # importance-weighted purchase estimate
        self.rounds_done = 0
        self.hypothesis_sum = np.zeros(instance.space.dim)
        self.transcript = Transcript() if record_transcript else None
        self.hypotheses: Optional[list[np.ndarray]] = [] if record_hypotheses else None
        self._finished = False

    # -- estimates -----------------------------------------------------------

    def value_cost_estimate(self) -> float:
        """Running importance-weighted estimate of mean delta * sqrt(cost),
        clipped to [0, 1]; zero before the first round."""
        if self.rounds_done == 0:
            return 0.0
        return min(1.0, max(0.0, self.estimate_total / self.rounds_done))

    def adapted_scale(self) -> float:
        """Burn-rate scale for the next round under the adaptive policy."""
        policy = self.config.price_scale
        cap = policy.cap if isinstance(policy, AdaptiveScale) else SCALE_CAP
        remaining_rounds = self.horizon - self.rounds_done
        floor = 1e-6 * self.config.budget
        remaining_budget = max(self.config.budget - self.spend, floor)
        return min(cap, self.value_cost_estimate() * remaining_rounds / remaining_budget)

    # -- execution ------------------------------------------------------------

    def run(self, rng: np.random.Generator) -> "Mechanism":
        """Execute all rounds, consuming one uniform draw per round."""
        if self._finished:
            raise MechanismStateError("mechanism already ran its full sequence")
        cfg = self.config
        instance = self.instance
        learner = self.learner
        family = instance.family
        horizon = self.horizon
        policy = cfg.purchase_policy
        at_cost = cfg.payment_mode == AT_COST
        c_max = cfg.c_max
        budget = cfg.budget
        hard_stop = cfg.hard_stop
        adaptive = isinstance(cfg.price_scale, AdaptiveScale)
        scale = self.price_scale

        costs = instance.costs.tolist()
        points = [instance.data_point(t) for t in range(horizon)]
        us = rng.random(horizon)

        transcript = self.transcript
        hypotheses = self.hypotheses
        spend = self.spend
        purchases = self.purchases
        loss_total = self.loss_total
        vc_total = self.value_cost_total
        v_total = self.value_total
        est_total = self.estimate_total
        hyp_sum = self.hypothesis_sum
        sqrt = math.sqrt

        for t in range(horizon):
            w = learner.coords
            cost = costs[t]
            point = points[t]
            loss, dlt = family.loss_delta(w, point)

            if policy == PRICED:
                if hard_stop and spend >= budget:
                    price = 0.0
                    q = 1.0 if cost <= 0.0 else 0.0
                    accepted = q > 0.0
                else:
                    price, q, accepted = priced_round(dlt, cost, us[t], scale, c_max)
            elif policy == NAIVE:
                price = c_max if spend + c_max <= budget else 0.0
                accepted = price >= cost
                q = 1.0 if accepted else 0.0
            else:  # baseline: acquires everything, pays nothing
                price = c_max
                q = 1.0
                accepted = True

            if accepted:
                if policy == BASELINE:
                    payment = 0.0
                else:
                    payment = cost if at_cost else price
                learner.iw_feed(q, True, family.grad(w, point), dlt)
                spend += payment
                purchases += 1
                est_total += dlt * sqrt(cost) / q
            else:
                payment = 0.0
                learner.feed_zero()

            hyp_sum += w
            loss_total += loss
            vc_total += dlt * sqrt(cost)
            v_total += dlt
            self.rounds_done = t + 1

            if transcript is not None:
                transcript.append(dlt, cost, price, accepted, q, payment, loss, spend)
            if hypotheses is not None:
                hypotheses.append(w)

            if adaptive:
                self.spend = spend
                self.estimate_total = est_total
                scale = self.adapted_scale()

        self.spend = spend
        self.purchases = purchases
        self.loss_total = loss_total
        self.value_cost_total = vc_total
        self.value_total = v_total
        self.estimate_total = est_total
        self.price_scale = scale
        self._finished = True
        return self

    def finalize(self) -> Hypothesis:
        """Mean of the posted hypotheses, the run's single prediction."""
        if not self._finished:
            raise MechanismStateError("run is incomplete; cannot finalize")
        return Hypothesis(
            self.instance.space,
            project_coords(self.instance.space, self.hypothesis_sum / self.horizon),
        )

    def hypothesis_matrix(self) -> np.ndarray:
        if self.hypotheses is None:
            raise MechanismStateError("run was not recording hypotheses")
        return np.vstack(self.hypotheses)

    @property
    def realized_avg_value_cost(self) -> float:
        return self.value_cost_total / max(1, self.rounds_done)

    @property
    def realized_avg_value(self) -> float:
        return self.value_total / max(1, self.rounds_done)
