#!/usr/bin/env python3
"""Regret of the at-cost mechanism on biased-coin streams across budgets.

The coin bias is tied to the budget (epsilon = 1 / sqrt(B)), which makes the
expected regret scale like T / sqrt(B): quadrupling the budget should halve
the regret. Prints one row per budget and the adjacent-pair ratios.
"""

import argparse
import math

import numpy as np

from procure_learn import PriorKnowledge, coin_sequence
from procure_learn.mechanism import KnowledgeScale, Mechanism, MechanismConfig, TheoryRate
from procure_learn.metrics import offline_best
from procure_learn.runner import trial_streams


def run_budget(budget, T, trials, seed):
    config = MechanismConfig(
        budget=float(budget),
        payment_mode="at-cost",
        price_scale=KnowledgeScale(PriorKnowledge(avg_value_cost=1.0)),
        learning_rate=TheoryRate(),
    )
    epsilon = 1.0 / math.sqrt(budget)
    regrets, spends = [], []
    for trial in range(trials):
        instance_ss, mech_ss, _ = trial_streams(seed, trial)
        instance = coin_sequence(T, epsilon, "heads", instance_ss)
        mech = Mechanism(config, instance, record_transcript=False)
        mech.run(np.random.default_rng(mech_ss))
        regrets.append(mech.loss_total - offline_best(instance).total_loss)
        spends.append(mech.spend)
    regrets = np.array(regrets)
    return regrets.mean(), regrets.std(ddof=1) / math.sqrt(trials), float(np.mean(spends))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--budgets", type=float, nargs="+", default=[100, 400, 1600])
    parser.add_argument("--rounds", type=int, default=20_000)
    parser.add_argument("--trials", type=int, default=200)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    print(f"T={args.rounds}, {args.trials} trials per budget, epsilon = 1/sqrt(B)")
    print(f"{'budget':>8} {'regret':>10} {'se':>8} {'spend':>9} {'T/sqrt(B)':>10}")
    means = []
    for budget in args.budgets:
        mean, se, spend = run_budget(budget, args.rounds, args.trials, args.seed)
        means.append(mean)
        print(f"{budget:8.0f} {mean:10.1f} {se:8.1f} {spend:9.1f} {args.rounds / math.sqrt(budget):10.1f}")
    for small, large, a, b in zip(args.budgets, args.budgets[1:], means, means[1:]):
        print(f"regret({small:.0f}) / regret({large:.0f}) = {a / b:.2f}")


if __name__ == "__main__":
    main()
