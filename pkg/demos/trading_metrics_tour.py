#!/usr/bin/env python3
"""Tour of the split plans, trading metrics and the long-only backtest.

Shows the expanding-window fold layout on a small index range, then scores
a toy prediction stream with every metric, including the edge cases that
report as absent instead of a fake zero.
"""

import datetime as dt

import numpy as np

from marketfuse.evaluation import (
    backtest,
    classification_metrics,
    dwr,
    profit_factor,
    sharpe,
    time_split,
    trading_mcc,
    tss_splits,
)


def show_plan():
    plan = tss_splits(12, k=5)
    print("expanding-window folds over 12 samples (k=5, test_size=2):")
    for j, (train_idx, test_idx) in enumerate(plan.folds, start=1):
        print(f"  fold {j}: train [0..{train_idx[-1]}]  test {test_idx.tolist()}")
    single = time_split(12)
    print(f"time split: train {len(single.folds[0][0])} / test {len(single.folds[0][1])}\n")


def show_metrics():
    rng = np.random.default_rng(3)
    n = 30
    returns = rng.normal(0.001, 0.02, size=n)
    truth = (returns > 0).astype(int)
    predictions = truth.copy()
    flip = rng.choice(n, size=8, replace=False)  # a deliberately imperfect model
    predictions[flip] = 1 - predictions[flip]

    cls = classification_metrics(truth, predictions)
    print(f"accuracy {cls.accuracy:.3f}  precision {cls.precision:.3f}  "
          f"recall {cls.recall:.3f}  f1 {cls.f1:.3f}")
    print(f"trading mcc   {trading_mcc(predictions, returns):+.3f}")
    print(f"win rate      {dwr(predictions, returns):.3f}")
    print(f"profit factor {profit_factor(predictions, returns):.3f}")
    print(f"sharpe        {sharpe(predictions, returns):.3f}  (unannualized)")

    dates = [dt.date(2024, 1, 1) + dt.timedelta(days=i) for i in range(n)]
    series = backtest(predictions, returns, dates)
    print(f"equity after {n} days: {series.equity[-1]:.4f} "
          f"({int(series.positions.sum())} long days)\n")

    print("edge cases report absent values, never zeros:")
    flat = np.zeros(n, dtype=int)
    print(f"  all-flat strategy: dwr={dwr(flat, returns)}  "
          f"profit_factor={profit_factor(flat, returns)}  sharpe={sharpe(flat, returns)}")
    winners = np.abs(returns)
    print(f"  no losing long day: profit_factor={profit_factor(np.ones(n, dtype=int), winners)}")


if __name__ == "__main__":
    show_plan()
    show_metrics()
