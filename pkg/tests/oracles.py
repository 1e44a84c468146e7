"""Independent brute-force references used to check the optimized code paths.

Each function is written in the most literal way possible (explicit loops,
no shared helpers with the package) so that agreement is meaningful.
"""

import math

import numpy as np


def ks_brute(a, b):
    """sup over every candidate threshold of |F_a(t) - F_b(t)| by double loop."""
    best = 0.0
    for t in list(a) + list(b):
        fa = sum(1 for v in a if v <= t) / len(a)
        fb = sum(1 for v in b if v <= t) / len(b)
        best = max(best, abs(fa - fb))
    return best


def tvd_brute(a, b):
    cats = set(a) | set(b)
    total = 0.0
    for c in cats:
        total += abs(list(a).count(c) / len(a) - list(b).count(c) / len(b))
    return total / 2


def pr_points(scores, labels):
    """(recall, precision) at every distinct score threshold, high to low."""
    pos = sum(labels)
    points = []
    for t in sorted(set(scores), reverse=True):
        tp = sum(1 for s, y in zip(scores, labels) if s >= t and y)
        fp = sum(1 for s, y in zip(scores, labels) if s >= t and not y)
        points.append((tp / pos, tp / (tp + fp)))
    return points


def average_precision_brute(scores, labels):
    total, prev_recall = 0.0, 0.0
    for recall, precision in pr_points(scores, labels):
        total += (recall - prev_recall) * precision
        prev_recall = recall
    return total


def mcc_formula(tp, fp, tn, fn):
    den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    return 0.0 if den == 0 else (tp * tn - fp * fn) / den


def best_threshold_accuracy(x, y):
    """Best accuracy of any rule 'x > t' or 'x <= t' over all midpoints."""
    xs = sorted(set(x))
    cuts = [xs[0] - 1] + [(a + b) / 2 for a, b in zip(xs, xs[1:])]
    best = 0.0
    for t in cuts:
        acc = sum((xi > t) == yi for xi, yi in zip(x, y)) / len(x)
        best = max(best, acc, 1 - acc)
    return best


def tie_group_sequences(n):
    """Every ordered sequence of non-empty tie groups (pos, neg) covering n rows.

    PR-AUC is invariant to row order, so these sequences stand for every
    label/score vector of length n up to permutation.
    """
    if n == 0:
        yield ()
        return
    for size in range(1, n + 1):
        for p in range(size + 1):
            for rest in tie_group_sequences(n - size):
                yield ((p, size - p),) + rest


def vectors_from_groups(groups, rng):
    """Materialize a tie-group sequence as shuffled (scores, labels)."""
    scores, labels = [], []
    level = len(groups)
    for p, q in groups:
        scores += [level / len(groups)] * (p + q)
        labels += [1] * p + [0] * q
        level -= 1
    order = rng.permutation(len(scores))
    return [scores[i] for i in order], [labels[i] for i in order]


def composite_literal(realism, marginal, bivariate, tatr, f1):
    return 0.25 * realism + 0.25 * ((marginal + bivariate) / 2) + 0.25 * tatr + 0.25 * (1 - f1)


def kl_closed_form(mu, logvar):
    return 0.5 * (mu * mu + math.exp(logvar) - logvar - 1)


def rescaled_quadratic(x):
    return 1 - (x - 2) ** 2 / 16


def pearson(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    xm, ym = x - x.mean(), y - y.mean()
    return float((xm * ym).sum() / math.sqrt((xm**2).sum() * (ym**2).sum()))
