"""Independent reference implementations used as test oracles.

Everything here is deliberately written with plain Python loops and
``math`` so it shares no code with the library: matrix products by the
naive triple loop, the layer forwards step by scalar step, and the
classification metrics recomputed directly from the raw pair list.
"""

import math


def matmul_loops(a, b):
    """Naive triple-loop product of two list-of-list matrices."""
    n, k, m = len(a), len(b), len(b[0])
    out = [[0.0] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            s = 0.0
            for p in range(k):
                s += a[i][p] * b[p][j]
            out[i][j] = s
    return out


def _add_loops(a, b):
    return [[a[i][j] + b[i][j] for j in range(len(a[0]))] for i in range(len(a))]


def _softmax_rows_loops(e):
    out = []
    for row in e:
        m = max(row)
        exps = [math.exp(v - m) for v in row]
        s = sum(exps)
        out.append([v / s for v in exps])
    return out


def _activation_loops(z, kind):
    if kind == "identity":
        return [row[:] for row in z]
    if kind == "relu":
        return [[v if v > 0.0 else 0.0 for v in row] for row in z]
    if kind == "softmax":
        col = [row[0] for row in z]
        m = max(col)
        exps = [math.exp(v - m) for v in col]
        s = sum(exps)
        return [[v / s] for v in exps]
    raise ValueError(kind)


def bl_forward_scalar(x, w1, w2, b, activation="identity"):
    """act(W1 @ x @ W2 + B), every product written out longhand."""
    xbar = matmul_loops(w1, x)
    z = _add_loops(matmul_loops(xbar, w2), b)
    return _activation_loops(z, activation)


def tabl_forward_scalar(x, w1, w, w2, b, lam, activation="identity"):
    """The five single-head steps applied one scalar at a time."""
    xbar = matmul_loops(w1, x)
    e = matmul_loops(xbar, w)
    a = _softmax_rows_loops(e)
    mixed = [
        [lam * (xbar[i][j] * a[i][j]) + (1.0 - lam) * xbar[i][j]
         for j in range(len(xbar[0]))]
        for i in range(len(xbar))
    ]
    z = _add_loops(matmul_loops(mixed, w2), b)
    return _activation_loops(z, activation)


def mtabl_forward_scalar(x, w1, heads, wtilde1, w2, b, lam, activation="identity"):
    """Multi-head forward: per-head mixing, row stacking, recombination."""
    xbar = matmul_loops(w1, x)
    stacked = []
    for w in heads:
        e = matmul_loops(xbar, w)
        a = _softmax_rows_loops(e)
        stacked.extend(
            [lam * (xbar[i][j] * a[i][j]) + (1.0 - lam) * xbar[i][j]
             for j in range(len(xbar[0]))]
            for i in range(len(xbar))
        )
    xtilde = matmul_loops(wtilde1, stacked)
    z = _add_loops(matmul_loops(xtilde, w2), b)
    return _activation_loops(z, activation)


def metrics_bruteforce(predictions, labels):
    """Per-class and macro metrics recomputed by direct counting."""
    per_class = {}
    for c in range(3):
        tp = sum(1 for p, t in zip(predictions, labels) if p == c and t == c)
        fp = sum(1 for p, t in zip(predictions, labels) if p == c and t != c)
        fn = sum(1 for p, t in zip(predictions, labels) if p != c and t == c)
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall > 0 else 0.0)
        per_class[c] = (precision, recall, f1)
    correct = sum(1 for p, t in zip(predictions, labels) if p == t)
    return {
        "accuracy": correct / len(labels),
        "per_class": per_class,
        "macro_precision": sum(per_class[c][0] for c in range(3)) / 3,
        "macro_recall": sum(per_class[c][1] for c in range(3)) / 3,
        "macro_f1": sum(per_class[c][2] for c in range(3)) / 3,
    }
