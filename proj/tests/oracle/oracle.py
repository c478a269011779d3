"""Naive float64 reference formulas used to freeze expected values for the C++ tests.

Nothing here is shared with the engine; every formula is written out directly
from its definition with numpy.
"""

import math

import numpy as np


def vvv_attention(v, norm="frobenius"):
    v = np.asarray(v, dtype=np.float64)
    logits = v @ v.T
    if norm == "frobenius":
        logits = logits / np.sqrt((v * v).sum())
    else:
        logits = logits / np.linalg.norm(v, axis=1, keepdims=True)
    w = np.exp(logits)
    w = w / w.sum(axis=1, keepdims=True)
    return w @ v


def cosine_rows(tokens, direction):
    t = np.asarray(tokens, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    return (t @ d) / (np.linalg.norm(t, axis=1) * np.linalg.norm(d))


def raw_logits(tokens, bank):
    bank = np.asarray(bank, dtype=np.float64)
    rows = []
    for i in range(4):
        c = cosine_rows(tokens, bank[2 * i] - bank[2 * i + 1])
        rows.append((c + 1.0) / 2.0)
    return np.stack(rows)


def cask(raw, alpha):
    out = raw[0].copy()
    for i in range(1, 4):
        out = out * np.minimum(raw[i] / alpha[i - 1], 1.0)
    return out


def keys_kernel(x, a=-0.5):
    x = abs(x)
    if x <= 1:
        return (a + 2) * x ** 3 - (a + 3) * x ** 2 + 1
    if x < 2:
        return a * x ** 3 - 5 * a * x ** 2 + 8 * a * x - 4 * a
    return 0.0


def resample_1d(line, out_len):
    n = len(line)
    out = np.zeros(out_len)
    for i in range(out_len):
        s = 0.0 if out_len == 1 or n == 1 else i * (n - 1) / (out_len - 1)
        f = math.floor(s)
        acc = 0.0
        for m in range(-1, 3):
            idx = min(max(f + m, 0), n - 1)
            acc += keys_kernel(s - (f + m)) * line[idx]
        out[i] = acc
    return out


def bicubic(grid, height, width):
    grid = np.asarray(grid, dtype=np.float64)
    horiz = np.stack([resample_1d(row, width) for row in grid])
    full = np.stack([resample_1d(col, height) for col in horiz.T]).T
    return np.clip(full, 0.0, 1.0)


def pq(tokens, bank, alpha, height, width):
    per = cask(raw_logits(tokens, bank), alpha)
    side = int(round(math.sqrt(len(per) - 1)))
    return per[0], bicubic(per[1:].reshape(side, side), height, width)


def two_way(tokens, text, empty):
    sp = cosine_rows(tokens, text)
    se = cosine_rows(tokens, empty)
    return np.exp(sp) / (np.exp(sp) + np.exp(se))


def alignment_score(global_sim, scores, beta):
    a = global_sim
    for s in scores:
        a *= min(s / beta, 1.0)
    return a
