"""Second-stage multi-task loss: softmax cross-entropy plus two smooth-L1
localization terms (axis-aligned offset v and inclined offset u), weighted
by lambda1 = lambda2 = 2, with closed-form gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_FLOOR = 1e-12  # clamp for -log(p)

DEFAULT_LAMBDA1 = 2.0
DEFAULT_LAMBDA2 = 2.0

U_DIMS = {"B1": 6, "B2": 5, "B3": 5}


def softmax(logits) -> np.ndarray:
    """Max-shifted softmax over the last axis."""
    x = np.asarray(logits, dtype=np.float64)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(p, true_class: int) -> float:
    p = np.asarray(p, dtype=np.float64)
    if not 0 <= true_class < p.shape[-1]:
        raise IndexError(f"class index {true_class} out of range for {p.shape[-1]} classes")
    return float(-np.log(max(p[true_class], PROB_FLOOR)))


def softmax_cross_entropy(logits, true_class: int):
    """Returns (loss, gradient w.r.t. logits) = (CE(softmax(x), k), p - onehot)."""
    p = softmax(logits)
    loss = cross_entropy(p, true_class)
    grad = p.copy()
    grad[true_class] -= 1.0
    return loss, grad


def smooth_l1(x):
    """Huber-style: 0.5 x^2 inside |x| < 1, |x| - 0.5 outside. Elementwise."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    return np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)


def smooth_l1_grad(x):
    x = np.asarray(x, dtype=np.float64)
    return np.clip(x, -1.0, 1.0)


@dataclass(frozen=True)
class LossInputs:
    logits: np.ndarray      # (K+1,) class scores, background is class 0
    true_class: int
    v: np.ndarray           # (4,) predicted axis-aligned offset
    v_star: np.ndarray
    u: np.ndarray           # (6|5,) predicted inclined offset per encoding
    u_star: np.ndarray
    lambda1: float = DEFAULT_LAMBDA1
    lambda2: float = DEFAULT_LAMBDA2
    background_class: int = 0


def multitask_loss(inp: LossInputs):
    """Total loss and its decomposition (total, cls, loc1, loc2).

    Localization terms are summed over components and gated off for
    background samples.
    """
    u = np.asarray(inp.u, dtype=np.float64)
    u_star = np.asarray(inp.u_star, dtype=np.float64)
    if u.shape != u_star.shape:
        raise ValueError(f"u/u* dimension mismatch: {u.shape} vs {u_star.shape}")
    v = np.asarray(inp.v, dtype=np.float64)
    v_star = np.asarray(inp.v_star, dtype=np.float64)
    if v.shape != v_star.shape:
        raise ValueError(f"v/v* dimension mismatch: {v.shape} vs {v_star.shape}")

    cls_term, _ = softmax_cross_entropy(inp.logits, inp.true_class)
    foreground = inp.true_class != inp.background_class
    if foreground:
        loc1 = inp.lambda1 * float(smooth_l1(v - v_star).sum())
        loc2 = inp.lambda2 * float(smooth_l1(u - u_star).sum())
    else:
        loc1 = loc2 = 0.0
    return cls_term + loc1 + loc2, cls_term, loc1, loc2


def multitask_loss_grad(inp: LossInputs):
    """Gradients of the total loss w.r.t. (logits, v, u)."""
    _, d_logits = softmax_cross_entropy(inp.logits, inp.true_class)
    v = np.asarray(inp.v, dtype=np.float64)
    u = np.asarray(inp.u, dtype=np.float64)
    if inp.true_class != inp.background_class:
        d_v = inp.lambda1 * smooth_l1_grad(v - np.asarray(inp.v_star))
        d_u = inp.lambda2 * smooth_l1_grad(u - np.asarray(inp.u_star))
    else:
        d_v = np.zeros_like(v)
        d_u = np.zeros_like(u)
    return d_logits, d_v, d_u


def numeric_gradient(fn, x, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function over a flat array."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi.flat[i] += eps
        lo.flat[i] -= eps
        g.flat[i] = (fn(hi) - fn(lo)) / (2 * eps)
    return g
