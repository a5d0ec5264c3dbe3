"""White-box input reconstruction against uploaded vectors.

The attacker holds the client's extractor and mapping and a target vector in
the unified dimension (a raw mapped representation, a category prototype, or
an entangled packet), and gradient-descends a random input to minimize
||rm(g(x)) - target||^2. Scoring is attacker-favorable: the reconstruction
error is the minimum MSE against every original sample that contributed to
the target.
"""

import math
from dataclasses import dataclass

import numpy as np

from .entangle import rm_apply, rm_backward
from .nets import ShapeError, backprop, forward_pass

PSNR_CAP = 99.0


class InversionFailure(RuntimeError):
    """The attack objective stayed non-finite across all restarts."""


@dataclass(eq=False)
class InversionResult:
    reconstructed: np.ndarray
    target_kind: str  # "raw" | "prototype" | "entangled"
    mse: float
    psnr: float
    iterations: int


def _objective_and_grad(extractor, rm, x, target):
    out, ext_cache = forward_pass(extractor, x[None, :])
    mapped, rm_cache = rm_apply(out, rm, target.shape[0])
    resid = mapped[0] - target
    obj = float(resid @ resid)
    grad_mapped = (2.0 * resid)[None, :]
    grad_reps, _ = rm_backward(grad_mapped, rm, rm_cache)
    _, grad_x = backprop(extractor, ext_cache, grad_reps)
    return obj, grad_x[0]


def attack_objective(extractor, rm, x, target):
    """Squared distance ||rm(g(x)) - target||^2 at a single input."""
    out, _ = forward_pass(extractor, np.asarray(x, dtype=float)[None, :])
    mapped, _ = rm_apply(out, rm, np.asarray(target).shape[0])
    resid = mapped[0] - target
    return float(resid @ resid)


def invert(extractor, rm, target, steps, lr, rng, init_scale=1.0, max_restarts=3):
    """Reconstruct an input whose mapped representation matches the target.

    Plain gradient descent from a Gaussian-random start; returns the best
    iterate by objective value. A run that turns non-finite restarts from a
    fresh init, at most max_restarts times.
    """
    target = np.asarray(target, dtype=float)
    if target.ndim != 1:
        raise ShapeError("target must be a 1-d vector")
    if not np.isfinite(target).all():
        raise ValueError("target must be finite")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if lr <= 0:
        raise ValueError("lr must be positive")
    for _ in range(max_restarts + 1):
        x = init_scale * rng.standard_normal(extractor.input_dim)
        best_x, best_obj = x.copy(), math.inf
        diverged = False
        for _ in range(steps):
            obj, grad = _objective_and_grad(extractor, rm, x, target)
            if not math.isfinite(obj) or not np.isfinite(grad).all():
                diverged = True
                break
            if obj < best_obj:
                best_obj, best_x = obj, x.copy()
            x = x - lr * grad
        if diverged:
            continue
        final_obj, _ = _objective_and_grad(extractor, rm, x, target)
        if math.isfinite(final_obj) and final_obj < best_obj:
            best_x = x.copy()
        return best_x
    raise InversionFailure(
        f"objective stayed non-finite after {max_restarts} restarts"
    )


def invert_multi(extractor, rm, target, steps, lr, rng, init_scale=1.0, restarts=1):
    """Best reconstruction over independent attack runs.

    The descent objective is piecewise quadratic, so a single start can stall
    in a poor basin; launching several and keeping the lowest-objective
    iterate models an attacker who retries. Consumes one init per start from
    rng, in order.
    """
    if restarts < 1:
        raise ValueError("restarts must be positive")
    best, best_obj = None, math.inf
    for _ in range(restarts):
        rec = invert(extractor, rm, target, steps, lr, rng, init_scale=init_scale)
        obj = attack_objective(extractor, rm, rec, target)
        if obj < best_obj:
            best, best_obj = rec, obj
    return best


def score(reconstructed, originals, data_range):
    """Best-case (mse, psnr) of a reconstruction against its originals.

    mse is the minimum mean squared error over the original samples; psnr is
    10*log10(data_range^2 / mse), reported as the 99 dB sentinel for an
    exact hit.
    """
    rec = np.asarray(reconstructed, dtype=float)
    O = np.asarray(originals, dtype=float)
    if O.ndim == 1:
        O = O[None, :]
    if O.shape[0] == 0:
        raise ValueError("need at least one original sample to score against")
    if rec.shape != O.shape[1:]:
        raise ShapeError("reconstruction and originals dimensions differ")
    if data_range <= 0:
        raise ValueError("data_range must be positive")
    mse = float(((O - rec) ** 2).mean(axis=1).min())
    if mse == 0.0:
        return 0.0, PSNR_CAP
    return mse, float(10.0 * np.log10(data_range**2 / mse))


def dataset_range(X):
    """Empirical data range (max minus min) used as the PSNR peak."""
    X = np.asarray(X, dtype=float)
    r = float(X.max() - X.min())
    return r if r > 0 else 1.0
