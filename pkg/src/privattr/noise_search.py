"""Phase I of the defense: minimum-noise search against a classifier.

``find_noise`` walks a saliency map toward a target class: each iteration
scores every admissible coordinate j by (1 - x_j) * dC/dx_j for an
increase and -x_j * dC/dx_j for a decrease, bumps the better entry by the
step size, and clips to [0, 1].  The noise-type policy restricts which
coordinates of the original vector may ever be touched:

* ``modify-exist``: only coordinates where x_j != 0,
* ``add-new``: only coordinates where x_j == 0 (increase-only),
* ``modify-add``: any coordinate.

A restricted policy that fails within its iteration budget is rerun once
under modify-add with ``fell_back`` set.  Argmax ties break toward the
lowest index, and coordinates already saturated in a direction are dropped
from that direction's candidate set so the walk cannot spin in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

POLICY_MODIFY_EXIST = "modify-exist"
POLICY_ADD_NEW = "add-new"
POLICY_MODIFY_ADD = "modify-add"
POLICIES = (POLICY_MODIFY_EXIST, POLICY_ADD_NEW, POLICY_MODIFY_ADD)


@dataclass(frozen=True)
class PandaConfig:
    """Search parameters: step size, iteration budget, optional rating grid."""

    step: float = 1.0
    maxiter: int = 200
    grid: tuple | None = None

    def __post_init__(self):
        if self.step <= 0:
            raise ValidationError("step size must be positive")
        if self.maxiter < 1:
            raise ValidationError("maxiter must be at least 1")
        if self.grid is not None:
            grid = tuple(float(g) for g in self.grid)
            if sorted(grid) != list(grid) or len(set(grid)) != len(grid):
                raise ValidationError("grid values must be strictly ascending")
            if grid[0] != 0.0 or grid[-1] != 1.0:
                raise ValidationError("grid must contain 0 and 1")
            object.__setattr__(self, "grid", grid)


@dataclass
class NoiseResult:
    noise: np.ndarray
    target: int
    iterations: int
    success: bool
    fell_back: bool

    @property
    def l0(self) -> int:
        return int(np.count_nonzero(self.noise))


def _validate_inputs(clf, x, target, policy):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (clf.feature_count,):
        raise ValidationError(
            f"input has shape {x.shape}, classifier expects ({clf.feature_count},)")
    if np.any(x < 0) or np.any(x > 1):
        raise ValidationError("public-data entries must lie in [0, 1]")
    if not (1 <= target <= clf.class_count):
        raise ValidationError(f"target class {target} outside 1..{clf.class_count}")
    if policy not in POLICIES:
        raise ValidationError(f"unknown noise policy {policy!r}")
    return x


def _masked_argmax(scores, mask):
    """Index of the best admissible score, lowest index on ties; None if empty."""
    if not mask.any():
        return None
    masked = np.where(mask, scores, -np.inf)
    return int(np.argmax(masked))


def _saliency_walk(clf, x, target: int, policy: str, cfg: PandaConfig):
    """One run of the greedy walk; returns (noise, iterations, success)."""
    xbar = x.copy()
    if policy == POLICY_ADD_NEW:
        inc_allowed = x == 0.0
        dec_allowed = np.zeros_like(inc_allowed)
    elif policy == POLICY_MODIFY_EXIST:
        inc_allowed = x != 0.0
        dec_allowed = x != 0.0
    else:
        inc_allowed = np.ones(x.shape, dtype=bool)
        dec_allowed = np.ones(x.shape, dtype=bool)

    t = 0
    while clf.predict(xbar) != target and t <= cfg.maxiter:
        grad = clf.input_gradient(xbar, target)
        inc_mask = inc_allowed & (xbar < 1.0)
        dec_mask = dec_allowed & (xbar > 0.0)
        if policy == POLICY_ADD_NEW:
            # the policy only ever raises fresh entries, scored by the raw gradient
            e_inc = _masked_argmax(grad, inc_mask)
            e_dec = None
        else:
            e_inc = _masked_argmax((1.0 - xbar) * grad, inc_mask)
            e_dec = _masked_argmax(-xbar * grad, dec_mask)
        if e_inc is None and e_dec is None:
            break  # nothing admissible remains; the run cannot progress
        v_inc = (1.0 - xbar[e_inc]) * grad[e_inc] if e_inc is not None else -np.inf
        v_dec = -xbar[e_dec] * grad[e_dec] if e_dec is not None else -np.inf
        if e_dec is None or (e_inc is not None and (policy == POLICY_ADD_NEW or v_inc >= v_dec)):
            xbar[e_inc] = min(1.0, xbar[e_inc] + cfg.step)
        else:
            xbar[e_dec] = max(0.0, xbar[e_dec] - cfg.step)
        t += 1
    return xbar - x, t, clf.predict(xbar) == target


def find_noise(clf, x, target: int, policy: str = POLICY_MODIFY_ADD,
               cfg: PandaConfig | None = None) -> NoiseResult:
    """Minimum-noise search toward ``target`` under a noise-type policy.

    A restricted policy that exhausts its budget without success reruns
    once under modify-add (``fell_back=True``).  Even then the search may
    fail within ``maxiter``; that is reported via ``success=False``, not an
    exception.  If the classifier already predicts the target, the zero
    noise is returned after 0 iterations.
    """
    cfg = cfg or PandaConfig()
    x = _validate_inputs(clf, x, target, policy)
    noise, iters, success = _saliency_walk(clf, x, target, policy, cfg)
    fell_back = False
    if not success and policy != POLICY_MODIFY_ADD:
        noise, iters, success = _saliency_walk(clf, x, target, POLICY_MODIFY_ADD, cfg)
        fell_back = True
    return NoiseResult(noise, target, iters, success, fell_back)


def quantize_noise(clf, x, result: NoiseResult, grid) -> NoiseResult:
    """Snap the noisy vector onto the rating grid and re-check success.

    Each entry of x + r moves to the nearest grid value; an exact midpoint
    rounds to the higher grid index.  Rounding can push the prediction off
    target, in which case the returned result records success=False.
    """
    grid = np.asarray(PandaConfig(grid=tuple(grid)).grid, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    noisy = x + result.noise
    hi = np.searchsorted(grid, noisy, side="left")
    hi = np.clip(hi, 1, grid.shape[0] - 1)
    lo = hi - 1
    pick_hi = (grid[hi] - noisy) <= (noisy - grid[lo])
    snapped = np.where(pick_hi, grid[hi], grid[lo])
    snapped[noisy <= grid[0]] = grid[0]
    snapped[noisy >= grid[-1]] = grid[-1]
    noise = snapped - x
    success = clf.predict(x + noise) == result.target
    return NoiseResult(noise, result.target, result.iterations, success, result.fell_back)


def find_noise_restricted_baseline(clf, x, target: int,
                                   cfg: PandaConfig | None = None) -> NoiseResult:
    """Direction-committed baseline: every modified entry moves one way.

    Runs the same greedy walk twice, once increase-only and once
    decrease-only over the unrestricted coordinate set, and returns the
    better run (success first, then smaller noise support, ties favor the
    increase run).
    """
    cfg = cfg or PandaConfig()
    x = _validate_inputs(clf, x, target, POLICY_MODIFY_ADD)
    runs = []
    for direction in ("inc", "dec"):
        xbar = x.copy()
        t = 0
        while clf.predict(xbar) != target and t <= cfg.maxiter:
            grad = clf.input_gradient(xbar, target)
            if direction == "inc":
                e = _masked_argmax((1.0 - xbar) * grad, xbar < 1.0)
            else:
                e = _masked_argmax(-xbar * grad, xbar > 0.0)
            if e is None:
                break
            if direction == "inc":
                xbar[e] = min(1.0, xbar[e] + cfg.step)
            else:
                xbar[e] = max(0.0, xbar[e] - cfg.step)
            t += 1
        runs.append(NoiseResult(xbar - x, target, t,
                                clf.predict(xbar) == target, False))
    inc_run, dec_run = runs
    if inc_run.success != dec_run.success:
        return inc_run if inc_run.success else dec_run
    return inc_run if inc_run.l0 <= dec_run.l0 else dec_run
