"""The hybrid replacement for a K+1-dimensional responsibility update.

Given a responsibility vector phi over K instantiated components plus one
slot for a yet-uninstantiated component, the full vector cannot be stored as
a variational parameter without growing the model on every update. Instead we
flip a two-way categorical coin whose first weight is the total mass on the K
existing components and whose second weight is the new-component mass:

  * with probability xi_1 = sum(phi[:K]) keep the renormalized K-vector
    (a truncated variational update),
  * with probability xi_2 = phi[K] instantiate a new component (a Gibbs-style
    hard assignment to the K+1-th slot).

The realized update has expectation phi in every coordinate, and the
new-component indicator is exactly Bernoulli(phi[K]), the same birth law a
collapsed Gibbs sampler follows.

One uniform draw is consumed per update even on the deterministic branches,
so downstream random streams do not depend on which branch was taken.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TRUNCATED = "truncated"
NEW_COMPONENT = "new_component"


@dataclass(frozen=True)
class HybridUpdate:
    kind: str
    weights: np.ndarray | None = None  # renormalized K-vector, truncated case only

    @property
    def is_new(self) -> bool:
        return self.kind == NEW_COMPONENT


def hybrid_update(phi: np.ndarray, rng: np.random.Generator) -> HybridUpdate:
    """Draw one hybrid update from a K+1 responsibility vector."""
    phi = np.asarray(phi, dtype=np.float64)
    xi2 = float(phi[-1])
    xi1 = float(phi[:-1].sum())
    u = rng.random()
    if xi1 <= 0.0:
        return HybridUpdate(NEW_COMPONENT)
    if xi2 <= 0.0 or u >= xi2:
        return HybridUpdate(TRUNCATED, phi[:-1] / xi1)
    return HybridUpdate(NEW_COMPONENT)


def hybrid_update_many(phi: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized batch of hybrid updates from one phi.

    Returns a boolean array marking the draws that instantiate a new
    component; the truncated draws all share the same renormalized K-vector,
    so the mask is the only per-draw information. Consumes exactly n uniforms
    and makes the same decisions as n sequential hybrid_update calls.
    """
    phi = np.asarray(phi, dtype=np.float64)
    xi2 = float(phi[-1])
    xi1 = float(phi[:-1].sum())
    u = rng.random(n)
    if xi1 <= 0.0:
        return np.ones(n, dtype=bool)
    if xi2 <= 0.0:
        return np.zeros(n, dtype=bool)
    return u < xi2


def truncated_weights(phi: np.ndarray) -> np.ndarray:
    """The renormalized K-vector a truncated hybrid draw realizes."""
    phi = np.asarray(phi, dtype=np.float64)
    xi1 = float(phi[:-1].sum())
    if xi1 <= 0.0:
        raise ValueError("no mass on instantiated components")
    return phi[:-1] / xi1


def normalize_log_weights(logw: np.ndarray) -> np.ndarray:
    """Exponentiate-and-normalize after max subtraction; a vector of all
    -inf normalizes to uniform (degenerate no-information case)."""
    logw = np.asarray(logw, dtype=np.float64)
    m = logw.max()
    if not np.isfinite(m):
        return np.full(logw.size, 1.0 / logw.size)
    w = np.exp(logw - m)
    return w / w.sum()


def categorical_index(probs: np.ndarray, u: float) -> int:
    """Index of the category a uniform draw u lands in."""
    cum = np.cumsum(probs)
    idx = int(np.searchsorted(cum, u * cum[-1], side="right"))
    return min(idx, probs.size - 1)
