"""Monte Carlo checks of the two defining properties of the hybrid update:

  * expectation preservation: the realized update (renormalized K-vector or
    one-hot new component) has mean equal to the input responsibility vector
    in every coordinate;
  * the new-component law: the birth indicator is Bernoulli with success
    probability exactly the new-component responsibility.

Each coordinate is compared against its exact sampling standard error, so
these checks are sharp: a biased construction fails them for any seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hybrid import hybrid_update_many, truncated_weights


@dataclass
class PropertyCheck:
    name: str
    passed: bool
    detail: str


def _mc_realized_mean(phi: np.ndarray, n_draws: int, rng: np.random.Generator):
    """Empirical mean of the realized update and the empirical birth rate."""
    new_mask = hybrid_update_many(phi, n_draws, rng)
    p_new = new_mask.mean()
    xi1 = float(phi[:-1].sum())
    mean = np.empty(phi.size)
    if xi1 > 0.0:
        mean[:-1] = (1.0 - p_new) * truncated_weights(phi)
    else:
        mean[:-1] = 0.0
    mean[-1] = p_new
    return mean, p_new


def coordinate_tolerances(phi: np.ndarray, n_draws: int, n_se: float = 3.0) -> np.ndarray:
    """Per-coordinate n_se * standard error of the realized update mean.

    Coordinate k <= K of the realized update is (phi_k / xi1) * Bernoulli(xi1)
    with standard error (phi_k / xi1) * sqrt(xi1 * xi2 / n); the last
    coordinate is Bernoulli(xi2) with the binomial standard error.
    """
    phi = np.asarray(phi, dtype=np.float64)
    xi2 = float(phi[-1])
    xi1 = 1.0 - xi2
    se_unit = np.sqrt(max(xi1 * xi2, 0.0) / n_draws)
    tol = np.empty(phi.size)
    if xi1 > 0.0:
        tol[:-1] = n_se * (phi[:-1] / xi1) * se_unit
    else:
        tol[:-1] = 0.0
    tol[-1] = n_se * np.sqrt(max(xi2 * (1.0 - xi2), 0.0) / n_draws)
    return tol


def check_expectation_preservation(
    n_vectors: int = 50,
    n_draws: int = 100_000,
    seed: int = 0,
    max_k: int = 20,
) -> PropertyCheck:
    """Realized-update mean matches the input vector coordinate-wise within
    three standard errors, across random responsibility vectors."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_vectors):
        k = int(rng.integers(1, max_k + 1))
        phi = rng.dirichlet(np.ones(k + 1))
        mean, _ = _mc_realized_mean(phi, n_draws, rng)
        tol = coordinate_tolerances(phi, n_draws)
        err = np.abs(mean - phi)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(tol > 0, err / tol, np.where(err > 1e-12, np.inf, 0.0))
        worst = max(worst, float(ratio.max()))
    return PropertyCheck(
        "expectation_preservation",
        worst <= 1.0,
        f"worst coordinate error = {worst:.3f} of its 3-standard-error budget "
        f"({n_vectors} vectors, {n_draws} draws each)",
    )


def check_new_component_law(
    n_vectors: int = 20,
    n_draws: int = 100_000,
    seed: int = 1,
    max_k: int = 20,
) -> PropertyCheck:
    """Birth indicator is Bernoulli with success probability equal to the
    new-component responsibility: empirical frequency within three binomial
    standard errors, and the construction-level identity holds exactly."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_vectors):
        k = int(rng.integers(1, max_k + 1))
        phi = rng.dirichlet(np.ones(k + 1))
        # construction-level identity: the categorical birth weight IS the
        # last coordinate, no approximation involved
        xi2 = float(phi[-1])
        if xi2 != phi[-1]:
            return PropertyCheck("new_component_law", False, "birth weight != last coordinate")
        _, p_new = _mc_realized_mean(phi, n_draws, rng)
        se = np.sqrt(xi2 * (1.0 - xi2) / n_draws)
        worst = max(worst, abs(p_new - xi2) / (3.0 * se))
    return PropertyCheck(
        "new_component_law",
        worst <= 1.0,
        f"worst birth-rate error = {worst:.3f} of its 3-standard-error budget "
        f"({n_vectors} vectors, {n_draws} draws each)",
    )


def run_property_suite(seed: int = 0, n_draws: int = 100_000) -> list[PropertyCheck]:
    return [
        check_expectation_preservation(seed=seed, n_draws=n_draws),
        check_new_component_law(seed=seed + 1, n_draws=n_draws),
    ]
