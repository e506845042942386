"""Metropolis-Hastings sampling of diverse segmentations from a tree.

The chain walks over tree cuts: each step picks a cut node uniformly at
random, proposes moving the cut up or down at that node, and accepts with
the usual ratio against a posterior that peaks at the optimal cut and decays
with squared value deviation.  Infeasible proposals are self-transitions,
which keeps the kernel well-defined without breaking detailed balance.
"""

import math
from dataclasses import dataclass

import numpy as np

from .segtree import DOWN, UP, apply_cut, move_node, optimal_cut

_WEIGHT_FLOOR = 1e-300  # keep sample weights strictly positive


@dataclass
class SamplerConfig:
    """Knobs for :func:`sample_segmentations`.

    ``sigma2`` is the posterior variance; when None it defaults to
    (0.25 * v(c*)^2)^2, matching a temperature of a quarter of the squared
    optimum.  ``a`` is the number of chain steps between recorded samples.
    """

    n: int = 5
    a: int = 5
    burn_in: int = 50
    sigma2: float = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.a < 1:
            raise ValueError("a must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.sigma2 is not None and not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")


@dataclass
class WeightedSample:
    """One sampled segmentation with its posterior weight in (0, 1]."""

    weight: float
    segmentation: object
    cut: frozenset


def posterior(cut, v, vstar, sigma2):
    """Unnormalized posterior exp(-(v* - v(c))^2 / sigma2)."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    dev = vstar - v.evaluate(cut)
    return math.exp(-(dev * dev) / sigma2)


def default_sigma2(vstar):
    """Default posterior variance derived from the optimal cut value."""
    return max((0.25 * vstar * vstar) ** 2, 1e-12)


def mh_step(c_t, tree, v, vstar, sigma2, rng):
    """One Metropolis-Hastings transition from cut ``c_t``.

    Proposes a uniformly random (node, direction) move; returns the new cut
    on acceptance, otherwise ``c_t``.  Acceptance works in log space so far
    tails never overflow.
    """
    nodes = sorted(c_t)
    node = nodes[rng.integers(len(nodes))]
    direction = UP if rng.integers(2) == 0 else DOWN
    res = move_node(tree, c_t, node, direction)
    if res is None:
        return c_t
    c_p, g_ratio = res
    dev_t = vstar - v.evaluate(c_t)
    dev_p = vstar - v.evaluate(c_p)
    log_alpha = (dev_t * dev_t - dev_p * dev_p) / sigma2 + math.log(g_ratio)
    if log_alpha >= 0 or rng.random() < math.exp(log_alpha):
        return c_p
    return c_t


def sample_segmentations(tree, v, config):
    """Draw ``config.n`` weighted segmentation samples from the tree.

    The chain starts at the optimal cut, runs ``config.burn_in`` steps, then
    records one sample every ``config.a`` steps; each sample's weight is its
    unnormalized posterior value.
    """
    rng = np.random.default_rng(config.seed)
    c_star = optimal_cut(tree, v)
    vstar = v.evaluate(c_star)
    sigma2 = config.sigma2 if config.sigma2 is not None else default_sigma2(vstar)
    c_t = c_star
    for _ in range(config.burn_in):
        c_t = mh_step(c_t, tree, v, vstar, sigma2, rng)
    samples = []
    for _ in range(config.n):
        for _ in range(config.a):
            c_t = mh_step(c_t, tree, v, vstar, sigma2, rng)
        w = max(posterior(c_t, v, vstar, sigma2), _WEIGHT_FLOOR)
        samples.append(WeightedSample(w, apply_cut(tree, c_t), c_t))
    return samples
