"""Exact posterior by brute-force enumeration of every bipartite matching.

With the m/u tables integrated out analytically (Dirichlet-multinomial), the
posterior over matchings is a finite discrete distribution we can normalize
exactly whenever the instance is tiny. This is the ground truth the sampler
is tested against; it is deliberately slow and simple.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .comparison import ComparisonMatrix
from .sampler import LinkageState, ModelParams, tally_counts

__all__ = [
    "matching_count",
    "all_matchings",
    "log_prior",
    "collapsed_log_marginal",
    "enumerate_posterior",
    "enumerate_prior",
    "ExactPosterior",
]

# Beyond this many pairs enumeration stops being "a few seconds"; refuse
# rather than hang.
_MAX_PAIRS = 64


def matching_count(n_a: int, n_b: int) -> int:
    """Number of bipartite matchings: sum over r of C(n_b, r) * n_a!/(n_a-r)!."""
    return sum(
        math.comb(n_b, r) * math.perm(n_a, r) for r in range(min(n_a, n_b) + 1)
    )


def all_matchings(n_a: int, n_b: int, eligible: np.ndarray | None = None):
    """Yield every matching as an int32 z vector (no-link sentinel n_a + j).

    Depth-first over B records; each record tries no-link first, then the
    eligible A records in ascending order. Yielded arrays are reused --
    copy if you keep them.
    """
    z = np.empty(n_b, np.int32)
    taken = np.zeros(n_a, np.bool_)

    def rec(j: int):
        if j == n_b:
            yield z
            return
        z[j] = n_a + j
        yield from rec(j + 1)
        for i in range(n_a):
            if taken[i] or (eligible is not None and not eligible[j, i]):
                continue
            z[j] = i
            taken[i] = True
            yield from rec(j + 1)
            taken[i] = False

    yield from rec(0)


def log_prior(n_links: int, n_a: int, n_b: int, alpha_pi: float = 1.0, beta_pi: float = 1.0) -> float:
    """Log prior mass of one matching with the given number of links.

    (n_a - r)!/n_a! spreads mass evenly over matchings sharing a link count;
    the Beta factor puts a beta(alpha_pi, beta_pi) prior on the linked share
    of file B.
    """
    if not 0 <= n_links <= min(n_a, n_b):
        raise ValueError(f"impossible link count {n_links} for {n_a}x{n_b}")
    r = n_links
    return (
        math.lgamma(n_a - r + 1) - math.lgamma(n_a + 1)
        + math.lgamma(r + alpha_pi) + math.lgamma(n_b - r + beta_pi)
        - math.lgamma(n_b + alpha_pi + beta_pi)
        - (math.lgamma(alpha_pi) + math.lgamma(beta_pi) - math.lgamma(alpha_pi + beta_pi))
    )


def _log_dirichlet_norm(vec: np.ndarray) -> float:
    """log of the Dirichlet normalization constant B(vec)."""
    return float(sum(math.lgamma(v) for v in vec) - math.lgamma(vec.sum()))


def collapsed_log_marginal(
    matrix: ComparisonMatrix, state: LinkageState, hyper: ModelParams
) -> float:
    """log p(comparison data, matching) with the m/u tables integrated out.

    Per field: B(alpha + linked counts)/B(alpha) times the same with beta and
    the non-linked counts. Missing comparisons appear in neither tally.
    """
    a_counts, b_counts = tally_counts(matrix, state)
    total = log_prior(state.n_links, matrix.n_a, matrix.n_b, hyper.alpha_pi, hyper.beta_pi)
    for k in range(len(matrix.fields)):
        total += _log_dirichlet_norm(hyper.alpha[k] + a_counts[k]) - _log_dirichlet_norm(hyper.alpha[k])
        total += _log_dirichlet_norm(hyper.beta[k] + b_counts[k]) - _log_dirichlet_norm(hyper.beta[k])
    return total


@dataclass
class ExactPosterior:
    """A fully enumerated distribution over matchings."""

    n_a: int
    n_b: int
    states: np.ndarray       # (S, n_b) int32
    log_weights: np.ndarray  # (S,) unnormalized
    probs: np.ndarray        # (S,) normalized

    @property
    def n_states(self) -> int:
        return int(self.states.shape[0])

    def link_marginals(self) -> np.ndarray:
        """(n_b, n_a) matrix of P(record j links to record i)."""
        out = np.zeros((self.n_b, self.n_a))
        for s in range(self.n_states):
            z = self.states[s]
            linked = z < self.n_a
            out[np.nonzero(linked)[0], z[linked]] += self.probs[s]
        return out

    def nolink_probs(self) -> np.ndarray:
        """(n_b,) vector of P(record j is unlinked)."""
        return 1.0 - self.link_marginals().sum(axis=1)

    def link_count_dist(self) -> dict[int, float]:
        counts = (self.states < self.n_a).sum(axis=1)
        return {int(r): float(self.probs[counts == r].sum()) for r in np.unique(counts)}

    def marginal(self, j: int) -> dict[int | None, float]:
        """P(z_j = i) for each A index i, with None keying the no-link mass."""
        mat = self.link_marginals()
        out: dict[int | None, float] = {
            int(i): float(p) for i, p in enumerate(mat[j]) if p > 0.0
        }
        out[None] = float(1.0 - mat[j].sum())
        return out


def _normalize(states: list[np.ndarray], log_w: list[float], n_a: int, n_b: int) -> ExactPosterior:
    log_weights = np.array(log_w)
    shifted = log_weights - log_weights.max()
    w = np.exp(shifted)
    return ExactPosterior(
        n_a=n_a,
        n_b=n_b,
        states=np.stack(states),
        log_weights=log_weights,
        probs=w / w.sum(),
    )


def enumerate_posterior(
    matrix: ComparisonMatrix,
    hyper: ModelParams,
    eligible: np.ndarray | None = None,
) -> ExactPosterior:
    """Exact collapsed posterior over every matching of a tiny instance."""
    if matrix.n_a * matrix.n_b > _MAX_PAIRS:
        raise ValueError(
            f"instance has {matrix.n_a * matrix.n_b} pairs; enumeration is "
            f"limited to {_MAX_PAIRS}"
        )
    hyper.validate()
    states, log_w = [], []
    for z in all_matchings(matrix.n_a, matrix.n_b, eligible):
        st = LinkageState(matrix.n_a, z)
        states.append(z.copy())
        log_w.append(collapsed_log_marginal(matrix, st, hyper))
    return _normalize(states, log_w, matrix.n_a, matrix.n_b)


def enumerate_prior(
    n_a: int, n_b: int, alpha_pi: float = 1.0, beta_pi: float = 1.0
) -> ExactPosterior:
    """The matching prior itself, enumerated (no data term)."""
    if n_a * n_b > _MAX_PAIRS:
        raise ValueError(f"instance has {n_a * n_b} pairs; enumeration is limited to {_MAX_PAIRS}")
    states, log_w = [], []
    for z in all_matchings(n_a, n_b):
        n_links = int((z < n_a).sum())
        states.append(z.copy())
        log_w.append(log_prior(n_links, n_a, n_b, alpha_pi, beta_pi))
    return _normalize(states, log_w, n_a, n_b)
