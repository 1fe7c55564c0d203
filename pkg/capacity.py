"""
Channel Capacity for the Mesh Watermarking Toolkit
Mutual information and capacity per unit cost of the runlength deletion channel
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import rel_entr

from channel import DeletionChannelSpec, dmc_matrix
from runlength_code import RunAlphabet

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10_000
_STOCHASTIC_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CapacityResult:
    """Capacity per unit cost in bits per channel bit, with the maximizing input law"""
    c_unit: float
    p_star: np.ndarray
    iterations: int
    converged: bool
    # max_x D(P_x || q) / c(x) at the final output law; never below c_unit
    upper_bound: float = float("nan")
    history: List[float] = field(default_factory=list)


def _check_channel(P) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] < 1:
        raise ValueError("transition matrix must be 2-D")
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=_STOCHASTIC_TOL, rtol=0):
        raise ValueError("transition matrix rows must be probability distributions")
    return P


def _check_distribution(p, size: int) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (size,):
        raise ValueError(f"input distribution has {p.size} entries, channel has {size} inputs")
    if np.any(p < 0) or not np.isclose(p.sum(), 1.0, atol=_STOCHASTIC_TOL, rtol=0):
        raise ValueError("input distribution must be non-negative and sum to 1")
    return p


def _divergences(p: np.ndarray, P: np.ndarray) -> np.ndarray:
    # D(P_x || pP) in nats for every input x
    q = p @ P
    return rel_entr(P, q[None, :]).sum(axis=1)


def mutual_information(p: Sequence[float], P) -> float:
    """I(X;Y) in bits for input law p over channel P"""
    P = _check_channel(P)
    p = _check_distribution(p, P.shape[0])
    return float(p @ _divergences(p, P) / np.log(2.0))


def unit_cost_capacity(P, costs: Sequence[float], tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                       initial: Optional[Sequence[float]] = None) -> CapacityResult:
    """Maximize I(p) / (c . p) with the multiplicative cost-capacity iteration

    Each step reweights p(x) by exp(D(x) - C c(x)) at the current ratio C, which
    never lowers the ratio; iteration stops when successive estimates differ by
    less than tol bits.
    """
    P = _check_channel(P)
    costs = np.asarray(costs, dtype=np.float64)
    if costs.shape != (P.shape[0],):
        raise ValueError(f"{costs.size} costs for {P.shape[0]} inputs")
    if np.any(costs <= 0):
        raise ValueError("costs must be positive")
    p = np.full(P.shape[0], 1.0 / P.shape[0]) if initial is None else _check_distribution(initial, P.shape[0])

    log2 = np.log(2.0)
    history: List[float] = []
    divergence = _divergences(p, P)
    ratio = float(p @ divergence / (p @ costs))
    history.append(ratio / log2)
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        exponent = divergence - ratio * costs
        weights = p * np.exp(exponent - exponent.max())
        p = weights / weights.sum()
        divergence = _divergences(p, P)
        updated = float(p @ divergence / (p @ costs))
        history.append(updated / log2)
        change = abs(updated - ratio) / log2
        ratio = updated
        if change < tol:
            converged = True
            break
    if not converged:
        logger.warning("capacity iteration did not converge in %d steps", max_iter)
    upper = float(np.max(divergence / costs) / log2)
    logger.debug("capacity %.6f bits/cost after %d iterations (upper bound %.6f)", ratio / log2, iteration, upper)
    return CapacityResult(ratio / log2, p, iteration, converged, upper, history)


def deletion_channel_capacity(bits_per_symbol: int, p_d: float, s_d: int = 1, tol: float = DEFAULT_TOL,
                              max_iter: int = DEFAULT_MAX_ITER) -> CapacityResult:
    """Capacity per channel bit of the default runlength alphabet of size 2**bits_per_symbol"""
    alphabet = RunAlphabet.default(bits_per_symbol, s_d)
    model = dmc_matrix(alphabet, DeletionChannelSpec(p_d, s_d))
    return unit_cost_capacity(model.transition, model.costs, tol, max_iter)
