"""Adapt-then-combine diffusion recursions: DQA-RLS, DRLS and a quantization-aware LMS.

The per-node functions (:func:`dqa_rls_adapt`, :func:`drls_adapt`,
:func:`qa_lms_adapt`, :func:`combine`) follow one node through one iteration
and are the reference form. :class:`BatchedDiffusion` runs the same
recursions for every node of a stack of independent trials at once and is
what the simulator uses.

Data model is ``d = w_o^H x + v``; estimates are corrected with the
conjugated a-priori error ``conj(d - g h^H x)``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .bussgang import VARIANCE_FLOOR, VarianceTracker, estimate_input_variance, gain_diagonal, gain_scalar
from .quantizer import QuantizerSpec, distortion_factor

ALGORITHMS = ("drls", "dqa-rls", "qa-lms")


class DivergenceError(RuntimeError):
    def __init__(self, message: str, node=None, iteration=None, trial=None):
        self.node = node
        self.iteration = iteration
        self.trial = trial
        super().__init__(message)


@dataclass(frozen=True)
class AlgorithmConfig:
    forgetting: float = 0.98
    regularization_delta: float = 100.0
    lms_step: float = 0.05

    def __post_init__(self):
        if not 0 < self.forgetting <= 1:
            raise ValueError("forgetting must be in (0, 1]")
        if not self.regularization_delta > 0:
            raise ValueError("regularization_delta must be positive")
        if not self.lms_step >= 0:
            raise ValueError("lms_step must be non-negative")


@dataclass
class NodeState:
    node: int
    w: np.ndarray
    h: np.ndarray
    P: np.ndarray
    gain: float = 1.0
    variance_estimate: float = float("nan")
    iteration: int = -1

    @classmethod
    def initial(cls, node: int, filter_length: int, delta: float = 100.0) -> "NodeState":
        zeros = np.zeros(filter_length, dtype=complex)
        return cls(node, zeros, zeros.copy(), delta * np.eye(filter_length, dtype=complex))


@dataclass(frozen=True)
class NeighborDatum:
    """What node k receives from neighbor ``node`` at one iteration."""

    node: int
    weight: float
    noise_variance: float
    regressor: np.ndarray
    desired: complex


def _check(state: NodeState, data: Sequence[NeighborDatum]) -> None:
    m = state.h.shape[0]
    if state.P.shape != (m, m) or state.w.shape != (m,):
        raise ValueError(f"node {state.node}: inconsistent state dimensions")
    for datum in data:
        if np.shape(datum.regressor) != (m,):
            raise ValueError(
                f"node {state.node}: regressor from node {datum.node} has shape "
                f"{np.shape(datum.regressor)}, expected ({m},)"
            )


def _rls_inner(state: NodeState, data: Sequence[NeighborDatum], gain: float, forgetting: float):
    h = state.w.copy()
    P = state.P / forgetting
    for datum in data:
        x = np.asarray(datum.regressor, dtype=complex)
        c = datum.weight
        Px = P @ x
        den = datum.noise_variance + c * np.vdot(x, Px).real
        err = datum.desired - gain * np.vdot(h, x)
        h = h + (c / den) * Px * np.conj(err)
        P = P - (c / den) * np.outer(Px, Px.conj())
    P = 0.5 * (P + P.conj().T)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(P))):
        raise DivergenceError(
            f"non-finite estimate at node {state.node}, iteration {state.iteration + 1}",
            node=state.node,
            iteration=state.iteration + 1,
        )
    return h, P


def _own_regressor(state: NodeState, data: Sequence[NeighborDatum]) -> np.ndarray:
    for datum in data:
        if datum.node == state.node:
            return np.asarray(datum.regressor)
    raise ValueError(f"node {state.node} is missing from its own neighborhood data")


def dqa_rls_adapt(
    state: NodeState,
    neighbor_data: Sequence[NeighborDatum],
    spec: QuantizerSpec | None,
    config: AlgorithmConfig = AlgorithmConfig(),
    tracker: VarianceTracker | None = None,
) -> NodeState:
    """One DQA-RLS adaptation step at node ``state.node``.

    The Bussgang gain is refreshed from the node's own quantized regressor,
    then every neighbor's quantized data is folded in with a rank-one update.
    ``spec=None`` is full resolution and pins the gain to 1.
    """
    _check(state, neighbor_data)
    if spec is None:
        gain, variance = 1.0, state.variance_estimate
    else:
        own = _own_regressor(state, neighbor_data)
        if tracker is not None:
            variance = tracker.update(own)
        else:
            variance = estimate_input_variance(own, spec.bits)
        gain = gain_scalar(spec, variance)
    h, P = _rls_inner(state, neighbor_data, gain, config.forgetting)
    return replace(state, h=h, P=P, gain=gain, variance_estimate=variance, iteration=state.iteration + 1)


def drls_adapt(
    state: NodeState,
    neighbor_data: Sequence[NeighborDatum],
    config: AlgorithmConfig = AlgorithmConfig(),
) -> NodeState:
    """Quantization-unaware diffusion RLS step (gain fixed at 1)."""
    _check(state, neighbor_data)
    h, P = _rls_inner(state, neighbor_data, 1.0, config.forgetting)
    return replace(state, h=h, P=P, gain=1.0, iteration=state.iteration + 1)


def qa_lms_adapt(
    state: NodeState,
    neighbor_data: Sequence[NeighborDatum],
    spec: QuantizerSpec | None,
    step: float,
) -> NodeState:
    """Diffusion LMS step with the a-priori error demodulated by the Bussgang gain."""
    if step < 0:
        raise ValueError("step must be non-negative")
    _check(state, neighbor_data)
    if spec is None:
        gain, variance = 1.0, state.variance_estimate
    else:
        variance = estimate_input_variance(_own_regressor(state, neighbor_data), spec.bits)
        gain = gain_scalar(spec, variance)
    h = state.w.copy()
    update = np.zeros_like(h)
    for datum in neighbor_data:
        x = np.asarray(datum.regressor, dtype=complex)
        update += datum.weight * x * np.conj(datum.desired - gain * np.vdot(h, x))
    h = h + step * update
    if not np.all(np.isfinite(h)):
        raise DivergenceError(
            f"non-finite estimate at node {state.node}, iteration {state.iteration + 1}",
            node=state.node,
            iteration=state.iteration + 1,
        )
    return replace(state, h=h, gain=gain, variance_estimate=variance, iteration=state.iteration + 1)


def combine(all_h, combine_matrix) -> np.ndarray:
    """``w_k = sum_l a_lk h_l`` for every node; ``all_h`` is (N, M)."""
    return np.einsum("lk,lm->km", np.asarray(combine_matrix), np.asarray(all_h))


def neighbor_data_for(
    k: int,
    adapt_matrix: np.ndarray,
    noise_variances: np.ndarray,
    regressors: np.ndarray,
    desired: np.ndarray,
) -> list[NeighborDatum]:
    """Neighborhood data of node ``k`` in ascending node order (nonzero ``c_lk`` only)."""
    return [
        NeighborDatum(int(l), float(adapt_matrix[l, k]), float(noise_variances[l]), regressors[l], desired[l])
        for l in np.flatnonzero(adapt_matrix[:, k])
    ]


class BatchedDiffusion:
    """All nodes of ``batch`` independent networks advanced together.

    Neighborhoods are padded to a common size with zero-weight slots, which
    leave ``h`` and ``P`` untouched. ``gain_mode='node'`` uses node k's gain
    for all of its neighbors' data; ``'neighbor'`` uses each sender's gain.
    """

    def __init__(
        self,
        algorithm: str,
        combine_matrix: np.ndarray,
        adapt_matrix: np.ndarray,
        noise_variances: np.ndarray,
        filter_length: int,
        batch: int,
        config: AlgorithmConfig = AlgorithmConfig(),
        spec: QuantizerSpec | None = None,
        gain_mode: str = "node",
        variance_smoothing: float | None = None,
    ):
        if algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
        if gain_mode not in ("node", "neighbor"):
            raise ValueError("gain_mode must be 'node' or 'neighbor'")
        n = combine_matrix.shape[0]
        self.algorithm = algorithm
        self.A = np.asarray(combine_matrix, dtype=float)
        self.config = config
        self.spec = spec
        self.gain_mode = gain_mode
        self.smoothing = variance_smoothing
        supports = [np.flatnonzero(adapt_matrix[:, k]) for k in range(n)]
        width = max(len(s) for s in supports)
        self.slot_node = np.empty((n, width), dtype=int)
        self.slot_weight = np.zeros((n, width))
        for k, s in enumerate(supports):
            self.slot_node[k, :] = k
            self.slot_node[k, : len(s)] = s
            self.slot_weight[k, : len(s)] = adapt_matrix[s, k]
        noise = np.asarray(noise_variances, dtype=float)
        self.slot_noise = np.where(self.slot_weight > 0, noise[self.slot_node], 1.0)
        self.w = np.zeros((batch, n, filter_length), dtype=complex)
        eye = np.eye(filter_length, dtype=complex)
        self.P = np.broadcast_to(config.regularization_delta * eye, (batch, n, filter_length, filter_length)).copy()
        self.variance = np.full((batch, n), np.nan)
        self.gain = np.ones((batch, n))
        self.iteration = -1

    def _refresh_gain(self, xq: np.ndarray) -> None:
        if self.spec is None or self.algorithm == "drls":
            return
        power = np.sum((xq * xq.conj()).real, axis=-1) / xq.shape[-1]
        current = np.where(power > 0, power * (1.0 + distortion_factor(self.spec.bits)), VARIANCE_FLOOR)
        if self.smoothing is None or self.iteration < 0:
            self.variance = current
        else:
            self.variance = self.smoothing * self.variance + (1.0 - self.smoothing) * current
        self.gain = gain_diagonal(self.spec, self.variance)

    def _slot_gain(self, s: int) -> np.ndarray:
        if self.gain_mode == "node":
            return self.gain
        return self.gain[:, self.slot_node[:, s]]

    def step(self, xq: np.ndarray, dq: np.ndarray) -> np.ndarray:
        """Advance one iteration with quantized regressors (B, N, M) and desired (B, N)."""
        self._refresh_gain(xq)
        h = self.w.copy()
        if self.algorithm == "qa-lms":
            update = np.zeros_like(h)
            for s in range(self.slot_node.shape[1]):
                x = xq[:, self.slot_node[:, s], :]
                d = dq[:, self.slot_node[:, s]]
                err = d - self._slot_gain(s) * np.einsum("bni,bni->bn", self.w.conj(), x)
                update += self.slot_weight[None, :, s, None] * x * np.conj(err)[..., None]
            h = h + self.config.lms_step * update
        else:
            P = self.P / self.config.forgetting
            for s in range(self.slot_node.shape[1]):
                x = xq[:, self.slot_node[:, s], :]
                d = dq[:, self.slot_node[:, s]]
                c = self.slot_weight[:, s]
                Px = np.einsum("bnij,bnj->bni", P, x)
                den = self.slot_noise[:, s] + c * np.einsum("bni,bni->bn", x.conj(), Px).real
                err = d - self._slot_gain(s) * np.einsum("bni,bni->bn", h.conj(), x)
                coef = c / den
                h = h + coef[..., None] * Px * np.conj(err)[..., None]
                P = P - coef[..., None, None] * (Px[..., :, None] * Px.conj()[..., None, :])
            self.P = 0.5 * (P + np.swapaxes(P, -1, -2).conj())
        self.iteration += 1
        if not np.all(np.isfinite(h)):
            bad = np.argwhere(~np.isfinite(h).all(axis=-1))[0]
            raise DivergenceError(
                f"non-finite estimate at node {bad[1]}, iteration {self.iteration}",
                node=int(bad[1]),
                iteration=self.iteration,
                trial=int(bad[0]),
            )
        self.h = h
        self.w = np.einsum("lk,blm->bkm", self.A, h)
        return self.w
