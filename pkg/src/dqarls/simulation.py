"""System-identification experiment over a diffusion network.

Every trial draws regressors and noise once per node; each (algorithm, bit
depth) pair then sees the same realizations, quantized as needed.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .adaptive import ALGORITHMS, AlgorithmConfig, BatchedDiffusion, DivergenceError
from .network import ADAPTATION_MODES, Topology, adaptation_weights, metropolis_weights, random_geometric
from .quantizer import QuantizerSpec, design_quantizer, quantize_complex

log = logging.getLogger(__name__)

DB_FLOOR = -200.0
Bits = Optional[int]  # None is full resolution


@dataclass(frozen=True)
class NetworkConfig:
    radius: float = 0.35
    adaptation: str = "uniform"


@dataclass(frozen=True)
class ProfileConfig:
    input_variance_range: tuple[float, float] = (0.5, 2.0)
    noise_variance_range: tuple[float, float] = (1e-3, 1e-2)
    input_variances: Optional[tuple[float, ...]] = None
    noise_variances: Optional[tuple[float, ...]] = None


@dataclass(frozen=True)
class QuantizerConfig:
    max_iterations: int = 10_000
    tolerance: float = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    node_count: int = 20
    filter_length: int = 8
    forgetting: float = 0.98
    regularization_delta: float = 100.0
    bit_depths: tuple[Bits, ...] = (1, 2, 3, None)
    iterations: int = 1000
    trials: int = 100
    master_seed: int = 20240101
    algorithms: tuple[str, ...] = ("drls", "dqa-rls")
    noise_weighting: str = "oracle"
    gain_mode: str = "node"
    variance_smoothing: Optional[float] = None
    adc_scaling: str = "agc"
    lms_step: float = 0.05
    trial_batch: int = 10
    network: NetworkConfig = field(default_factory=NetworkConfig)
    profiles: ProfileConfig = field(default_factory=ProfileConfig)
    quantizer: QuantizerConfig = field(default_factory=QuantizerConfig)

    def __post_init__(self):
        for name in ("node_count", "filter_length", "iterations", "trials", "trial_batch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.node_count < 2:
            raise ValueError("node_count must be at least 2")
        if not 0 < self.forgetting < 1:
            raise ValueError("forgetting must be in (0, 1)")
        if not self.regularization_delta > 0:
            raise ValueError("regularization_delta must be positive")
        if not self.bit_depths:
            raise ValueError("bit_depths must not be empty")
        for b in self.bit_depths:
            if b is not None and not 1 <= b <= 8:
                raise ValueError(f"bit depth {b} outside 1..8")
        if not self.algorithms:
            raise ValueError("algorithms must not be empty")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}; expected one of {ALGORITHMS}")
        if self.noise_weighting not in ("oracle", "unweighted"):
            raise ValueError("noise_weighting must be 'oracle' or 'unweighted'")
        if self.gain_mode not in ("node", "neighbor"):
            raise ValueError("gain_mode must be 'node' or 'neighbor'")
        if self.adc_scaling not in ("agc", "fixed"):
            raise ValueError("adc_scaling must be 'agc' or 'fixed'")
        if self.variance_smoothing is not None and not 0 <= self.variance_smoothing <= 1:
            raise ValueError("variance_smoothing must be in [0, 1]")
        if self.network.adaptation not in ADAPTATION_MODES:
            raise ValueError(f"network.adaptation must be one of {ADAPTATION_MODES}")
        prof = self.profiles
        for name in ("input_variance_range", "noise_variance_range"):
            lo, hi = getattr(prof, name)
            if not 0 < lo <= hi:
                raise ValueError(f"profiles.{name} must satisfy 0 < low <= high")
        for name in ("input_variances", "noise_variances"):
            values = getattr(prof, name)
            if values is not None:
                if len(values) != self.node_count:
                    raise ValueError(f"profiles.{name} needs {self.node_count} entries")
                if min(values) <= 0:
                    raise ValueError(f"profiles.{name} must be positive")

    @property
    def algorithm_config(self) -> AlgorithmConfig:
        return AlgorithmConfig(self.forgetting, self.regularization_delta, self.lms_step)


@dataclass
class MsdCurve:
    algorithm: str
    bits: Bits
    msd: np.ndarray  # linear, per iteration

    @property
    def msd_db(self) -> np.ndarray:
        return to_db(self.msd)

    def steady_state_db(self, fraction: float = 0.1) -> float:
        """Mean linear MSD over the last ``fraction`` of iterations, in dB."""
        tail = max(1, int(round(fraction * self.msd.size)))
        return float(to_db(np.mean(self.msd[-tail:])))


@dataclass(frozen=True)
class Scenario:
    """Everything shared by all trials of one experiment."""

    topology: Topology
    combine: np.ndarray
    adapt: np.ndarray
    input_variances: np.ndarray
    noise_variances: np.ndarray
    system: np.ndarray
    specs: dict
    trial_seeds: tuple


def to_db(msd):
    with np.errstate(divide="ignore"):
        return np.maximum(10.0 * np.log10(msd), DB_FLOOR)


def bits_label(bits: Bits) -> str:
    return "full" if bits is None else str(bits)


def generate_system(filter_length: int, seed) -> np.ndarray:
    """Random complex Gaussian impulse response with unit Euclidean norm."""
    if filter_length < 1:
        raise ValueError("filter_length must be positive")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(filter_length) + 1j * rng.standard_normal(filter_length)
    return w / np.linalg.norm(w)


def generate_node_profiles(
    node_count: int,
    seed,
    input_range: tuple[float, float] = (0.5, 2.0),
    noise_range: tuple[float, float] = (1e-3, 1e-2),
) -> tuple[np.ndarray, np.ndarray]:
    """Per-node input and noise variances, uniform in the given ranges."""
    rng = np.random.default_rng(seed)
    sx = rng.uniform(*input_range, size=node_count)
    sv = rng.uniform(*noise_range, size=node_count)
    return sx, sv


def _seed_tree(config: ExperimentConfig):
    root = np.random.SeedSequence(config.master_seed)
    topo, profiles, system, trials = root.spawn(4)
    return topo, profiles, system, tuple(trials.spawn(config.trials))


def build_scenario(config: ExperimentConfig) -> Scenario:
    topo_seed, profile_seed, system_seed, trial_seeds = _seed_tree(config)
    topology = random_geometric(config.node_count, config.network.radius, topo_seed)
    prof = config.profiles
    sx, sv = generate_node_profiles(
        config.node_count, profile_seed, prof.input_variance_range, prof.noise_variance_range
    )
    if prof.input_variances is not None:
        sx = np.asarray(prof.input_variances, dtype=float)
    if prof.noise_variances is not None:
        sv = np.asarray(prof.noise_variances, dtype=float)
    specs = {
        b: design_quantizer(b, max_iterations=config.quantizer.max_iterations, tolerance=config.quantizer.tolerance)
        for b in config.bit_depths
        if b is not None
    }
    return Scenario(
        topology=topology,
        combine=metropolis_weights(topology),
        adapt=adaptation_weights(topology, config.network.adaptation),
        input_variances=sx,
        noise_variances=sv,
        system=generate_system(config.filter_length, system_seed),
        specs=specs,
        trial_seeds=trial_seeds,
    )


def trial_signals(scenario: Scenario, iterations: int, trial_seed):
    """Unquantized regressors (T, N, M) and desired signals (T, N) of one trial.

    Each node draws its regressors and its noise from separate substreams.
    """
    n = scenario.input_variances.size
    m = scenario.system.size
    if not isinstance(trial_seed, np.random.SeedSequence):
        trial_seed = np.random.SeedSequence(trial_seed)
    # spawn() is stateful; derive the children from the key so repeated calls agree
    streams = [
        np.random.SeedSequence(trial_seed.entropy, spawn_key=trial_seed.spawn_key + (j,))
        for j in range(2 * n)
    ]
    X = np.empty((iterations, n, m), dtype=complex)
    V = np.empty((iterations, n), dtype=complex)
    for k in range(n):
        gx = np.random.default_rng(streams[2 * k]).standard_normal((iterations, m, 2))
        gv = np.random.default_rng(streams[2 * k + 1]).standard_normal((iterations, 2))
        X[:, k, :] = (gx[..., 0] + 1j * gx[..., 1]) * np.sqrt(scenario.input_variances[k] / 2)
        V[:, k] = (gv[:, 0] + 1j * gv[:, 1]) * np.sqrt(scenario.noise_variances[k] / 2)
    D = X @ scenario.system.conj() + V
    return X, D


def quantize_signals(spec: QuantizerSpec | None, X, D, input_variances, adc_scaling: str = "agc"):
    """ADC outputs for both converters of every node.

    With ``agc`` each node's converters are scaled by the node's input standard
    deviation; ``fixed`` applies the unit-variance design directly.
    """
    if spec is None:
        return X, D
    if adc_scaling == "agc":
        scale = np.sqrt(np.asarray(input_variances))
    else:
        scale = np.ones_like(input_variances)
    XQ = quantize_complex(spec, X, scale[..., :, None])
    DQ = quantize_complex(spec, D, scale)
    return XQ, DQ


def _run_batch(config, scenario, algorithm, bits, XQ, DQ, trial_offset=0) -> np.ndarray:
    """Squared deviations (B, T, N) for stacked quantized signals (B, T, N, M)."""
    batch = XQ.shape[0]
    noise = scenario.noise_variances if config.noise_weighting == "oracle" else np.ones(config.node_count)
    engine = BatchedDiffusion(
        algorithm,
        scenario.combine,
        scenario.adapt,
        noise,
        config.filter_length,
        batch,
        config.algorithm_config,
        spec=None if bits is None else scenario.specs[bits],
        gain_mode=config.gain_mode,
        variance_smoothing=config.variance_smoothing,
    )
    out = np.empty((batch, config.iterations, config.node_count))
    for i in range(config.iterations):
        try:
            w = engine.step(XQ[:, i], DQ[:, i])
        except DivergenceError as exc:
            exc.trial = trial_offset + (exc.trial or 0)
            raise DivergenceError(
                f"{algorithm} ({bits_label(bits)} bits) diverged in trial {exc.trial}: {exc}",
                node=exc.node,
                iteration=exc.iteration,
                trial=exc.trial,
            ) from None
        out[:, i, :] = np.sum(np.abs(w - scenario.system) ** 2, axis=-1)
    return out


def run_trial(config: ExperimentConfig, algorithm: str, bit_depth: Bits, trial_seed, scenario: Scenario | None = None):
    """Squared deviation ``||w_o - w_k(i)||^2`` as a (T, N) array for one trial."""
    scenario = scenario or build_scenario(config)
    if bit_depth is not None and bit_depth not in scenario.specs:
        scenario.specs[bit_depth] = design_quantizer(bit_depth)
    X, D = trial_signals(scenario, config.iterations, trial_seed)
    spec = None if bit_depth is None else scenario.specs[bit_depth]
    XQ, DQ = quantize_signals(spec, X, D, scenario.input_variances, config.adc_scaling)
    return _run_batch(config, scenario, algorithm, bit_depth, XQ[None], DQ[None])[0]


def curve_keys(config: ExperimentConfig) -> list[tuple[str, Bits]]:
    return [(a, b) for a in config.algorithms for b in config.bit_depths]


def _canonical(algorithm: str, bits: Bits) -> tuple[str, Bits]:
    # without quantization the gain is pinned to 1 and DQA-RLS is DRLS
    if bits is None and algorithm == "dqa-rls":
        return ("drls", None)
    return (algorithm, bits)


def _chunk_sums(config, scenario, seeds, offset) -> dict:
    X, D = zip(*(trial_signals(scenario, config.iterations, s) for s in seeds))
    X, D = np.stack(X), np.stack(D)
    quantized = {}
    sums = {}
    for key in curve_keys(config):
        canon = _canonical(*key)
        if canon in sums:
            continue
        algorithm, bits = canon
        if bits not in quantized:
            spec = None if bits is None else scenario.specs[bits]
            quantized[bits] = quantize_signals(spec, X, D, scenario.input_variances, config.adc_scaling)
        sq = _run_batch(config, scenario, algorithm, bits, *quantized[bits], trial_offset=offset)
        sums[canon] = sq.sum(axis=(0, 2))
    return sums


def run_ensemble(config: ExperimentConfig, threads: int = 1, scenario: Scenario | None = None) -> list[MsdCurve]:
    """Ensemble-averaged network MSD, one curve per (algorithm, bit depth).

    Trials are processed in fixed chunks of ``trial_batch`` and reduced in
    chunk order, so the result does not depend on ``threads``.
    """
    scenario = scenario or build_scenario(config)
    seeds = scenario.trial_seeds
    chunks = [(seeds[i : i + config.trial_batch], i) for i in range(0, len(seeds), config.trial_batch)]

    def work(chunk):
        chunk_seeds, offset = chunk
        log.info("trials %d-%d", offset, offset + len(chunk_seeds) - 1)
        return _chunk_sums(config, scenario, chunk_seeds, offset)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    total = {}
    for partial in results:
        for key, value in partial.items():
            total[key] = total[key] + value if key in total else value
    scale = 1.0 / (config.trials * config.node_count)
    return [MsdCurve(a, b, total[_canonical(a, b)] * scale) for a, b in curve_keys(config)]


def curves_csv(curves: Sequence[MsdCurve]) -> str:
    rows = ["iteration,algorithm,bits,msd_db"]
    for curve in curves:
        label = bits_label(curve.bits)
        rows.extend(f"{i},{curve.algorithm},{label},{v:.6f}" for i, v in enumerate(curve.msd_db))
    return "\n".join(rows) + "\n"
