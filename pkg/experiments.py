"""
Experiments for the Mesh Watermarking Toolkit
Coded error-rate sweeps, capacity grids and vertex-survival studies under simplification and region deletion
"""

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.sparse.csgraph import dijkstra

from capacity import deletion_channel_capacity
from channel import DeletionChannelSpec, apply_deletion_channel
from ldpc import DEFAULT_MAX_ITER, LdpcCode, encode, sp_decode
from mesh_attacks import SurvivalMap, deletion_pattern, region_delete, simplify_mesh
from mesh_core import Mesh
from runlength_code import RunAlphabet, bits_to_symbols, parse_runs, rl_encode, rl_llr
from vertex_stability import StabilityConfig, select_embedding_vertices, stability_rank

logger = logging.getLogger(__name__)

DEFAULT_P_D = (0.05, 0.04, 0.03, 0.02, 0.01)
DEFAULT_CAPACITY_P_D = tuple(round(0.01 * i, 2) for i in range(1, 11))
DEFAULT_ALPHABET_BITS = (1, 2, 3, 4)
# Seven simplification levels, from untouched to 10% of the faces
DEFAULT_FACE_FRACTIONS = (1.0, 0.85, 0.7, 0.55, 0.4, 0.25, 0.1)


def frame_seed(master: int, point: int, frame: int) -> int:
    """Seed of one simulated frame; independent of how frames are scheduled"""
    digest = hashlib.sha256(f"{master}:{point}:{frame}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class FrameOutcome:
    bit_errors: int
    frame_error: bool
    iterations: int
    converged: bool


@dataclass(frozen=True)
class SweepRow:
    p_d: float
    frames: int
    bit_errors: int
    frame_errors: int
    ber: float
    fer: float
    mean_iterations: float
    unconverged: int


@dataclass(frozen=True)
class SweepReport:
    rows: List[SweepRow]
    n: int
    k: int
    rate: float
    effective_rate: float

    def as_dicts(self) -> List[Dict[str, object]]:
        return [asdict(row) for row in self.rows]


def simulate_frame(code: LdpcCode, alphabet: RunAlphabet, spec: DeletionChannelSpec, rng: np.random.Generator,
                   max_iter: int = DEFAULT_MAX_ITER, decoder_p_d: Optional[float] = None) -> FrameOutcome:
    """Random message through encoder, runlength modulator, deletion channel and decoder"""
    b = alphabet.bits_per_symbol
    message = rng.integers(0, 2, size=code.k)
    codeword = encode(code, message)
    symbols = bits_to_symbols(np.concatenate([codeword, np.zeros(-code.n % b, dtype=np.int8)]), b)
    received, _ = apply_deletion_channel(rl_encode(symbols, alphabet), spec, rng)
    llr = rl_llr(parse_runs(received), alphabet, spec.p_d if decoder_p_d is None else decoder_p_d,
                 s_d=spec.s_d, strict=False)[:code.n]
    result = sp_decode(code, llr, max_iter)
    errors = int(np.count_nonzero(code.message_from_codeword(result.bits) != message))
    return FrameOutcome(errors, errors > 0, result.iterations, result.converged)


def run_sweep(code: LdpcCode, alphabet: RunAlphabet, p_d_values: Sequence[float] = DEFAULT_P_D,
              frames: int = 1000, seed: int = 0, max_iter: int = DEFAULT_MAX_ITER, workers: int = 1) -> SweepReport:
    """BER and FER of the coded runlength system over a list of deletion probabilities"""
    if frames < 1:
        raise ValueError("frames must be positive")
    rows = []
    for point, p_d in enumerate(p_d_values):
        spec = DeletionChannelSpec(p_d, alphabet.s_d)

        def one(frame: int) -> FrameOutcome:
            return simulate_frame(code, alphabet, spec, np.random.default_rng(frame_seed(seed, point, frame)),
                                  max_iter)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(one, range(frames)))
        else:
            outcomes = [one(frame) for frame in range(frames)]
        bit_errors = sum(o.bit_errors for o in outcomes)
        frame_errors = sum(o.frame_error for o in outcomes)
        row = SweepRow(p_d, frames, bit_errors, frame_errors, bit_errors / (frames * code.k), frame_errors / frames,
                       float(np.mean([o.iterations for o in outcomes])), sum(not o.converged for o in outcomes))
        logger.info("p_d=%.3f: BER=%.3e FER=%.3e over %d frames", p_d, row.ber, row.fer, frames)
        rows.append(row)
    rate = code.rate
    return SweepReport(rows, code.n, code.k, rate, rate * alphabet.rate_factor())


def capacity_grid(bits_per_symbol: Sequence[int] = DEFAULT_ALPHABET_BITS,
                  p_d_values: Sequence[float] = DEFAULT_CAPACITY_P_D, s_d: int = 1) -> List[Dict[str, object]]:
    """Capacity per unit cost for every (p_d, alphabet size) pair"""
    rows = []
    for p_d in p_d_values:
        for b in bits_per_symbol:
            result = deletion_channel_capacity(b, p_d, s_d)
            rows.append({
                "p_d": p_d, "alphabet_size": 2 ** b, "c_unit": result.c_unit, "upper_bound": result.upper_bound,
                "iterations": result.iterations, "converged": result.converged,
                "p_star": ";".join(f"{x:.6f}" for x in result.p_star),
            })
        logger.info("capacity row p_d=%.3f done", p_d)
    return rows


@dataclass(frozen=True)
class SurvivalRow:
    face_fraction: float
    seed: int
    achieved_fraction: float
    vertices_remaining: int
    ranked_deleted: int
    random_deleted: int
    p_hat_ranked: float
    p_hat_random: float
    max_consecutive_ranked: int


def survival_curve(mesh: Mesh, count: int = 1000, fractions: Sequence[float] = DEFAULT_FACE_FRACTIONS,
                   seeds: Sequence[int] = (0,), config: StabilityConfig = StabilityConfig()) -> List[SurvivalRow]:
    """Deletion of ranked against random marks as simplification deepens

    Levels are applied one after another to the previous level's output and the
    survival maps composed, so every level refers to the original indices.
    """
    ranked = select_embedding_vertices(stability_rank(mesh, config), count)
    rows = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        random_marks = rng.choice(mesh.vertex_count, size=count, replace=False)
        current, total = mesh, SurvivalMap.identity(mesh)
        for fraction in sorted(fractions, reverse=True):
            step = min(1.0, fraction * mesh.face_count / max(current.face_count, 1))
            current, survival = simplify_mesh(current, step, seed)
            total = total.then(survival)
            ranked_pattern = deletion_pattern(ranked, total)
            random_pattern = deletion_pattern(random_marks, total)
            rows.append(SurvivalRow(fraction, seed, total.achieved_fraction, current.vertex_count,
                                    int(count - ranked_pattern.survived.sum()),
                                    int(count - random_pattern.survived.sum()),
                                    ranked_pattern.p_hat, random_pattern.p_hat, ranked_pattern.max_consecutive))
            logger.info("seed %d, faces %.2f: ranked p_d %.4f, random p_d %.4f", seed, fraction,
                        ranked_pattern.p_hat, random_pattern.p_hat)
    return rows


@dataclass(frozen=True)
class RegionRow:
    seed: int
    center: int
    radius_hops: int
    total_vertices: int
    deleted_vertices: int
    watermark_length: int
    deleted_marks: int
    max_consecutive: int
    consecutive_pairs: int


def region_study(mesh: Mesh, count: int = 1000, coverage: float = 0.2, seeds: Sequence[int] = (0,),
                 config: StabilityConfig = StabilityConfig()) -> List[RegionRow]:
    """Malicious deletion of a hop-disk covering `coverage` of the vertices around a seeded center"""
    if not 0.0 < coverage < 1.0:
        raise ValueError("coverage must lie in (0, 1)")
    marks = select_embedding_vertices(stability_rank(mesh, config), count)
    rows = []
    for seed in seeds:
        center = int(np.random.default_rng(seed).integers(mesh.vertex_count))
        hops = dijkstra(mesh.adjacency, directed=False, indices=center, unweighted=True)
        finite = np.sort(hops[np.isfinite(hops)])
        radius = int(finite[min(int(np.ceil(coverage * mesh.vertex_count)), len(finite)) - 1])
        _, survival = region_delete(mesh, center, radius)
        pattern = deletion_pattern(marks, survival)
        rows.append(RegionRow(seed, center, radius, mesh.vertex_count, survival.deleted_count, count,
                              int(count - pattern.survived.sum()), pattern.max_consecutive,
                              pattern.consecutive_pairs))
        logger.info("region around %d (%d hops) deleted %d vertices and %d marks", center, radius,
                    survival.deleted_count, rows[-1].deleted_marks)
    return rows
