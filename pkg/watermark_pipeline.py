"""
Watermark Pipeline for the Mesh Watermarking Toolkit
Payload -> (distribution transform) -> LDPC -> runlength -> sparse QIM on stable vertices, and back
"""

import csv
import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np

from distribution_transformer import distribution_transform, inverse_transform
from ldpc import DecodeResult, LdpcCode, encode, sp_decode
from mesh_attacks import SurvivalMap
from mesh_core import Mesh, hausdorff, normalization_frame
from qim import DELETED, QimConfig, embed_bits_in_mesh, extract_bits_from_mesh
from runlength_code import RunAlphabet, RunObservation, bits_to_symbols, parse_runs, rl_encode, rl_llr
from vertex_stability import select_embedding_vertices, stability_rank
from watermark_config import WatermarkConfig
from watermark_errors import CapabilityError, ConfigError, MeshFormatError

logger = logging.getLogger(__name__)


SELECTION_HEADER = ["position", "index"]


def selection_digest(selection: Sequence[int]) -> str:
    return hashlib.sha256(np.asarray(selection, dtype="<i8").tobytes()).hexdigest()[:16]


def save_selection(selection: Sequence[int], path: Union[str, Path]) -> None:
    """Embedding order of the marked vertices, for oracle-aligned extraction"""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=SELECTION_HEADER, lineterminator="\n")
        writer.writeheader()
        for position, index in enumerate(selection):
            writer.writerow({"position": position, "index": int(index)})


def load_selection(path: Union[str, Path]) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != SELECTION_HEADER:
            raise MeshFormatError(f"selection header must be {','.join(SELECTION_HEADER)}", 1)
        selection = []
        for number, row in enumerate(reader, start=2):
            try:
                position, index = int(row["position"]), int(row["index"])
            except (TypeError, ValueError):
                raise MeshFormatError("expected two integers", number) from None
            if position != len(selection) or index < 0:
                raise MeshFormatError("positions must count up from 0 and indices be non-negative", number)
            selection.append(index)
    return np.array(selection, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class WatermarkJob:
    """One payload bound to a key, a configuration and a code"""
    payload: np.ndarray
    key: int
    config: WatermarkConfig
    code: LdpcCode

    @property
    def qim(self) -> QimConfig:
        return self.config.with_overrides(key=self.key).qim_config()

    @property
    def alphabet(self) -> RunAlphabet:
        return self.config.alphabet()

    @property
    def symbol_count(self) -> int:
        b = self.alphabet.bits_per_symbol
        return -(-self.code.n // b)

    @property
    def frame_bits(self) -> int:
        """Channel bits reserved per codeword: every symbol at the longest run"""
        return self.symbol_count * max(self.alphabet.run_lengths)

    @property
    def selection_size(self) -> int:
        return self.frame_bits * self.config.L


@dataclass(frozen=True, eq=False)
class EmbedResult:
    marked: Mesh
    job: WatermarkJob
    selection: np.ndarray
    codeword: np.ndarray
    channel_bits: int
    padding: int
    hausdorff: float
    blind_consistent: bool

    def summary(self) -> Dict[str, object]:
        scale = normalization_frame(self.marked, self.job.config.frame).scale_ref
        return {
            "payload_bits": len(self.job.payload),
            "message_padding": self.padding,
            "code_n": self.job.code.n,
            "code_k": self.job.code.k,
            "channel_bits": self.channel_bits,
            "frame_bits": self.job.frame_bits,
            "selected_vertices": len(self.selection),
            "selection_digest": selection_digest(self.selection),
            "hausdorff": self.hausdorff,
            "hausdorff_normalized": self.hausdorff / scale,
            "blind_consistent": self.blind_consistent,
        }


@dataclass(frozen=True, eq=False)
class ExtractResult:
    payload: np.ndarray
    decode: DecodeResult
    runs_observed: int
    runs_expected: int
    # Fraction of marks deleted; known only with a survival map
    p_hat: Optional[float] = None

    @property
    def converged(self) -> bool:
        return self.decode.converged

    def summary(self) -> Dict[str, object]:
        return {
            "payload_bits": len(self.payload),
            "converged": self.decode.converged,
            "iterations": self.decode.iterations,
            "runs_observed": self.runs_observed,
            "runs_expected": self.runs_expected,
            "p_hat": "" if self.p_hat is None else self.p_hat,
        }


class WatermarkPipeline:
    """Embedding and extraction for one configuration, code and key"""

    def __init__(self, config: WatermarkConfig, code: LdpcCode, key: Optional[int] = None):
        self.config = config
        self.code = code
        self.key = config.key if key is None else key
        self.alphabet = config.alphabet()
        self.qim = config.with_overrides(key=self.key).qim_config()

    def job(self, payload: Sequence[int]) -> WatermarkJob:
        return WatermarkJob(np.asarray(payload, dtype=np.int8), self.key, self.config, self.code)

    @property
    def symbol_count(self) -> int:
        return self.job([]).symbol_count

    @property
    def frame_bits(self) -> int:
        return self.job([]).frame_bits

    def _target(self):
        return [self.config.transform_p0, 1.0 - self.config.transform_p0]

    def prepare_message(self, payload: Sequence[int]):
        """k-bit LDPC message carrying the payload, and the number of padding bits"""
        payload = np.asarray(payload, dtype=np.int64)
        if np.any((payload != 0) & (payload != 1)):
            raise ValueError("payload must be bits")
        length = self.config.payload_bits
        if self.config.transform and length == 0:
            raise ConfigError("payload_bits must be set to invert the distribution transform")
        if length and len(payload) != length:
            raise ConfigError(f"payload has {len(payload)} bits but payload_bits = {length}")
        shaped = distribution_transform(payload, self._target()) if self.config.transform else payload
        if len(shaped) > self.code.k:
            raise CapabilityError(f"payload needs {len(shaped)} message bits, the code carries {self.code.k}")
        padding = self.code.k - len(shaped)
        return np.concatenate([shaped, np.zeros(padding, dtype=np.int64)]), padding

    def recover_payload(self, message: np.ndarray) -> np.ndarray:
        length = self.config.payload_bits
        if self.config.transform:
            if length == 0:
                raise ConfigError("payload_bits must be set to invert the distribution transform")
            return inverse_transform(message, self._target(), length)
        return message[:length] if length else message

    def modulate(self, codeword: np.ndarray) -> np.ndarray:
        """Runlength modulation of a codeword zero-padded to whole symbols"""
        b = self.alphabet.bits_per_symbol
        padded = np.concatenate([codeword, np.zeros(self.symbol_count * b - len(codeword), dtype=codeword.dtype)])
        return rl_encode(bits_to_symbols(padded, b), self.alphabet)

    def channel_bits(self, codeword: np.ndarray) -> np.ndarray:
        """Runlength-modulated codeword filled out to frame_bits

        The filler is one run opposite to the last symbol run, so run parsing ends
        the codeword where the filler starts.
        """
        bits = self.modulate(codeword)
        filler = np.full(self.frame_bits - len(bits), 1 - bits[-1], dtype=np.int8)
        return np.concatenate([bits, filler])

    def decode_channel_bits(self, received: Sequence[int]):
        """Run parsing, channel LLRs and sum-product decoding of a received stream"""
        observation = parse_runs(received)
        expected = self.symbol_count
        lengths = observation.lengths[:expected]
        if len(observation) < expected:
            logger.warning("received %d runs where %d were sent; missing runs are erased",
                           len(observation), expected)
        if len(lengths) and observation.polarity_start != self.alphabet.first_polarity:
            logger.warning("first received run has the wrong polarity; the stream is misaligned")
        llr = rl_llr(RunObservation(lengths, observation.polarity_start), self.alphabet, self.config.p_d,
                     strict=False)
        llr = np.concatenate([llr, np.zeros(expected * self.alphabet.bits_per_symbol - len(llr))])[:self.code.n]
        return sp_decode(self.code, llr, self.config.max_iter), len(observation)

    def select(self, mesh: Mesh, count: Optional[int] = None) -> np.ndarray:
        count = self.job([]).selection_size if count is None else count
        ranking = stability_rank(mesh, self.config.stability_config())
        return select_embedding_vertices(ranking, count, self.key, self.config.interleave, self.config.order)

    def embed(self, mesh: Mesh, payload: Sequence[int]) -> EmbedResult:
        """Mark the mesh; the selection is re-derived from the marked mesh until blind extraction reproduces it"""
        job = self.job(payload)
        message, padding = self.prepare_message(job.payload)
        codeword = encode(self.code, message)
        bits = self.channel_bits(codeword)
        count = job.selection_size
        selection = self.select(mesh, count)
        consistent = False
        for attempt in range(1, self.config.refine_passes + 1):
            marked = embed_bits_in_mesh(mesh, selection, bits, self.qim)
            blind = self.select(marked, count)
            if np.array_equal(blind, selection):
                consistent = True
                break
            logger.debug("selection pass %d: %d vertices moved in the blind selection",
                         attempt, int(np.count_nonzero(blind != selection)))
            if attempt < self.config.refine_passes:
                selection = blind
        if not consistent:
            logger.warning("blind selection of the marked mesh differs from the embedding selection; "
                           "extract with the saved selection")
        distortion = hausdorff(mesh.vertices, marked.vertices)
        logger.info("embedded %d payload bits in %d vertices (Hausdorff %.3g)", len(job.payload), count, distortion)
        return EmbedResult(marked, job, selection, codeword, len(self.modulate(codeword)),
                           padding, distortion, consistent)

    def extract(self, mesh: Mesh, selection: Optional[Sequence[int]] = None,
                survival: Optional[SurvivalMap] = None) -> ExtractResult:
        """Recover the payload

        Without a selection the vertices are re-ranked on `mesh` (blind). With the
        embedding selection and the attack's survival map, marks are located
        through the map and deleted ones drop out of the stream (oracle).
        """
        p_hat = None
        if selection is None:
            located = self.select(mesh)
        else:
            located = np.asarray(selection, dtype=np.int64)
            if survival is not None:
                located = survival.map_selection(located)
                p_hat = float(np.mean(located < 0)) if len(located) else 0.0
        bits = extract_bits_from_mesh(mesh, located, self.qim)
        received = bits[bits != DELETED]
        decoded, runs = self.decode_channel_bits(received)
        if not decoded.converged:
            logger.warning("decoder did not converge in %d iterations; payload is a best effort", decoded.iterations)
        payload = self.recover_payload(self.code.message_from_codeword(decoded.bits))
        return ExtractResult(payload, decoded, runs, self.symbol_count, p_hat)
