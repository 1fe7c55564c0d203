"""
LDPC Codes for the Mesh Watermarking Toolkit
Latin-square code construction, alist exchange, systematic encoding and sum-product decoding
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import galois
import numpy as np
from scipy import sparse

from watermark_errors import CapabilityError, ConfigError, MeshFormatError

logger = logging.getLogger(__name__)

GF2 = galois.GF(2)

# Saturation of decoder messages
MESSAGE_CLIP = 25.0
# Clipping before arctanh
ONE = 1.0 - 1e-12

DEFAULT_MAX_ITER = 50

# Named (q, mu, eta) constructions: the two rate classes used by the experiments and a toy code
CODE_PRESETS: Dict[str, Tuple[int, int, int]] = {
    "code-1": (105, 3, 21),
    "code-2": (61, 3, 14),
    "toy": (5, 2, 3),
}


@dataclass(frozen=True, eq=False)
class LatinSquare:
    """q x q array in which every symbol occurs once per row and once per column"""
    cells: np.ndarray

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.int64)
        if cells.ndim != 2 or cells.shape[0] != cells.shape[1] or cells.shape[0] < 2:
            raise ValueError("a Latin square is a q x q array with q >= 2")
        symbols = np.sort(cells[0])
        for line in (*cells, *cells.T):
            if not np.array_equal(np.sort(line), symbols):
                raise ValueError("every symbol must occur exactly once in each row and column")
        if len(np.unique(symbols)) != len(symbols):
            raise ValueError("row symbols must be distinct")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def order(self) -> int:
        return len(self.cells)

    @property
    def symbols(self) -> np.ndarray:
        return np.sort(self.cells[0])


def cayley_latin_square(q: int) -> LatinSquare:
    """Addition table of the cyclic group Z_q"""
    if q < 2:
        raise ValueError(f"Latin square order must be at least 2, got {q}")
    i, j = np.indices((q, q))
    return LatinSquare((i + j) % q)


def perm_from_symbol(square: LatinSquare, symbol: int) -> sparse.csr_matrix:
    """Permutation matrix with ones exactly where the square holds `symbol`"""
    if symbol not in set(square.symbols.tolist()):
        raise ValueError(f"symbol {symbol} does not occur in the square")
    rows, cols = np.nonzero(square.cells == symbol)
    return sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(square.order, square.order))


def assemble_H(W: Sequence[Sequence[int]], square: LatinSquare) -> sparse.csr_matrix:
    """Array of permutation blocks: block (i, j) is perm_from_symbol(square, W[i][j])"""
    W = np.atleast_2d(np.asarray(W, dtype=np.int64))
    if W.ndim != 2 or W.size == 0:
        raise ValueError("W must be a non-empty 2-D array of symbols")
    blocks = [[perm_from_symbol(square, int(w)) for w in row] for row in W]
    return sparse.bmat(blocks, format="csr", dtype=np.int8)


def girth_at_least_6(H) -> bool:
    """True when no two columns of H share more than one row"""
    H = sparse.csc_matrix(H, dtype=np.int64)
    overlap = (H.T @ H).tocsr()
    overlap = overlap - sparse.diags(overlap.diagonal())
    return overlap.nnz == 0 or overlap.max() <= 1


def _four_cycle_free(W: np.ndarray, q: int, i: int, j: int, value: int) -> bool:
    # For cyclic blocks, rows (i, i2) and columns (j, j2) close a 4-cycle iff
    # w[i,j] - w[i,j2] == w[i2,j] - w[i2,j2] (mod q)
    for i2 in range(i):
        for j2 in range(W.shape[1]):
            if j2 == j or W[i, j2] < 0 or W[i2, j2] < 0:
                continue
            if (value - W[i, j2] - W[i2, j] + W[i2, j2]) % q == 0:
                return False
    return True


def _search_W(q: int, mu: int, eta: int, rng: np.random.Generator) -> Optional[np.ndarray]:
    W = np.full((mu, eta), -1, dtype=np.int64)
    for i in range(mu):
        for j in range(eta):
            allowed = [s for s in rng.permutation(q) if _four_cycle_free(W, q, i, j, int(s))]
            if not allowed:
                return None
            W[i, j] = allowed[0]
    return W


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Binary LDPC code with a precomputed systematic encoder

    Codeword bits at `info_columns` carry the message; the bit at pivot_columns[r]
    is parity_map[r] . message over GF(2).
    """
    H: sparse.csr_matrix
    rank: int
    info_columns: np.ndarray
    pivot_columns: np.ndarray
    parity_map: np.ndarray
    q: int = 0
    mu: int = 0
    eta: int = 0
    W: Optional[np.ndarray] = field(default=None, repr=False)
    seed: Optional[int] = None

    @classmethod
    def from_parity_check(cls, H, **construction) -> "LdpcCode":
        """Row-reduce H over GF(2) and record the systematic column split"""
        H = sparse.csr_matrix(H, dtype=np.int8)
        H.sort_indices()
        if np.any(H.data != 1):
            raise ValueError("parity-check matrix must be binary")
        reduced = np.asarray(GF2(H.toarray().astype(np.uint8)).row_reduce(), dtype=np.uint8)
        rank = int(reduced.any(axis=1).sum())
        pivots = np.argmax(reduced[:rank] != 0, axis=1).astype(np.int64)
        info = np.setdiff1d(np.arange(H.shape[1]), pivots).astype(np.int64)
        parity_map = reduced[:rank][:, info]
        logger.debug("parity-check matrix %dx%d has GF(2) rank %d", H.shape[0], H.shape[1], rank)
        return cls(H, rank, info, pivots, parity_map, **construction)

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def k(self) -> int:
        return self.n - self.rank

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def column_weights(self) -> np.ndarray:
        return np.asarray(self.H.sum(axis=0)).ravel()

    @property
    def row_weights(self) -> np.ndarray:
        return np.asarray(self.H.sum(axis=1)).ravel()

    @property
    def design_rate(self) -> float:
        """1 - d_v/d_c from the mean degrees"""
        return 1.0 - self.column_weights.mean() / self.row_weights.mean()

    @cached_property
    def girth_ok(self) -> bool:
        return girth_at_least_6(self.H)

    @cached_property
    def decoder(self) -> "SumProductDecoder":
        return SumProductDecoder(self.H)

    def message_from_codeword(self, codeword: Sequence[int]) -> np.ndarray:
        return np.asarray(codeword, dtype=np.int8)[self.info_columns]

    def summary(self) -> Dict[str, object]:
        """Parameters reported by the codegen command"""
        return {
            "n": self.n, "m": self.m, "k": self.k, "rank": self.rank,
            "rate": self.rate, "design_rate": self.design_rate, "effective_rate": 0.4 * self.rate,
            "d_v": int(self.column_weights.max(initial=0)), "d_c": int(self.row_weights.max(initial=0)),
            "q": self.q, "mu": self.mu, "eta": self.eta, "seed": self.seed, "girth_at_least_6": self.girth_ok,
        }


def construct_code(q: int, mu: int, eta: int, search_seed: int = 0, max_attempts: int = 100) -> LdpcCode:
    """Cyclic Latin-square LDPC code with column weight mu, row weight eta and girth >= 6"""
    if mu < 1 or eta < 1:
        raise ConfigError("mu and eta must be positive")
    if mu > eta:
        raise ConfigError(f"mu={mu} exceeds eta={eta}; the code rate would not be positive")
    if eta > q:
        raise ConfigError(f"eta={eta} exceeds q={q}; not enough distinct symbols per block row")
    square = cayley_latin_square(q)
    rng = np.random.default_rng(search_seed)
    for attempt in range(1, max_attempts + 1):
        W = _search_W(q, mu, eta, rng)
        if W is None:
            logger.debug("W search attempt %d dead-ended", attempt)
            continue
        H = assemble_H(W, square)
        if not girth_at_least_6(H):
            continue
        code = LdpcCode.from_parity_check(H, q=q, mu=mu, eta=eta, W=W, seed=search_seed)
        logger.info("constructed (q=%d, mu=%d, eta=%d) code after %d attempt(s): n=%d k=%d R=%.4f",
                    q, mu, eta, attempt, code.n, code.k, code.rate)
        return code
    raise CapabilityError(f"no 4-cycle-free W found for q={q}, mu={mu}, eta={eta} in {max_attempts} attempts")


def preset_code(name: str, search_seed: int = 0) -> LdpcCode:
    try:
        q, mu, eta = CODE_PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown code preset {name!r}; choose from {', '.join(CODE_PRESETS)}") from None
    return construct_code(q, mu, eta, search_seed)


def syndrome(H, x: Sequence[int]) -> np.ndarray:
    """x H^T over GF(2)"""
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (H.shape[1],):
        raise ValueError(f"word length {x.size} does not match code length {H.shape[1]}")
    return (np.asarray(H @ x).ravel() % 2).astype(np.int8)


def is_codeword(H, x: Sequence[int]) -> bool:
    return not syndrome(H, x).any()


def encode(code: LdpcCode, message: Sequence[int]) -> np.ndarray:
    """Systematic codeword carrying `message` at the code's information columns"""
    message = np.asarray(message, dtype=np.int64)
    if message.shape != (code.k,):
        raise ValueError(f"message must have {code.k} bits, got {message.size}")
    if np.any((message != 0) & (message != 1)):
        raise ValueError("message bits must be 0 or 1")
    codeword = np.zeros(code.n, dtype=np.int8)
    codeword[code.info_columns] = message
    codeword[code.pivot_columns] = (code.parity_map.astype(np.int64) @ message) % 2
    return codeword


@dataclass(frozen=True, eq=False)
class DecodeResult:
    bits: np.ndarray
    converged: bool
    iterations: int
    posterior: np.ndarray


class SumProductDecoder:
    """Tanh-rule belief propagation on the Tanner graph of H

    Messages live on the edges of H in check-major order. Check updates use the
    padded check view with exclusive prefix/suffix products; variable updates sum
    over edges with bincount. Each decode call keeps its own message arrays.
    """

    def __init__(self, H):
        H = sparse.csr_matrix(H, dtype=np.int8)
        H.sort_indices()
        self.H = H
        self.m, self.n = H.shape
        degrees = np.diff(H.indptr)
        self.check_index = np.repeat(np.arange(self.m), degrees)
        self.variable_index = H.indices.astype(np.int64)
        self.slot = np.arange(H.nnz) - H.indptr[self.check_index]
        self.dc_max = int(degrees.max(initial=0))

    def _check_update(self, v2c: np.ndarray) -> np.ndarray:
        t = np.ones((self.m, self.dc_max))
        t[self.check_index, self.slot] = np.tanh(v2c / 2.0)
        ones = np.ones((self.m, 1))
        prefix = np.cumprod(np.hstack([ones, t[:, :-1]]), axis=1)
        suffix = np.cumprod(np.hstack([ones, t[:, :0:-1]]), axis=1)[:, ::-1]
        extrinsic = (prefix * suffix)[self.check_index, self.slot]
        c2v = 2.0 * np.arctanh(np.clip(extrinsic, -ONE, ONE))
        return np.clip(c2v, -MESSAGE_CLIP, MESSAGE_CLIP)

    def decode(self, llr: Sequence[float], max_iter: int = DEFAULT_MAX_ITER) -> DecodeResult:
        """Decode channel LLRs log P(0)/P(1); stops as soon as the hard decision is a codeword"""
        llr = np.asarray(llr, dtype=np.float64)
        if llr.shape != (self.n,):
            raise ValueError(f"expected {self.n} LLRs, got {llr.size}")
        if max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        llr = np.clip(llr, -MESSAGE_CLIP, MESSAGE_CLIP)
        bits = (llr < 0).astype(np.int8)
        if is_codeword(self.H, bits):
            return DecodeResult(bits, True, 0, llr.copy())

        v2c = llr[self.variable_index]
        posterior = llr
        for iteration in range(1, max_iter + 1):
            c2v = self._check_update(v2c)
            posterior = llr + np.bincount(self.variable_index, weights=c2v, minlength=self.n)
            bits = (posterior < 0).astype(np.int8)
            if is_codeword(self.H, bits):
                logger.debug("sum-product converged after %d iteration(s)", iteration)
                return DecodeResult(bits, True, iteration, posterior)
            v2c = np.clip(posterior[self.variable_index] - c2v, -MESSAGE_CLIP, MESSAGE_CLIP)
        logger.debug("sum-product stopped after %d iterations without a codeword", max_iter)
        return DecodeResult(bits, False, max_iter, posterior)


def sp_decode(code: Union[LdpcCode, sparse.spmatrix], llr: Sequence[float],
              max_iter: int = DEFAULT_MAX_ITER) -> DecodeResult:
    decoder = code.decoder if isinstance(code, LdpcCode) else SumProductDecoder(code)
    return decoder.decode(llr, max_iter)


def write_alist(H, path: Union[str, Path]) -> None:
    """Write a parity-check matrix in alist format (1-based, zero padded)"""
    csc = sparse.csc_matrix(H, dtype=np.int8)
    csr = sparse.csr_matrix(H, dtype=np.int8)
    csc.sort_indices()
    csr.sort_indices()
    m, n = csr.shape
    col_deg = np.diff(csc.indptr)
    row_deg = np.diff(csr.indptr)
    max_col, max_row = int(col_deg.max(initial=0)), int(row_deg.max(initial=0))

    def padded(indices, width):
        values = [str(i + 1) for i in indices] + ["0"] * (width - len(indices))
        return " ".join(values)

    lines = [f"{n} {m}", f"{max_col} {max_row}",
             " ".join(map(str, col_deg)), " ".join(map(str, row_deg))]
    lines += [padded(csc.indices[csc.indptr[j]:csc.indptr[j + 1]], max_col) for j in range(n)]
    lines += [padded(csr.indices[csr.indptr[i]:csr.indptr[i + 1]], max_row) for i in range(m)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _int_line(lines, number: int):
    try:
        return [int(token) for token in lines[number - 1].split()]
    except IndexError:
        raise MeshFormatError("alist file ends early", number) from None
    except ValueError:
        raise MeshFormatError("expected integers", number) from None


def read_alist(path: Union[str, Path]) -> sparse.csr_matrix:
    """Parse an alist file into a sparse parity-check matrix

    Column and row neighbor lists must agree; zero padding is skipped.
    """
    lines = [line for line in Path(path).read_text(encoding="ascii").splitlines()]
    header = _int_line(lines, 1)
    if len(header) != 2 or min(header) < 1:
        raise MeshFormatError("first line must hold n and m", 1)
    n, m = header
    col_deg = _int_line(lines, 3)
    row_deg = _int_line(lines, 4)
    if len(col_deg) != n or len(row_deg) != m:
        raise MeshFormatError("degree lists do not match n and m", 3 if len(col_deg) != n else 4)

    rows, cols = [], []
    for j in range(n):
        number = 5 + j
        neighbors = [i for i in _int_line(lines, number) if i != 0]
        if len(neighbors) != col_deg[j]:
            raise MeshFormatError(f"column {j + 1} lists {len(neighbors)} rows, degree says {col_deg[j]}", number)
        if any(not 1 <= i <= m for i in neighbors):
            raise MeshFormatError(f"row index out of range in column {j + 1}", number)
        rows += [i - 1 for i in neighbors]
        cols += [j] * len(neighbors)
    H = sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(m, n))
    if H.nnz and H.max() > 1:
        raise MeshFormatError("a column lists the same row twice")

    # Row lists are optional in some writers but must agree when present
    if len(lines) >= 4 + n + m:
        for i in range(m):
            number = 5 + n + i
            neighbors = sorted(c - 1 for c in _int_line(lines, number) if c != 0)
            if neighbors != sorted(H.indices[H.indptr[i]:H.indptr[i + 1]].tolist()):
                raise MeshFormatError(f"row {i + 1} disagrees with the column lists", number)
    return H


def load_code(path: Union[str, Path]) -> LdpcCode:
    H = read_alist(path)
    code = LdpcCode.from_parity_check(H)
    logger.info("loaded %s: n=%d k=%d R=%.4f", path, code.n, code.k, code.rate)
    return code
