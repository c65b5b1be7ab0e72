"""Discrete frame tokens: k-means codebooks and residual vector quantization.

Training is deterministic for a given seed. Distances are evaluated as
explicit squared differences (not the expanded dot-product form) so that
exact ties stay exact and ``argmin`` picks the lowest index.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, FrameFileError, InsufficientDataError, TokenRangeError
from .features import FRAME_KINDS, FrameMatrix

_CB_MAGIC = b"MKCB"
_CHUNK = 4096
_WCSS_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class Codebook:
    centroids: np.ndarray
    feature_kind: str = "logmel"
    seed: int = 0
    wcss_history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1:
            raise DimensionError("centroids must be a K x D matrix with K >= 1")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


@dataclass(frozen=True, eq=False)
class RVQCodebook:
    stages: tuple
    seed: int = 0

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise DimensionError("an RVQ codebook needs at least one stage")
        if len({s.dim for s in stages}) != 1:
            raise DimensionError("all RVQ stages must share the feature dimension")
        object.__setattr__(self, "stages", stages)

    @property
    def dim(self) -> int:
        return self.stages[0].dim

    @property
    def feature_kind(self) -> str:
        return self.stages[0].feature_kind


@dataclass(frozen=True, eq=False)
class TokenSequence:
    streams: np.ndarray  # S x T
    codebook_id: str = ""

    def __post_init__(self):
        s = np.asarray(self.streams, dtype=np.int64)
        if s.ndim != 2:
            raise DimensionError("token streams must be an S x T matrix")
        s.setflags(write=False)
        object.__setattr__(self, "streams", s)

    @property
    def n_streams(self) -> int:
        return self.streams.shape[0]

    def __len__(self):
        return self.streams.shape[1]


def _as_array(data) -> np.ndarray:
    return data.frames if isinstance(data, FrameMatrix) else np.asarray(data, dtype=np.float64)


def sq_distances(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, shape (len(x), len(c))."""
    out = np.empty((x.shape[0], c.shape[0]))
    for s in range(0, x.shape[0], _CHUNK):
        diff = x[s:s + _CHUNK, None, :] - c[None, :, :]
        out[s:s + _CHUNK] = np.einsum("tkd,tkd->tk", diff, diff)
    return out


def assign(x: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels (lowest index on ties) and their squared distances."""
    if x.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    d = sq_distances(x, c)
    labels = np.argmin(d, axis=1)
    return labels, d[np.arange(x.shape[0]), labels]


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    idx = [int(rng.integers(n))]
    closest = sq_distances(x, x[idx]).ravel()
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            probs = closest / total
            j = int(rng.choice(n, p=probs))
        else:
            j = int(rng.integers(n))
        idx.append(j)
        closest = np.minimum(closest, sq_distances(x, x[j:j + 1]).ravel())
    return x[idx].copy()


def _update(x: np.ndarray, labels: np.ndarray, k: int, old: np.ndarray):
    sums = np.zeros((k, x.shape[1]))
    np.add.at(sums, labels, x)  # sequential accumulation: order-independent of threads
    counts = np.bincount(labels, minlength=k)
    new = old.copy()
    nz = counts > 0
    new[nz] = sums[nz] / counts[nz, None]
    return new, counts


def kmeans_fit(
    data,
    k: int,
    seed: int = 0,
    max_iters: int = 100,
    tol: float = 1e-6,
    feature_kind: str | None = None,
) -> Codebook:
    """Fit ``k`` centroids with k-means++ seeding and Lloyd iterations.

    Stops once no centroid moves more than ``tol`` or after ``max_iters``
    iterations. An empty cluster is re-seeded with the point lying farthest
    from its own centroid. The within-cluster sum of squares is recorded per
    iteration in ``wcss_history`` and checked to be non-increasing.
    """
    x = _as_array(data)
    if x.ndim != 2:
        raise DimensionError("training data must be a T x D matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError("training data must be finite")
    if k < 1:
        raise ValueError("k must be positive")
    if x.shape[0] < k:
        raise InsufficientDataError(f"{x.shape[0]} frames cannot support k={k} clusters")
    kind = feature_kind or (data.kind if isinstance(data, FrameMatrix) else "external")

    rng = np.random.default_rng(seed)
    c = _kmeans_pp(x, k, rng)
    labels, dist = assign(x, c)
    history = [float(dist.sum())]
    for _ in range(max_iters):
        new, counts = _update(x, labels, k, c)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            own = np.einsum("td,td->t", x - new[labels], x - new[labels])
            taken = set()
            for e in empty:
                order = np.argsort(-own, kind="stable")
                j = next(int(i) for i in order if int(i) not in taken)
                taken.add(j)
                new[e] = x[j]
                own[j] = 0.0
        shift = np.max(np.sqrt(np.sum((new - c) ** 2, axis=1)))
        c = new
        labels, dist = assign(x, c)
        wcss = float(dist.sum())
        if wcss > history[-1] * (1 + _WCSS_SLACK) + _WCSS_SLACK:
            raise AssertionError(f"WCSS rose from {history[-1]} to {wcss}")
        history.append(wcss)
        if shift < tol:
            break
    return Codebook(c, kind, seed, tuple(history))


def tokenize(data, codebook: Codebook) -> TokenSequence:
    x = _as_array(data)
    if x.ndim != 2 or (x.shape[0] and x.shape[1] != codebook.dim):
        raise DimensionError(f"frames have dimension {x.shape[-1]}, codebook expects {codebook.dim}")
    labels, _ = assign(x.reshape(-1, codebook.dim), codebook.centroids)
    return TokenSequence(labels[None, :])


def wcss(data, codebook: Codebook) -> float:
    _, d = assign(_as_array(data), codebook.centroids)
    return float(d.sum())


# --- RVQ -------------------------------------------------------------------------------

def _stage_seed(seed: int, stage: int) -> int:
    return (seed + stage) % (1 << 64)


def rvq_fit(data, n_stages: int = 4, k_per_stage: int = 32, seed: int = 0,
            max_iters: int = 100, tol: float = 1e-6) -> RVQCodebook:
    """Train a residual quantizer: stage ``s`` clusters what stages ``< s`` left over."""
    x = _as_array(data)
    if x.shape[0] < k_per_stage:
        raise InsufficientDataError(f"{x.shape[0]} frames cannot support {k_per_stage} clusters per stage")
    if n_stages < 1:
        raise ValueError("n_stages must be positive")
    kind = data.kind if isinstance(data, FrameMatrix) else "external"
    residual = x.copy()
    stages = []
    for s in range(n_stages):
        cb = kmeans_fit(residual, k_per_stage, _stage_seed(seed, s), max_iters, tol, kind)
        labels, _ = assign(residual, cb.centroids)
        residual = residual - cb.centroids[labels]
        stages.append(cb)
    return RVQCodebook(tuple(stages), seed)


def rvq_encode(data, rvq: RVQCodebook) -> TokenSequence:
    x = _as_array(data)
    if x.ndim != 2 or (x.shape[0] and x.shape[1] != rvq.dim):
        raise DimensionError(f"frames have dimension {x.shape[-1]}, codebook expects {rvq.dim}")
    residual = x.reshape(-1, rvq.dim).copy()
    streams = []
    for cb in rvq.stages:
        labels, _ = assign(residual, cb.centroids)
        residual = residual - cb.centroids[labels]
        streams.append(labels)
    return TokenSequence(np.stack(streams) if streams[0].size else np.zeros((len(rvq.stages), 0), dtype=np.int64))


def rvq_decode(tokens: TokenSequence, rvq: RVQCodebook, n_stages: int | None = None,
               frame_rate_hz: float = 1.0) -> FrameMatrix:
    """Sum the selected centroid of each stage; ``n_stages`` limits the stages used."""
    streams = tokens.streams
    use = len(rvq.stages) if n_stages is None else n_stages
    if streams.shape[0] < use:
        raise DimensionError(f"{streams.shape[0]} token streams for {use} stages")
    out = np.zeros((streams.shape[1], rvq.dim))
    for s in range(use):
        cb = rvq.stages[s]
        row = streams[s]
        if row.size and (row.min() < 0 or row.max() >= cb.k):
            raise TokenRangeError(f"stage {s} token outside [0, {cb.k})")
        out += cb.centroids[row]
    return FrameMatrix(out, frame_rate_hz, rvq.feature_kind)


# --- files -------------------------------------------------------------------------------

def write_codebook(cb) -> bytes:
    """MKCB: magic, u32 version, u32 n_stages, per stage (u32 K, u32 D, f32 K*D), u64 seed, u8 kind."""
    stages = cb.stages if isinstance(cb, RVQCodebook) else (cb,)
    out = [_CB_MAGIC, struct.pack("<II", 1, len(stages))]
    for s in stages:
        out.append(struct.pack("<II", s.k, s.dim))
        out.append(np.ascontiguousarray(s.centroids, dtype="<f4").tobytes())
    out.append(struct.pack("<QB", cb.seed % (1 << 64), FRAME_KINDS.index(stages[0].feature_kind)))
    return b"".join(out)


def read_codebook(document: bytes):
    """Return a :class:`Codebook` for one stage, else an :class:`RVQCodebook`."""
    if document[:4] != _CB_MAGIC:
        raise FrameFileError("not an MKCB codebook file")
    try:
        version, n = struct.unpack_from("<II", document, 4)
        if version != 1:
            raise FrameFileError(f"unsupported codebook version {version}")
        pos = 12
        mats = []
        for _ in range(n):
            K, D = struct.unpack_from("<II", document, pos)
            pos += 8
            mats.append(np.frombuffer(document, dtype="<f4", count=K * D, offset=pos).astype(np.float64).reshape(K, D))
            pos += 4 * K * D
        seed, kind = struct.unpack_from("<QB", document, pos)
    except struct.error as exc:
        raise FrameFileError(f"truncated codebook: {exc}") from exc
    if pos + 9 != len(document):
        raise FrameFileError("trailing bytes after codebook")
    if kind >= len(FRAME_KINDS):
        raise FrameFileError(f"unknown feature kind code {kind}")
    stages = tuple(Codebook(m, FRAME_KINDS[kind], seed) for m in mats)
    if n == 1:
        return stages[0]
    return RVQCodebook(stages, seed)


def format_token_line(utt_id: str, tokens: TokenSequence) -> str:
    parts = [utt_id] + [f"s{i}:" + ",".join(map(str, row.tolist())) for i, row in enumerate(tokens.streams)]
    return " ".join(parts)


def parse_token_line(line: str) -> tuple[str, TokenSequence]:
    fields = line.split()
    if not fields:
        raise ValueError("empty token line")
    utt, rows = fields[0], []
    for i, f in enumerate(fields[1:]):
        tag, _, body = f.partition(":")
        if tag != f"s{i}":
            raise ValueError(f"expected stream tag s{i}, got {tag!r}")
        rows.append([int(v) for v in body.split(",")] if body else [])
    if len({len(r) for r in rows}) > 1:
        raise ValueError("token streams differ in length")
    return utt, TokenSequence(np.array(rows, dtype=np.int64).reshape(len(rows), -1))
