"""Loading, validation, and persistence of embeddings, labels, and rankings.

File formats:
  * embeddings: NPY v1.0, little-endian float32/float64, C order, 2-D
  * labels: plain text, one token per line, mapped to dense ids in
    first-appearance order
  * rankings: CSV with header ``rank,score,index`` (per-sample issues) or
    ``rank,score,index_a,index_b`` (pair issues), rank 1-based, scores
    nondecreasing
  * run configuration: flat ``key=value`` text
"""

from __future__ import annotations

import ast
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

ISSUE_TYPES = ("offtopic", "duplicates", "labelerrors")
PAIR_ISSUES = ("duplicates",)

def _fmt_score(s: float) -> str:
    # shortest representation that parses back to the same double, so
    # round trips are exact (the contract only requires 12 significant digits)
    return repr(float(s))


@dataclass
class EmbeddingMatrix:
    """N x D latent representations, optionally row-normalized to unit norm."""

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise InputError(f"expected 2-D array, got {v.ndim}-D")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise InputError(f"empty embedding matrix with shape {v.shape}")
        if v.dtype != np.float64:
            v = v.astype(np.float64)
        bad = ~np.isfinite(v)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise InputError(f"non-finite entry at ({r}, {c})")
        if self.normalized:
            norms = np.linalg.norm(v, axis=1)
            off = np.abs(norms - 1.0)
            if off.max() > 1e-6:
                i = int(np.argmax(off))
                raise InputError(
                    f"row {i} has norm {norms[i]:.9f}, not unit within 1e-6"
                )
        self.values = v

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class LabelVector:
    """Dense integer class ids 0..n_classes-1, one per sample."""

    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        l = np.asarray(self.labels, dtype=np.int64)
        if l.ndim != 1:
            raise InputError("labels must be a 1-D vector")
        if self.n_classes < 1:
            raise InputError("need at least one class")
        if len(l) and (l.min() < 0 or l.max() >= self.n_classes):
            raise InputError(
                f"label id out of range 0..{self.n_classes - 1}"
            )
        self.labels = l

    def __len__(self) -> int:
        return len(self.labels)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass
class Ranking:
    """Ordered candidates with scores in [0, 1], lower = more suspicious.

    ``keys`` is an (M,) int array for per-sample issues or an (M, 2) int
    array of pairs (i < j).  ``total_candidates`` may exceed ``len(keys)``
    when the ranking was truncated to a top-k head.
    """

    issue_type: str
    keys: np.ndarray
    scores: np.ndarray
    total_candidates: int
    truncated: bool = False

    def __post_init__(self):
        if self.issue_type not in ISSUE_TYPES:
            raise InputError(f"unknown issue type {self.issue_type!r}")
        keys = np.asarray(self.keys, dtype=np.int64)
        scores = np.asarray(self.scores, dtype=np.float64)
        if len(keys) != len(scores):
            raise InputError("keys and scores length mismatch")
        pairs = self.issue_type in PAIR_ISSUES
        if pairs:
            if keys.ndim != 2 or keys.shape[1] != 2:
                raise InputError("pair ranking needs (M, 2) keys")
            if len(keys) and not (keys[:, 0] < keys[:, 1]).all():
                raise InputError("pair keys must satisfy index_a < index_b")
        elif keys.ndim != 1:
            raise InputError("sample ranking needs 1-D keys")
        if len(scores):
            if scores.min() < 0.0 or scores.max() > 1.0:
                raise InputError("scores must lie in [0, 1]")
            if (np.diff(scores) < 0).any():
                raise InputError("scores not nondecreasing")
        if pairs:
            flat = np.ascontiguousarray(keys).view("i8,i8").ravel()
            unique = len(np.unique(flat))
        else:
            unique = len(np.unique(keys))
        if unique != len(keys):
            raise InputError("duplicate ranking keys")
        if self.total_candidates < len(keys):
            raise InputError("total_candidates smaller than listed entries")
        self.keys = keys
        self.scores = scores

    @property
    def is_pairs(self) -> bool:
        return self.issue_type in PAIR_ISSUES

    def __len__(self) -> int:
        return len(self.scores)


@dataclass
class CleaningConfig:
    """Run configuration for ranking and automatic cleaning."""

    alpha: float = 0.10
    q: float = 0.05
    normalize: bool = True
    top_k: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.alpha < 0.5):
            raise InputError(f"alpha must be in (0, 0.5), got {self.alpha}")
        if not (0.0 < self.q <= 1.0):
            raise InputError(f"q must be in (0, 1], got {self.q}")


# ---------------------------------------------------------------------------
# NPY v1.0 embeddings

_NPY_MAGIC = b"\x93NUMPY"


def load_embeddings(path) -> EmbeddingMatrix:
    """Read a strict NPY v1.0 file into an EmbeddingMatrix.

    Only little-endian f32/f64, C-order, 2-D arrays are accepted; f32 is
    widened to f64.  The result is flagged as not normalized.
    """
    with open(path, "rb") as f:
        magic = f.read(6)
        if magic != _NPY_MAGIC:
            raise InputError(f"{path}: not an NPY file (bad magic)")
        ver = f.read(2)
        if ver != b"\x01\x00":
            raise InputError(
                f"{path}: unsupported NPY version {tuple(ver)}, need (1, 0)"
            )
        (hlen,) = struct.unpack("<H", f.read(2))
        header = f.read(hlen).decode("latin1")
        try:
            meta = ast.literal_eval(header)
        except (ValueError, SyntaxError) as exc:
            raise InputError(f"{path}: malformed NPY header") from exc
        if not isinstance(meta, dict) or set(meta) != {
            "descr",
            "fortran_order",
            "shape",
        }:
            raise InputError(f"{path}: malformed NPY header dict")
        descr = meta["descr"]
        if descr not in ("<f4", "<f8"):
            raise InputError(
                f"{path}: element type {descr!r} not supported, need <f4 or <f8"
            )
        if meta["fortran_order"]:
            raise InputError(f"{path}: fortran_order arrays not supported")
        shape = meta["shape"]
        if not (isinstance(shape, tuple) and len(shape) == 2):
            raise InputError(f"{path}: expected 2-D array, got shape {shape}")
        n, d = shape
        dtype = np.dtype(descr)
        raw = f.read(n * d * dtype.itemsize)
        if len(raw) != n * d * dtype.itemsize:
            raise InputError(f"{path}: truncated NPY payload")
        values = np.frombuffer(raw, dtype=dtype).reshape(n, d)
    return EmbeddingMatrix(values=values.astype(np.float64), normalized=False)


def save_embeddings(m: EmbeddingMatrix, path, dtype="<f8") -> None:
    """Write an NPY v1.0 file in the same strict dialect load expects."""
    if dtype not in ("<f4", "<f8"):
        raise InputError(f"unsupported dtype {dtype!r}")
    values = np.ascontiguousarray(m.values.astype(np.dtype(dtype)))
    header = (
        "{'descr': '%s', 'fortran_order': False, 'shape': (%d, %d), }"
        % (dtype, m.n_samples, m.dim)
    )
    # pad so that magic+version+len+header is a multiple of 64 bytes
    pad = 64 - (len(_NPY_MAGIC) + 2 + 2 + len(header) + 1) % 64
    header = header + " " * pad + "\n"
    with _atomic_write(path, "wb") as f:
        f.write(_NPY_MAGIC)
        f.write(b"\x01\x00")
        f.write(struct.pack("<H", len(header)))
        f.write(header.encode("latin1"))
        f.write(values.tobytes(order="C"))


def normalize_rows(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Divide every row by its Euclidean norm (idempotent)."""
    norms = np.linalg.norm(m.values, axis=1)
    small = norms <= 1e-12
    if small.any():
        raise InputError(f"zero-norm row {int(np.argmax(small))}")
    return EmbeddingMatrix(values=m.values / norms[:, None], normalized=True)


# ---------------------------------------------------------------------------
# Labels


def load_labels(path, n_expected: int) -> LabelVector:
    """Read one label token per line; ids assigned in first-appearance order."""
    with open(path, "r", encoding="utf-8") as f:
        tokens = [line.rstrip("\n") for line in f if line.strip() != ""]
    if not tokens:
        raise InputError(f"{path}: empty label file")
    if len(tokens) != n_expected:
        raise InputError(f"label count {len(tokens)} != {n_expected}")
    mapping: dict[str, int] = {}
    ids = np.empty(len(tokens), dtype=np.int64)
    for i, tok in enumerate(tokens):
        if tok not in mapping:
            mapping[tok] = len(mapping)
        ids[i] = mapping[tok]
    return LabelVector(labels=ids, n_classes=len(mapping))


def save_labels(l: LabelVector, path) -> None:
    with _atomic_write(path, "w") as f:
        for lab in l.labels:
            f.write(f"{int(lab)}\n")


# ---------------------------------------------------------------------------
# Ranking CSV


def save_ranking(r: Ranking, path) -> None:
    with _atomic_write(path, "w") as f:
        if r.is_pairs:
            f.write("rank,score,index_a,index_b\n")
            for pos, ((a, b), s) in enumerate(zip(r.keys, r.scores), start=1):
                f.write(f"{pos},{_fmt_score(s)},{a},{b}\n")
        else:
            f.write("rank,score,index\n")
            for pos, (k, s) in enumerate(zip(r.keys, r.scores), start=1):
                f.write(f"{pos},{_fmt_score(s)},{k}\n")


def load_ranking(path, issue_type: str, total_candidates: int | None = None) -> Ranking:
    """Read a ranking CSV back; validates monotone scores and key layout."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [ln.rstrip("\n") for ln in f]
    if not lines:
        raise InputError(f"{path}: empty ranking file")
    header = lines[0]
    pairs = issue_type in PAIR_ISSUES
    want = "rank,score,index_a,index_b" if pairs else "rank,score,index"
    if header != want:
        raise InputError(f"{path}: expected header {want!r}, got {header!r}")
    keys = []
    scores = []
    for lineno, ln in enumerate(lines[1:], start=2):
        if ln == "":
            continue
        parts = ln.split(",")
        if len(parts) != (4 if pairs else 3):
            raise InputError(f"{path}:{lineno}: malformed row")
        try:
            rank = int(parts[0])
            score = float(parts[1])
            idx = [int(p) for p in parts[2:]]
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: malformed row") from exc
        if rank != len(scores) + 1:
            raise InputError(f"{path}:{lineno}: rank {rank} out of sequence")
        if pairs and idx[0] >= idx[1]:
            raise InputError(
                f"{path}:{lineno}: pair ({idx[0]}, {idx[1]}) not ordered"
            )
        keys.append(idx if pairs else idx[0])
        scores.append(score)
    if total_candidates is None:
        total_candidates = len(scores)
    return Ranking(
        issue_type=issue_type,
        keys=np.array(keys, dtype=np.int64).reshape(-1, 2)
        if pairs
        else np.array(keys, dtype=np.int64),
        scores=np.array(scores, dtype=np.float64),
        total_candidates=total_candidates,
        truncated=total_candidates > len(scores),
    )


# ---------------------------------------------------------------------------
# Config


def save_config(cfg: CleaningConfig, path) -> None:
    with _atomic_write(path, "w") as f:
        f.write(f"alpha={cfg.alpha!r}\n")
        f.write(f"q={cfg.q!r}\n")
        f.write(f"normalize={'true' if cfg.normalize else 'false'}\n")
        f.write(f"top_k={'' if cfg.top_k is None else cfg.top_k}\n")
        f.write(f"seed={cfg.seed}\n")


def load_config(path) -> CleaningConfig:
    kv: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, ln in enumerate(f, start=1):
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            if "=" not in ln:
                raise InputError(f"{path}:{lineno}: expected key=value")
            k, v = ln.split("=", 1)
            kv[k.strip()] = v.strip()
    try:
        return CleaningConfig(
            alpha=float(kv.get("alpha", 0.10)),
            q=float(kv.get("q", 0.05)),
            normalize=kv.get("normalize", "true").lower() == "true",
            top_k=int(kv["top_k"]) if kv.get("top_k") else None,
            seed=int(kv.get("seed", 0)),
        )
    except ValueError as exc:
        raise InputError(f"{path}: bad config value ({exc})") from exc


# ---------------------------------------------------------------------------
# Atomic writes


class _atomic_write:
    """Context manager writing to a temp file, renamed into place on success."""

    def __init__(self, path, mode):
        self.path = os.fspath(path)
        self.tmp = self.path + ".tmp"
        self.mode = mode

    def __enter__(self):
        kwargs = {} if "b" in self.mode else {"encoding": "utf-8", "newline": "\n"}
        self.f = open(self.tmp, self.mode, **kwargs)
        return self.f

    def __exit__(self, exc_type, exc, tb):
        self.f.close()
        if exc_type is None:
            os.replace(self.tmp, self.path)
        else:
            try:
                os.unlink(self.tmp)
            except OSError:
                pass
        return False
