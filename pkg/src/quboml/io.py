"""File formats: LETOR ranking files, JSONL embeddings, JSON results and run manifests."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from quboml import __version__
from quboml.errors import DimensionError, EmptyDatasetError, ParseError
from quboml.features import RankingDataset
from quboml.instances import EmbeddingCorpus
from quboml.seeding import fnv1a64

MARGIN_SUBSTITUTION = "linear margin classifier substituted for rbf SVC"
SWAP_POLISH = "k-hot answers polished by popcount-preserving swap descent"


def parse_letor(path) -> RankingDataset:
    """Parse ``<rel> qid:<id> <fid>:<val> ... # comment`` lines; feature ids are 1-based."""
    rows: list[dict[int, float]] = []
    labels: list[int] = []
    qids: list[str] = []
    width = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                rel = int(float(parts[0]))
                if not parts[1].startswith("qid:"):
                    raise ValueError("second token must be qid:<id>")
                qid = parts[1][4:]
                feats = {}
                for tok in parts[2:]:
                    fid, val = tok.split(":", 1)
                    fid_i = int(fid)
                    if fid_i < 1:
                        raise ValueError(f"feature id {fid_i} must be >= 1")
                    feats[fid_i - 1] = float(val)
            except (IndexError, ValueError) as exc:
                raise ParseError(str(exc), lineno) from exc
            if feats:
                width = max(width, max(feats) + 1)
            rows.append(feats)
            labels.append(rel)
            qids.append(qid)
    if not rows:
        raise EmptyDatasetError(f"{path}: no data lines")
    X = np.zeros((len(rows), width))
    for r, feats in enumerate(rows):
        for c, v in feats.items():
            X[r, c] = v
    return RankingDataset(X, labels, qids)


@dataclass
class Corpus:
    """Parsed JSONL records: embeddings plus optional relevance lists (queries)."""

    corpus: EmbeddingCorpus
    relevant_ids: list[list[str]] | None = None


def parse_embeddings(path) -> Corpus:
    """One JSON object per line: ``{"id", "vector", "label"?, "relevant_ids"?}``.

    Labels must be present on every record or on none.
    """
    ids, vecs, labels, rel = [], [], [], []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                vec = [float(v) for v in rec["vector"]]
                rid = str(rec["id"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad record: {exc}", lineno) from exc
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise DimensionError(f"line {lineno}: vector has {len(vec)} dims, expected {dim}")
            if not all(math.isfinite(v) for v in vec):
                raise ValueError(f"line {lineno}: non-finite vector entry")
            ids.append(rid)
            vecs.append(vec)
            labels.append(rec.get("label"))
            rel.append([str(r) for r in rec.get("relevant_ids", [])])
    if not ids:
        raise EmptyDatasetError(f"{path}: no records")
    has = [l is not None for l in labels]
    if any(has) and not all(has):
        raise ParseError("label present on some records but not others")
    lab = np.array(labels, dtype=np.int64) if all(has) else None
    if lab is not None and not np.all((lab == 0) | (lab == 1)):
        raise ParseError("labels must be 0 or 1")
    return Corpus(EmbeddingCorpus(ids, np.array(vecs), lab),
                  rel if any(rel) else None)


def file_digest(path) -> str:
    return f"{fnv1a64(Path(path).read_bytes()):016x}"


def dumps(obj) -> str:
    """Pretty-printed JSON with insertion-ordered keys and a trailing newline."""
    return json.dumps(obj, indent=2, allow_nan=False, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    inputs: dict[str, str] = field(default_factory=dict)
    deviations: list[str] = field(default_factory=list)
    timing_ms: dict = field(default_factory=lambda: {"build_ms": 0.0, "solve_ms": 0.0, "eval_ms": 0.0})
    version: str = __version__
    created: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S%z"))

    def add_input(self, path) -> None:
        self.inputs[str(path)] = file_digest(path)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "version": self.version,
            "deviations": self.deviations,
            "timing_ms": self.timing_ms,
            "created": self.created,
        }
