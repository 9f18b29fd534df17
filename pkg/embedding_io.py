#!/usr/bin/env python3
"""
Embedding and corpus files.

Embedding files are line-delimited JSON. Line 1 is a header naming the
format and version; every other line is one record:

    {"format":"gikit-embeddings","version":"1.0"}
    {"id":"img000","mu":[...],"log_var":[...],"normalized":true,"modality":"image"}

Reals are written with Python's shortest round-trip repr, so
write -> read -> write is byte-identical. Writers hold an exclusive
advisory lock on the output file while writing.
"""

import csv
import fcntl
import hashlib
import json
import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

from errors import InvalidArgumentError, ParseError, SchemaError
from gauss_core import GaussianEmbedding
from synth_trainer import SyntheticCorpus

logger = logging.getLogger(__name__)

EMBEDDINGS_FORMAT = "gikit-embeddings"
CORPUS_FORMAT = "gikit-corpus"
FORMAT_VERSION = "1.0"
MODALITIES = ("image", "text")
RECORD_FIELDS = ("id", "mu", "log_var", "normalized", "modality")


@dataclass(frozen=True)
class EmbeddingRecord:
    embedding: GaussianEmbedding
    modality: str

    @property
    def id(self) -> str:
        return self.embedding.id


@contextmanager
def locked_writer(path, newline=None):
    """Open `path` for writing under an exclusive flock"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline=newline) as f:
        fcntl.flock(f.fileno(), fcntl.LOCK_EX)
        try:
            yield f
        finally:
            f.flush()
            fcntl.flock(f.fileno(), fcntl.LOCK_UN)


def file_digest(path) -> str:
    """sha256 content digest as 'sha256:<hex>'"""
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            sha.update(block)
    return "sha256:" + sha.hexdigest()


def _dumps(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _reject_constant(name: str):
    raise ValueError(f"non-finite number {name}")


def _check_version(header: Dict[str, Any], expected_format: str, line: int) -> None:
    if header.get("format") != expected_format:
        raise SchemaError(f"expected format '{expected_format}', got {header.get('format')!r}", line=line)
    version = str(header.get("version", ""))
    major = version.split(".")[0]
    if major != FORMAT_VERSION.split(".")[0]:
        raise SchemaError(f"unsupported {expected_format} version {version!r}", line=line)


def embedding_to_record(z: GaussianEmbedding, modality: str) -> Dict[str, Any]:
    return {
        "id": z.id,
        "mu": [float(v) for v in z.mu],
        "log_var": [float(v) for v in z.log_var],
        "normalized": bool(z.normalized),
        "modality": modality,
    }


def save_embeddings(records: Sequence[EmbeddingRecord], path) -> str:
    """
    Write an embedding file.

    Returns:
        Content digest of the written file
    """
    dims = {r.embedding.dim for r in records}
    if len(dims) > 1:
        raise SchemaError(f"records have mixed dimensions {sorted(dims)}")
    for r in records:
        if r.modality not in MODALITIES:
            raise SchemaError(f"record '{r.id}' has unknown modality {r.modality!r}")
    with locked_writer(path) as f:
        f.write(_dumps({"format": EMBEDDINGS_FORMAT, "version": FORMAT_VERSION}) + "\n")
        for r in records:
            f.write(_dumps(embedding_to_record(r.embedding, r.modality)) + "\n")
    logger.debug(f"wrote {len(records)} embeddings to {path}")
    return file_digest(path)


def _parse_record(data: Any, line: int) -> EmbeddingRecord:
    if not isinstance(data, dict):
        raise SchemaError("record must be a JSON object", line=line)
    missing = [k for k in RECORD_FIELDS if k not in data]
    if missing:
        raise SchemaError(f"record is missing {', '.join(missing)}", line=line)
    if data["modality"] not in MODALITIES:
        raise SchemaError(f"unknown modality {data['modality']!r}", line=line)
    if not isinstance(data["normalized"], bool):
        raise SchemaError("'normalized' must be true or false", line=line)
    mu, log_var = data["mu"], data["log_var"]
    if not (isinstance(mu, list) and isinstance(log_var, list)):
        raise SchemaError("'mu' and 'log_var' must be arrays", line=line)
    if len(mu) != len(log_var):
        raise SchemaError(f"mu has {len(mu)} entries but log_var has {len(log_var)}", line=line)
    try:
        z = GaussianEmbedding(id=str(data["id"]), mu=mu, log_var=log_var, normalized=data["normalized"])
    except (InvalidArgumentError, TypeError, ValueError) as e:
        raise SchemaError(str(e), line=line) from None
    return EmbeddingRecord(z, data["modality"])


def load_embeddings(path) -> List[EmbeddingRecord]:
    """
    Read an embedding file; an empty file is an empty table.

    Raises:
        ParseError: a line is not valid JSON (message carries the line number)
        SchemaError: header, field or dimension violations
    """
    records: List[EmbeddingRecord] = []
    dim = None
    ids = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            text = raw.strip()
            if not text:
                continue
            try:
                data = json.loads(text, parse_constant=_reject_constant)
            except ValueError as e:
                raise ParseError(f"invalid JSON: {e}", line=line_no) from None
            if line_no == 1:
                if not isinstance(data, dict) or "format" not in data:
                    raise SchemaError("missing format header", line=line_no)
                _check_version(data, EMBEDDINGS_FORMAT, line_no)
                continue
            record = _parse_record(data, line_no)
            if dim is None:
                dim = record.embedding.dim
            elif record.embedding.dim != dim:
                raise SchemaError(f"dimension {record.embedding.dim} differs from {dim}", line=line_no)
            if record.id in ids:
                raise SchemaError(f"duplicate id '{record.id}'", line=line_no)
            ids.add(record.id)
            records.append(record)
    logger.debug(f"loaded {len(records)} embeddings from {path}")
    return records


def embeddings_of(records: Iterable[EmbeddingRecord], modality: str) -> List[GaussianEmbedding]:
    return [r.embedding for r in records if r.modality == modality]


def save_corpus(corpus: SyntheticCorpus, path) -> str:
    with locked_writer(path) as f:
        json.dump({"format": CORPUS_FORMAT, "version": FORMAT_VERSION, "corpus": corpus.to_dict()},
                  f, indent=2)
        f.write("\n")
    return file_digest(path)


def load_corpus(path) -> SyntheticCorpus:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", line=e.lineno) from None
    _check_version(data, CORPUS_FORMAT, 1)
    try:
        return SyntheticCorpus.from_dict(data["corpus"])
    except (KeyError, TypeError) as e:
        raise SchemaError(f"malformed corpus: {e}") from None


def write_json(data: Any, path) -> str:
    """Indented JSON artifact with a trailing newline"""
    with locked_writer(path) as f:
        json.dump(data, f, indent=2, allow_nan=False)
        f.write("\n")
    return file_digest(path)


def _cell(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return value


def write_csv(rows: Sequence[Dict[str, Any]], columns: Sequence[str], path) -> str:
    """CSV artifact with a fixed column order"""
    with locked_writer(path, newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])
    return file_digest(path)


def read_csv(path) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
