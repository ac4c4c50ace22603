"""Readers and writers for matrices, models, corpora and fit traces.

All files are UTF-8 with LF line endings.  Floats are written with 17
significant digits so every double round-trips exactly.
"""
import csv
import json
import math

import numpy as np

from .em import FitTrace, IterationRecord, Termination
from .errors import ParseError, SchemaError, ValidationError, VersionMismatchError
from .model import PlcaModel
from .sampler import SampleCorpus

FORMAT_VERSION = 1
TRACE_HEADER = "iter,fobj,kld,max_param_delta,wall_ms"
CORPUS_MAGIC = "# plca-corpus v1"


def fmt(x):
    return format(float(x), ".17g")


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _read_text(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read()


# -- matrices -----------------------------------------------------------------

def read_matrix(path):
    """Read a headerless CSV of non-negative numbers (rows = events)."""
    text = _read_text(path)
    rows = []
    width = None
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        vals = []
        for col, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: line {lineno}, column {col}: cannot parse {cell!r}") from None
            if not math.isfinite(v):
                raise ValidationError(f"{path}: line {lineno}, column {col}: non-finite value {cell!r}")
            if v < 0:
                raise ValidationError(f"{path}: negative value {cell.strip()} at row {len(rows)}, "
                                      f"column {col - 1} (line {lineno})")
            vals.append(v)
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise ParseError(f"{path}: line {lineno} has {len(vals)} fields, expected {width}")
        rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: empty file")
    return np.array(rows, dtype=np.float64)


def write_matrix(matrix, path):
    matrix = np.atleast_2d(np.asarray(matrix))
    if np.issubdtype(matrix.dtype, np.integer):
        lines = (",".join(str(int(v)) for v in row) for row in matrix)
    else:
        lines = (",".join(fmt(v) for v in row) for row in matrix)
    _write_text(path, "".join(line + "\n" for line in lines))


# -- models -------------------------------------------------------------------

def model_to_json(model):
    m, n, k = model.dims

    def arr(a):
        return "[" + ", ".join(fmt(v) for v in a) + "]"

    def mat(a):
        return "[\n    " + ",\n    ".join(arr(r) for r in a) + "\n  ]"

    return (
        "{\n"
        f'  "format_version": {FORMAT_VERSION},\n'
        f'  "dims": {{"M": {m}, "N": {n}, "K": {k}}},\n'
        f'  "group_prior": {arr(model.group_prior)},\n'
        f'  "mixture": {mat(model.mixture)},\n'
        f'  "components": {mat(model.components)}\n'
        "}\n"
    )


def model_from_json(doc):
    if not isinstance(doc, dict):
        raise SchemaError("model document must be a JSON object")
    for key in ("format_version", "dims", "group_prior", "mixture", "components"):
        if key not in doc:
            raise SchemaError(f"missing field '{key}'")
    if doc["format_version"] != FORMAT_VERSION:
        raise VersionMismatchError(
            f"unsupported format_version {doc['format_version']!r}, expected {FORMAT_VERSION}")
    dims = doc["dims"]
    if not isinstance(dims, dict):
        raise SchemaError("field 'dims' must be an object")
    for key in ("M", "N", "K"):
        if key not in dims:
            raise SchemaError(f"missing field 'dims.{key}'")
    m, n, k = dims["M"], dims["N"], dims["K"]
    try:
        prior = np.array(doc["group_prior"], dtype=np.float64)
        mixture = np.array(doc["mixture"], dtype=np.float64)
        components = np.array(doc["components"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"non-numeric or ragged parameter array: {exc}") from None
    for name, a, shape in (("group_prior", prior, (n,)), ("mixture", mixture, (k, n)),
                           ("components", components, (m, k))):
        if a.shape != shape:
            raise SchemaError(f"field '{name}' has shape {a.shape}, dims imply {shape}")
    return PlcaModel(prior, mixture, components)


def write_model(model, path):
    _write_text(path, model_to_json(model))


def read_model(path):
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    return model_from_json(doc)


# -- corpora ------------------------------------------------------------------

def write_corpus(corpus, path):
    m, n = corpus.dims
    lines = [f"{CORPUS_MAGIC} M={m} N={n} seed={corpus.seed}\n"]
    lines.extend(f"{e} {g}\n" for e, g in corpus.pairs.tolist())
    _write_text(path, "".join(lines))


def read_corpus(path):
    lines = _read_text(path).split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].startswith(CORPUS_MAGIC):
        raise ParseError(f"{path}: missing '{CORPUS_MAGIC}' header")
    fields = {}
    for tok in lines[0][len(CORPUS_MAGIC):].split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise ParseError(f"{path}: bad header token {tok!r}")
        fields[key] = val
    try:
        m, n, seed = int(fields["M"]), int(fields["N"]), int(fields["seed"])
    except (KeyError, ValueError):
        raise ParseError(f"{path}: header needs integer M=, N= and seed=") from None
    pairs = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"{path}: line {lineno}: expected 'e g', got {line!r}")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-integer index in {line!r}") from None
    return SampleCorpus(np.array(pairs, dtype=np.int64).reshape(-1, 2), seed, (m, n))


# -- traces -------------------------------------------------------------------

def write_trace(trace, path):
    if not trace.records:
        raise ValidationError("refusing to write an empty trace")
    out = [TRACE_HEADER + "\n"]
    for r in trace.records:
        out.append(f"{r.iteration},{fmt(r.fobj)},{fmt(r.kld)},{fmt(r.max_param_delta)},{fmt(r.wall_ms)}\n")
    out.append(f"# terminated: {Termination(trace.termination).value}\n")
    try:
        _write_text(path, "".join(out))
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


def read_trace(path):
    lines = _read_text(path).splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ParseError(f"{path}: expected header {TRACE_HEADER!r}")
    trace = FitTrace()
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("# terminated:"):
            try:
                trace.termination = Termination(line.split(":", 1)[1].strip())
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: unknown termination reason") from None
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(f"{path}: line {lineno}: expected 5 fields")
        try:
            trace.records.append(IterationRecord(int(parts[0]), *(float(p) for p in parts[1:])))
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: cannot parse {line!r}") from None
    return trace

