"""Edge lists, CSV tables and config files."""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .graph import Graph


class EdgeListError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeListDocument:
    """A parsed edge list: string labels, index pairs and cleaning counts."""

    labels: tuple
    edges: np.ndarray
    self_loops_dropped: int
    duplicates_collapsed: int

    @property
    def index(self):
        return {lab: i for i, lab in enumerate(self.labels)}

    def to_graph(self):
        return Graph.from_edges(len(self.labels), self.edges)


def ingest_edge_list(stream):
    """Parse whitespace-separated label pairs.

    Blank lines and lines starting with ``#`` are skipped. Labels are mapped
    to indices in order of first appearance; self-loops are dropped and
    repeated (in either orientation) edges collapsed.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    index = {}
    seen = set()
    pairs = []
    loops = dups = 0
    for lineno, line in enumerate(stream, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split()
        if len(parts) != 2:
            raise EdgeListError(f"line {lineno}: expected two labels, got {len(parts)}: {text!r}")
        ids = []
        for lab in parts:
            if lab not in index:
                index[lab] = len(index)
            ids.append(index[lab])
        a, b = ids
        if a == b:
            loops += 1
            continue
        key = (a, b) if a < b else (b, a)
        if key in seen:
            dups += 1
            continue
        seen.add(key)
        pairs.append(key)
    if len(index) < 2:
        raise EdgeListError(f"edge list names {len(index)} node(s); need at least 2")
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    return EdgeListDocument(tuple(index), edges, loops, dups)


def read_edge_list(path):
    with open(path) as fh:
        return ingest_edge_list(fh)


def provenance_lines(config=None, seed=None, **extra):
    """Comment lines recording version, config hash and seed."""
    fields = {"rwspectral": __version__, "config_hash": config_hash(config), "seed": seed}
    fields.update(extra)
    return ["# " + " ".join(f"{k}={v}" for k, v in fields.items())]


def config_hash(config):
    if config is None:
        return "none"
    blob = json.dumps(config, sort_keys=True, default=_jsonable).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_edge_list(path_or_stream, graph, labels=None, header=()):
    """Write one ``label label`` line per edge (i < j, sorted)."""
    labels = [str(i) for i in range(graph.n)] if labels is None else list(labels)
    lines = list(header)
    lines += [f"{labels[i]} {labels[j]}" for i, j in graph.edges()]
    _write_lines(path_or_stream, lines)


def fmt(x):
    """17 significant digits: lossless float64 round trip."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def write_csv(path_or_stream, header, rows, comments=()):
    lines = list(comments) + [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    _write_lines(path_or_stream, lines)


def _write_lines(path_or_stream, lines):
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_stream, "write"):
        path_or_stream.write(text)
    else:
        Path(path_or_stream).write_text(text)


def read_csv(path):
    """Read a CSV written by :func:`write_csv`.

    Returns ``(header, rows, meta)`` where ``meta`` holds ``key=value`` pairs
    from ``#`` comment lines and rows are lists of strings.
    """
    meta, header, rows = {}, None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            fields = line.split(",")
            if header is None:
                header = fields
            else:
                rows.append(fields)
    if header is None:
        raise ValueError(f"{path}: no header row")
    return header, rows, meta


def write_embedding(path, labels, points, comments=()):
    m = points.shape[1]
    header = ["node"] + [f"x{j + 1}" for j in range(m)]
    rows = ([lab, *row] for lab, row in zip(labels, points))
    write_csv(path, header, rows, comments)


def read_embedding(path):
    header, rows, meta = read_csv(path)
    if header[0] != "node":
        raise ValueError(f"{path}: first column must be 'node'")
    labels = [r[0] for r in rows]
    points = np.array([[float(v) for v in r[1:]] for r in rows]).reshape(len(rows), -1)
    return labels, points, meta


def load_config(source):
    """Load a YAML/JSON mapping from a path, or pass a mapping through."""
    if isinstance(source, dict):
        return source
    with open(source) as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ValueError(f"{source}: config must be a mapping")
    return cfg
