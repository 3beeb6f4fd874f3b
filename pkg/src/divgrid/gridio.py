"""File formats: PGM/PBM masks, JSON domain descriptors, CSV tables.

Text formats only, written deterministically (sorted keys, repr floats)
so identical configurations produce byte-identical artifacts.
"""

from __future__ import annotations

import json

import numpy as np

from . import core
from .measures import AtomicMeasure


def read_mask_image(path):
    """P1/P2/P4/P5 portable bitmap/graymap; nonzero pixel = inside cell.
    Pixel (row, col) maps to cell (col, nrows - 1 - row) so the image is
    upright in math coordinates."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    i = 0
    magic = None
    while i < len(data):
        if data[i : i + 1].isspace():
            i += 1
            continue
        if data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
        if magic is None:
            magic = tokens[0].decode()
        header_need = 3 if magic in ("P1", "P4") else 4
        if magic in ("P4", "P5") and len(tokens) == header_need:
            i += 1  # single whitespace byte before binary payload
            break
    if magic not in ("P1", "P2", "P4", "P5"):
        raise ValueError(f"unsupported image magic {magic!r}")
    w, h = int(tokens[1]), int(tokens[2])
    if magic == "P1":
        rest = b" ".join(tokens[3:]).decode()
        vals = np.array([int(c) for c in rest if c in "01"], dtype=np.int64)
        grid = vals.reshape(h, w)
    elif magic == "P2":
        vals = np.array([int(t) for t in tokens[4 : 4 + w * h]], dtype=np.int64)
        grid = vals.reshape(h, w)
    elif magic == "P5":
        maxval = int(tokens[3])
        bypp = 2 if maxval > 255 else 1
        raw = np.frombuffer(data[i : i + w * h * bypp],
                            dtype=">u2" if bypp == 2 else np.uint8)
        grid = raw.astype(np.int64).reshape(h, w)
    else:  # P4, packed bits, 1 = black
        rowbytes = (w + 7) // 8
        raw = np.frombuffer(data[i : i + rowbytes * h], dtype=np.uint8)
        bits = np.unpackbits(raw.reshape(h, rowbytes), axis=1)[:, :w]
        grid = bits.astype(np.int64)
    rows, cols = np.nonzero(grid)
    return [(int(c), int(h - 1 - r)) for r, c in zip(rows, cols)]


def write_mask_pgm(path, cells):
    cells = np.asarray(list(cells), dtype=np.int64)
    lo = cells.min(0)
    span = cells.max(0) - lo + 1
    grid = np.zeros((span[1], span[0]), dtype=np.int64)
    for c in cells - lo:
        grid[span[1] - 1 - c[1], c[0]] = 255
    lines = ["P2", f"{span[0]} {span[1]}", "255"]
    lines += [" ".join(str(v) for v in row) for row in grid.tolist()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def domain_to_dict(domain):
    return {
        "cells": domain.cells.tolist(),
        "h": domain.h,
        "connectivity": domain.connectivity,
        "basepoint": domain.cells[domain.basepoint].tolist(),
    }


def write_domain_json(path, domain):
    with open(path, "w") as fh:
        json.dump(domain_to_dict(domain), fh, sort_keys=True, indent=0)
        fh.write("\n")


def read_domain_json(path):
    with open(path) as fh:
        d = json.load(fh)
    return core.build_domain(
        d["cells"],
        h=d.get("h", 1.0),
        connectivity=d.get("connectivity", "4"),
        basepoint=d.get("basepoint"),
    )


def write_node_csv(path, domain, values, header="value"):
    cols = ["i", "j", "k"][: domain.m]
    with open(path, "w") as fh:
        fh.write(",".join(cols + [header]) + "\n")
        for cell, v in zip(domain.cells.tolist(), np.asarray(values).tolist()):
            fh.write(",".join(str(c) for c in cell) + f",{v!r}\n")


def read_node_csv(path, domain):
    values = np.zeros(domain.n_cells)
    with open(path) as fh:
        next(fh)
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            cell = tuple(int(x) for x in parts[: domain.m])
            values[domain.index_of(cell)] = float(parts[domain.m])
    return values


def write_edge_csv(path, domain, values):
    m = domain.m
    tcols = [f"tail_{c}" for c in "ijk"[:m]]
    hcols = [f"head_{c}" for c in "ijk"[:m]]
    with open(path, "w") as fh:
        fh.write(",".join(tcols + hcols + ["value"]) + "\n")
        for (t, h), v in zip(domain.edges.tolist(), np.asarray(values).tolist()):
            row = domain.cells[t].tolist() + domain.cells[h].tolist()
            fh.write(",".join(str(c) for c in row) + f",{v!r}\n")


def write_measure_csv(path, mu):
    m = mu.m if mu.n_atoms else 2
    cols = ["x", "y", "z"][:m]
    with open(path, "w") as fh:
        fh.write(",".join(cols + ["weight"]) + "\n")
        for p, w in zip(mu.points.tolist(), mu.weights.tolist()):
            fh.write(",".join(repr(c) for c in p) + f",{w!r}\n")


def read_measure_csv(path):
    pts, ws = [], []
    with open(path) as fh:
        next(fh)
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            pts.append([float(x) for x in parts[:-1]])
            ws.append(float(parts[-1]))
    if not pts:
        return AtomicMeasure(np.empty((0, 2)), np.empty(0))
    return AtomicMeasure(np.array(pts), np.array(ws))


def write_table_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(x) if isinstance(x, float) else str(x) for x in row) + "\n")


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")
