"""Shared file encodings.

Complex numbers serialize as two-element arrays ``[re, im]`` and matrices as
row-major nested arrays of such pairs; every object block and artifact uses
this encoding. CSV output uses '.' decimals and 17 significant digits so
float64 values round-trip exactly.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ParseError
from .instruments import KrausInstrument
from .observables import DensityMatrix, OutcomeSpace, Povm


def fmt_float(x) -> str:
    return format(float(x), ".17g")


def encode_complex(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def decode_complex(data) -> complex:
    if not isinstance(data, (list, tuple)) or len(data) != 2:
        raise ParseError(f"complex value must be [re, im], got {data!r}")
    return complex(float(data[0]), float(data[1]))


def encode_matrix(m) -> list[list[list[float]]]:
    a = np.asarray(m, dtype=complex)
    return [[encode_complex(z) for z in row] for row in a]


def decode_matrix(data) -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise ParseError("matrix must be a nonempty nested array")
    rows = []
    width = None
    for row in data:
        if not isinstance(row, list):
            raise ParseError("matrix rows must be arrays")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError("matrix rows have inconsistent lengths")
        rows.append([decode_complex(z) for z in row])
    return np.array(rows, dtype=complex)


def encode_povm(p: Povm) -> dict:
    block = {
        "labels": list(p.space.labels),
        "effects": {lab: encode_matrix(p.effect(lab)) for lab in p.space.labels},
    }
    if p.space.embedding is not None:
        block["embedding"] = {lab: p.space.embedding[lab] for lab in p.space.labels}
    return block


def decode_povm(block: dict) -> Povm:
    labels = tuple(str(x) for x in block["labels"])
    embedding = block.get("embedding")
    if embedding is not None:
        embedding = {str(k): float(v) for k, v in embedding.items()}
    space = OutcomeSpace(labels, embedding)
    effects = {lab: decode_matrix(block["effects"][lab]) for lab in labels}
    return Povm(space, effects)


def encode_instrument(inst: KrausInstrument) -> dict:
    return {
        "dim_in": inst.dim_in,
        "dim_out": inst.dim_out,
        "labels": list(inst.space.labels),
        "kraus": {
            lab: [encode_matrix(k) for k in inst.kraus_for(lab)]
            for lab in inst.space.labels
            if inst.kraus_for(lab)
        },
    }


def decode_instrument(block: dict) -> KrausInstrument:
    labels = tuple(str(x) for x in block["labels"])
    kraus = {
        str(lab): [decode_matrix(m) for m in lst]
        for lab, lst in block["kraus"].items()
    }
    return KrausInstrument(
        int(block["dim_in"]), int(block["dim_out"]), OutcomeSpace(labels), kraus
    )


def encode_state(rho: DensityMatrix) -> list:
    return encode_matrix(rho.matrix)


def dump_json(obj) -> str:
    """Deterministic JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_json(obj))


def write_csv(path, header: list[str], rows) -> None:
    """Plain CSV with '.' decimals; floats printed with 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for cell in row:
                if isinstance(cell, float) or isinstance(cell, np.floating):
                    cells.append(fmt_float(cell))
                else:
                    cells.append(str(cell))
            fh.write(",".join(cells) + "\n")
