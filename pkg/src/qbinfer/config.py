"""Experiment config documents.

One self-contained UTF-8 JSON file per experiment:

    {
      "version": 1,
      "system": {"dim": 2},
      "objects": {
        "states":      {name: matrix},
        "matrices":    {name: matrix},            # raw operators (unitaries)
        "povms":       {name: povm block},
        "instruments": {name: instrument block},
        "models":      {name: model block}
      },
      "run": { ... command parameters, see README ... }
    }

`load_config` decodes and fully validates every object; `validate_report`
computes residuals first so a broken object is reported with numbers instead
of failing at construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import ParseError, QbinferError
from .inference import ParamModel
from .instruments import KrausInstrument, instrument_residuals
from .observables import DensityMatrix, OutcomeSpace, Povm, density_residuals, povm_residuals
from .serialize import decode_instrument, decode_matrix, decode_povm


@dataclass
class ExperimentConfig:
    version: int
    dim: int
    states: dict[str, DensityMatrix] = field(default_factory=dict)
    matrices: dict[str, np.ndarray] = field(default_factory=dict)
    povms: dict[str, Povm] = field(default_factory=dict)
    instruments: dict[str, KrausInstrument] = field(default_factory=dict)
    models: dict[str, ParamModel] = field(default_factory=dict)
    run: dict = field(default_factory=dict)


def _read_document(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _decode_model(block: dict) -> ParamModel:
    grid = [float(t) for t in block["grid"]]
    povm = decode_povm(block["param_observable"])
    prior = DensityMatrix(decode_matrix(block["prior_state"]))
    states_by_theta = None
    if block.get("states_by_theta") is not None:
        labels = povm.space.labels
        emb = povm.space.embedding or {}
        states_by_theta = {
            emb[str(lab)]: DensityMatrix(decode_matrix(m))
            for lab, m in block["states_by_theta"].items()
        }
    weights = block.get("prior_weights")
    return ParamModel(
        tuple(grid),
        povm,
        prior,
        states_by_theta=states_by_theta,
        prior_weights=None if weights is None else tuple(float(w) for w in weights),
    )


# run-block keys that name objects, per section they resolve in
_REFERENCES = {
    "states": ["prior", "rho0", "rho", "sigma"],
    "matrices": ["unitary"],
    "instruments": ["instrument"],
    "models": ["model"],
}
_LIST_REFERENCES = {
    "instruments": ["instruments", "channels"],
}


def check_references(cfg: ExperimentConfig) -> list[str]:
    """Names referenced by the run block that do not resolve."""
    missing = []
    sections = {
        "states": cfg.states,
        "matrices": cfg.matrices,
        "instruments": cfg.instruments,
        "models": cfg.models,
    }
    for section, keys in _REFERENCES.items():
        for key in keys:
            name = cfg.run.get(key)
            if isinstance(name, str) and name not in sections[section]:
                missing.append(f"{key}={name!r} not found in objects.{section}")
    for section, keys in _LIST_REFERENCES.items():
        for key in keys:
            names = cfg.run.get(key)
            if isinstance(names, list):
                for name in names:
                    if name not in sections[section]:
                        missing.append(f"{key} entry {name!r} not found in objects.{section}")
    return missing


def load_config(path: str) -> ExperimentConfig:
    doc = _read_document(path)
    if not isinstance(doc, dict):
        raise ParseError("config root must be an object")
    try:
        version = int(doc.get("version", 1))
        dim = int(doc["system"]["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"missing or malformed system block: {exc}") from exc
    objects = doc.get("objects", {})
    cfg = ExperimentConfig(version=version, dim=dim, run=doc.get("run", {}))
    try:
        for name, m in objects.get("states", {}).items():
            cfg.states[name] = DensityMatrix(decode_matrix(m))
        for name, m in objects.get("matrices", {}).items():
            cfg.matrices[name] = decode_matrix(m)
        for name, block in objects.get("povms", {}).items():
            cfg.povms[name] = decode_povm(block)
        for name, block in objects.get("instruments", {}).items():
            cfg.instruments[name] = decode_instrument(block)
        for name, block in objects.get("models", {}).items():
            cfg.models[name] = _decode_model(block)
    except KeyError as exc:
        raise ParseError(f"object block missing field {exc}") from exc
    problems = []
    for name, st in cfg.states.items():
        if st.dim != dim:
            problems.append(f"state {name!r} has dimension {st.dim}, system is {dim}")
    for name, m in cfg.matrices.items():
        if m.shape[0] != dim:
            problems.append(f"matrix {name!r} has dimension {m.shape[0]}, system is {dim}")
    for name, inst in cfg.instruments.items():
        if inst.dim_in != dim:
            problems.append(
                f"instrument {name!r} has input dimension {inst.dim_in}, system is {dim}"
            )
    for name, model in cfg.models.items():
        if model.param_observable.dim != dim:
            problems.append(f"model {name!r} acts on dimension {model.param_observable.dim}")
    missing = check_references(cfg)
    if problems or missing:
        raise QbinferError(
            "unresolved references or dimension mismatches: "
            + "; ".join(problems + missing)
        )
    return cfg


def validate_report(path: str) -> tuple[list[str], bool]:
    """Residual report for every object, using the current tolerances.

    Returns (lines, ok). Raises ParseError only for unreadable or malformed
    documents; domain-invalid objects are reported, not raised.
    """
    doc = _read_document(path)
    if not isinstance(doc, dict) or "system" not in doc:
        raise ParseError("config root must be an object with a system block")
    objects = doc.get("objects", {})
    lines = []
    ok = True

    def emit(kind: str, name: str, residuals: dict[str, float], passed: bool):
        nonlocal ok
        ok = ok and passed
        status = "ok" if passed else "FAIL"
        detail = " ".join(f"{k}={v:.3e}" for k, v in residuals.items())
        lines.append(f"{status:4s} {kind} {name}: {detail}")

    for name, m in objects.get("states", {}).items():
        try:
            r = density_residuals(decode_matrix(m))
            passed = (
                r["herm_defect"] <= linalg.HERM_TOL
                and r["min_eigenvalue"] >= -linalg.PSD_TOL
                and r["trace_deviation"] <= linalg.NORM_TOL
            )
            emit("state", name, r, passed)
        except QbinferError as exc:
            emit("state", name, {}, False)
            lines.append(f"     detail: {exc}")
    for name, m in objects.get("matrices", {}).items():
        try:
            decode_matrix(m)
            emit("matrix", name, {}, True)
        except (QbinferError, ValueError) as exc:
            emit("matrix", name, {}, False)
            lines.append(f"     detail: {exc}")
    for name, block in objects.get("povms", {}).items():
        try:
            labels = tuple(str(x) for x in block["labels"])
            emb = block.get("embedding")
            space = OutcomeSpace(
                labels, None if emb is None else {str(k): float(v) for k, v in emb.items()}
            )
            effects = {lab: decode_matrix(block["effects"][lab]) for lab in labels}
            r = povm_residuals(space, effects)
            passed = r["completeness"] <= linalg.NORM_TOL and all(
                v <= linalg.HERM_TOL for k, v in r.items() if k.startswith("herm[")
            ) and all(
                v >= -linalg.PSD_TOL for k, v in r.items() if k.startswith("min_eig[")
            )
            emit("povm", name, r, passed)
        except (QbinferError, KeyError, ValueError) as exc:
            emit("povm", name, {}, False)
            lines.append(f"     detail: {exc}")
    for name, block in objects.get("instruments", {}).items():
        try:
            kraus = {
                str(lab): [decode_matrix(m) for m in lst]
                for lab, lst in block["kraus"].items()
            }
            r = instrument_residuals(int(block["dim_in"]), int(block["dim_out"]), kraus)
            passed = r["completeness"] <= linalg.NORM_TOL and all(
                v > 1e-8 for k, v in r.items() if k.startswith("independence[")
            )
            emit("instrument", name, r, passed)
        except (QbinferError, KeyError, ValueError) as exc:
            emit("instrument", name, {}, False)
            lines.append(f"     detail: {exc}")
    for name, block in objects.get("models", {}).items():
        try:
            _decode_model(block)
            emit("model", name, {}, True)
        except (QbinferError, KeyError, ValueError) as exc:
            emit("model", name, {}, False)
            lines.append(f"     detail: {exc}")
    if ok:
        try:
            cfg = load_config(path)
            missing = check_references(cfg)
            for item in missing:
                ok = False
                lines.append(f"FAIL reference: {item}")
        except QbinferError as exc:
            ok = False
            lines.append(f"FAIL config: {exc}")
    return lines, ok
