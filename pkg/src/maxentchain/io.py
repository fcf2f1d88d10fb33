"""Chain spec JSON in, result JSON out."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import StructuralError
from .model import PartialChainSpec, StateSpace

__all__ = ["spec_from_dict", "spec_to_dict", "load_spec", "dump_json"]

_REQUIRED = ("visible", "hidden", "P_II", "P_IE", "P_EI", "pi_I")


def spec_from_dict(data: dict) -> PartialChainSpec:
    """Build a spec from the JSON layout.

    Keys: ``visible``, ``hidden``, ``P_II``, ``P_IE``, ``P_EI``, ``pi_I``
    and optionally ``L`` and ``partition``. A closed labyrinth (no visible
    states) may omit the visible blocks.
    """
    if not isinstance(data, dict):
        raise StructuralError("spec must be a JSON object")
    closed = "visible" in data and len(data["visible"]) == 0
    missing = [k for k in _REQUIRED if k not in data
               and not (closed and k in ("P_II", "P_IE", "P_EI", "pi_I"))]
    if missing:
        raise StructuralError(f"spec is missing keys {missing}")
    states = StateSpace(tuple(data["visible"]), tuple(data["hidden"]))
    ni, ne = states.n_visible, states.n_hidden
    try:
        return PartialChainSpec(
            states=states,
            p_ii=np.asarray(data.get("P_II", np.zeros((ni, ni))), dtype=float).reshape(ni, ni),
            p_ie=np.asarray(data.get("P_IE", np.zeros((ni, ne))), dtype=float).reshape(ni, ne),
            p_ei=np.asarray(data.get("P_EI", np.zeros((ne, ni))), dtype=float).reshape(ne, ni),
            pi_i=np.asarray(data.get("pi_I", []), dtype=float),
            comm=None if data.get("L") is None else np.asarray(data["L"], dtype=float),
            partition=None if data.get("partition") is None else data["partition"],
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, StructuralError):
            raise
        raise StructuralError(f"malformed spec: {exc}") from exc


def spec_to_dict(spec: PartialChainSpec) -> dict:
    out = {
        "visible": list(spec.states.visible),
        "hidden": list(spec.states.hidden),
        "P_II": spec.p_ii.tolist(),
        "P_IE": spec.p_ie.tolist(),
        "P_EI": spec.p_ei.tolist(),
        "pi_I": spec.pi_i.tolist(),
    }
    if spec.comm is not None:
        out["L"] = spec.comm.astype(int).tolist()
    if spec.partition is not None:
        out["partition"] = [list(b) for b in spec.partition]
    return out


def load_spec(path) -> PartialChainSpec:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise StructuralError(f"{path}: invalid JSON ({exc})") from exc
    return spec_from_dict(data)


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, default=_default) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
