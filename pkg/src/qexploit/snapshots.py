"""Persist finite SGs and solve results as ``.npz`` archives with a JSON header."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ProvenanceError
from .sgmodel import FiniteSG
from .solvers import SolveResult

FORMAT_VERSION = 1


def _write(path, header: dict, arrays: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = json.dumps(header, sort_keys=True)
    with open(path, "wb") as fh:
        np.savez_compressed(fh, header=np.array(blob), **arrays)
    return path


def _read(path) -> tuple[dict, dict]:
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        arrays = {k: data[k] for k in data.files if k != "header"}
    return header, arrays


def save_sg(sg: FiniteSG, path) -> Path:
    header = {
        "kind": "finite-sg",
        "format": FORMAT_VERSION,
        "provenance": sg.provenance,
        "digest": sg.digest(),
        "gamma": sg.gamma,
        "a_actions": list(sg.a_actions),
        "zero_sum_pairs": [list(p) for p in sg.zero_sum_pairs],
        "n_states": sg.n_states,
    }
    return _write(path, header, {"rewards": sg.rewards, "next_index": sg.next_index, "probs": sg.probs})


def load_sg(path) -> FiniteSG:
    header, arrays = _read(path)
    if header.get("kind") != "finite-sg":
        raise ProvenanceError(f"{path} is not a finite-SG snapshot")
    sg = FiniteSG(
        rewards=arrays["rewards"],
        next_index=arrays["next_index"],
        probs=arrays["probs"],
        gamma=header["gamma"],
        a_actions=tuple(header["a_actions"]),
        zero_sum_pairs=tuple(tuple(p) for p in header["zero_sum_pairs"]),
        provenance=header["provenance"],
    )
    if sg.digest() != header["digest"]:
        raise ProvenanceError(f"{path}: stored digest does not match its provenance record")
    return sg


def save_result(result: SolveResult, path) -> Path:
    header = {
        "kind": "solve-result",
        "format": FORMAT_VERSION,
        "provenance": result.provenance,
        "iterations": result.iterations,
        "residual": result.residual,
        "converged": result.converged,
        "stop": result.stop,
        "gamma": result.gamma,
        "maximizer": result.maximizer,
        "minimizer": result.minimizer,
        "n_policies": len(result.policies),
    }
    arrays = {"values": result.values, "residuals": result.residuals}
    for j, p in enumerate(result.policies):
        arrays[f"policy_{j}"] = p
    if result.horizon_values is not None:
        arrays["horizon_values"] = result.horizon_values
    return _write(path, header, arrays)


def load_result(path, sg: FiniteSG | None = None) -> SolveResult:
    """Load a solve result; with ``sg`` given, refuse one solved for another SG."""
    header, arrays = _read(path)
    if header.get("kind") != "solve-result":
        raise ProvenanceError(f"{path} is not a solve-result snapshot")
    if sg is not None and header["provenance"] != sg.digest():
        raise ProvenanceError(
            f"{path} was solved for SG {header['provenance'][:12]}, not {sg.digest()[:12]}"
        )
    return SolveResult(
        values=arrays["values"],
        policies=[arrays[f"policy_{j}"] for j in range(header["n_policies"])],
        iterations=header["iterations"],
        residual=header["residual"],
        converged=header["converged"],
        stop=header["stop"],
        gamma=header["gamma"],
        maximizer=header["maximizer"],
        minimizer=header["minimizer"],
        residuals=arrays["residuals"],
        horizon_values=arrays.get("horizon_values"),
        provenance=header["provenance"],
    )
