"""JSON input files describing a Hamiltonian.

Two layouts are accepted::

    {"n": 2, "hbar": 1.0, "masses": [1, 1], "phi": [[2, 1], [1, 2]]}
    {"chain": {"n": 4, "m": 1.0, "d1": 1.0, "d12": 1.0}, "hbar": 1.0}

``phi`` is symmetrized on load (``d_i = phi_ii/2``, ``d_ij = (phi_ij + phi_ji)/2``).
The chain layout describes a uniform open nearest-neighbour chain. ``hbar``
is optional (default 1). Unknown keys are rejected.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .model import QuadHamiltonian, build_nn_chain

MATRIX_KEYS = {"n", "hbar", "masses", "phi"}
CHAIN_TOP_KEYS = {"chain", "hbar"}
CHAIN_KEYS = {"n", "m", "d1", "d12"}


def _number(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"field {field!r}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(f"field {field!r}: non-finite value {value!r}")
    return float(value)


def _count(value, field: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"field {field!r}: expected an integer, got {value!r}")
    if value < 1:
        raise ValidationError(f"field {field!r}: must be >= 1, got {value}")
    return value


def _unknown(keys, allowed, where: str) -> None:
    extra = sorted(set(keys) - allowed)
    if extra:
        raise ValidationError(f"{where}: unknown field(s) {extra}; allowed {sorted(allowed)}")


def parse_spec(doc) -> QuadHamiltonian:
    if not isinstance(doc, dict):
        raise ValidationError("top level must be a JSON object")
    hbar = _number(doc.get("hbar", 1.0), "hbar")
    if "chain" in doc:
        _unknown(doc, CHAIN_TOP_KEYS, "top level")
        chain = doc["chain"]
        if not isinstance(chain, dict):
            raise ValidationError("field 'chain': expected an object")
        _unknown(chain, CHAIN_KEYS, "field 'chain'")
        missing = sorted(CHAIN_KEYS - set(chain))
        if missing:
            raise ValidationError(f"field 'chain': missing {missing}")
        n = _count(chain["n"], "chain.n")
        m = _number(chain["m"], "chain.m")
        d1 = _number(chain["d1"], "chain.d1")
        d12 = _number(chain["d12"], "chain.d12")
        return build_nn_chain(n, np.full(n, m), np.full(n, d1), np.full(n - 1, d12), hbar)

    _unknown(doc, MATRIX_KEYS, "top level")
    missing = sorted({"n", "masses", "phi"} - set(doc))
    if missing:
        raise ValidationError(f"top level: missing field(s) {missing}")
    n = _count(doc["n"], "n")
    masses = doc["masses"]
    if not isinstance(masses, list) or len(masses) != n:
        raise ValidationError(f"field 'masses': expected a list of {n} numbers")
    masses = [_number(x, f"masses[{k}]") for k, x in enumerate(masses)]
    phi = doc["phi"]
    if not isinstance(phi, list) or len(phi) != n:
        raise ValidationError(f"field 'phi': expected {n} rows")
    rows = []
    for r, row in enumerate(phi):
        if not isinstance(row, list) or len(row) != n:
            raise ValidationError(f"field 'phi[{r}]': expected a list of {n} numbers")
        rows.append([_number(x, f"phi[{r}][{c}]") for c, x in enumerate(row)])
    return QuadHamiltonian.from_phi(masses, rows, hbar)


def loads(text: str) -> QuadHamiltonian:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_spec(doc)


def load(path) -> QuadHamiltonian:
    return loads(Path(path).read_text())


def dumps(h: QuadHamiltonian) -> str:
    """Matrix layout for ``h`` (round-trips through :func:`loads`)."""
    doc = {"n": h.n, "hbar": h.hbar, "masses": h.masses.tolist(), "phi": h.phi().tolist()}
    return json.dumps(doc, indent=2)
