"""Command-line interface.

    sheardiag diagonalize --input h.json --method sweep --out results/
    sheardiag compare     --input chain.json --method all --out results/
    sheardiag groundstate --input h.json --out results/

Exit status: 0 all requested results converged, 2 some result did not
converge (files are still written), 1 invalid input or configuration.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, specfile
from .diagonalizer import (
    DEFAULT_TOL,
    DiagonalResult,
    bravais_closed_form,
    diagonalize_disjoint_pairs_chain,
    diagonalize_general_sweep,
    diagonalize_three_body,
    diagonalize_two_body,
)
from .errors import ConvergenceError, UnstablePotentialError, ValidationError
from .model import QuadHamiltonian, bravais_parameters, to_kpform
from .normal_modes import normal_modes, zero_point_energy
from .shear import ROOT_POLICIES
from .states import (
    GaussianState,
    entangled_ground_state,
    ground_state_from_diagonal,
    ground_state_residual,
    zpe_compare,
)

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2
METHODS = ("oracle", "two_body", "pairs_chain", "bravais", "three_body", "sweep", "all")
FORMATS = ("csv", "json")
SCHEMA_VERSION = 1
TOOL = "sheardiag"


@dataclass(frozen=True)
class RunConfig:
    input: str
    method: str = "sweep"
    tol: float = DEFAULT_TOL
    max_sweeps: int | None = None
    root: str = "smaller"
    out: str = "."
    format: str = "csv"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValidationError(f"--tol must be positive, got {self.tol}")
        if self.method not in METHODS:
            raise ValidationError(f"--method must be one of {METHODS}, got {self.method!r}")
        if self.root not in ROOT_POLICIES:
            raise ValidationError(f"--root must be one of {ROOT_POLICIES}, got {self.root!r}")
        if self.format not in FORMATS:
            raise ValidationError(f"--format must be one of {FORMATS}, got {self.format!r}")
        if self.max_sweeps is not None and self.max_sweeps < 1:
            raise ValidationError(f"--max-sweeps must be >= 1, got {self.max_sweeps}")

    def digest(self, command: str, input_bytes: bytes) -> str:
        payload = {k: v for k, v in asdict(self).items() if k not in ("input", "out")}
        payload["command"] = command
        payload["input_sha256"] = hashlib.sha256(input_bytes).hexdigest()
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


class Output:
    """Writes result files into one directory with a provenance header."""

    def __init__(self, out: Path, fmt_: str, digest: str):
        self.out = out
        self.format = fmt_
        self.meta = {"tool": TOOL, "version": __version__, "schema": SCHEMA_VERSION, "config_sha256": digest}
        out.mkdir(parents=True, exist_ok=True)

    def json(self, name: str, body: dict) -> None:
        doc = {"provenance": self.meta, **body}
        (self.out / name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def table(self, stem: str, header: list[str], rows: list[list]) -> None:
        if self.format == "json":
            records = [dict(zip(header, r)) for r in rows]
            self.json(f"{stem}.json", {"columns": header, "rows": records})
            return
        buf = io.StringIO()
        buf.write(f"# tool={TOOL} version={__version__} schema={SCHEMA_VERSION} config_sha256={self.meta['config_sha256']}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) if isinstance(x, float) or x is None else x for x in r])
        (self.out / f"{stem}.csv").write_text(buf.getvalue())


def _run_method(method: str, h: QuadHamiltonian, cfg: RunConfig) -> DiagonalResult:
    if method == "two_body":
        return diagonalize_two_body(h, root=cfg.root)
    if method == "pairs_chain":
        return diagonalize_disjoint_pairs_chain(h, root=cfg.root)
    if method == "three_body":
        return diagonalize_three_body(h, tol=cfg.tol, root=cfg.root)
    if method == "sweep":
        return diagonalize_general_sweep(h, tol=cfg.tol, max_sweeps=cfg.max_sweeps, root=cfg.root)
    if method == "bravais":
        chain = bravais_parameters(h)
        if chain is None:
            raise ValidationError("method 'bravais' needs a uniform nearest-neighbour chain input")
        return bravais_closed_form(h.n, *chain, hbar=h.hbar)
    raise ValidationError(f"unknown method {method!r}")


def _applicable(h: QuadHamiltonian) -> list[str]:
    """Exact shear methods for ``method=all`` (the pairwise Bravais form is a probe, see compare)."""
    out = []
    if h.n == 2:
        out.append("two_body")
    if h.n % 2 == 0 and all(
        h.d_off[i, j] == 0 for i in range(h.n) for j in range(i + 1, h.n) if not (i % 2 == 0 and j == i + 1)
    ):
        out.append("pairs_chain")
    if h.n == 3:
        out.append("three_body")
    if h.n >= 2:
        out.append("sweep")
    return out


def _methods_for(cfg: RunConfig, h: QuadHamiltonian) -> list[str]:
    if cfg.method == "all":
        return ["oracle"] + _applicable(h)
    if cfg.method == "two_body" and h.n != 2:
        raise ValidationError(f"method 'two_body' needs n=2, input has n={h.n}")
    if cfg.method == "three_body" and h.n != 3:
        raise ValidationError(f"method 'three_body' needs n=3, input has n={h.n}")
    if cfg.method == "sweep" and h.n < 2:
        raise ValidationError("method 'sweep' needs n>=2")
    return [cfg.method]


def _load(cfg: RunConfig) -> tuple[QuadHamiltonian, bytes]:
    path = Path(cfg.input)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ValidationError(f"{path}: not UTF-8 text") from None
    return specfile.loads(text), raw


def cmd_diagonalize(cfg: RunConfig) -> int:
    h, raw = _load(cfg)
    methods = _methods_for(cfg, h)
    results: dict[str, DiagonalResult] = {}
    for m in methods:
        if m != "oracle":
            results[m] = _run_method(m, h, cfg)
    oracle = normal_modes(h).omega_sq

    out = Output(Path(cfg.out), cfg.format, cfg.digest("diagonalize", raw))
    header = ["method", "index", "m_eff", "d_eff", "omega_sq", "omega"]
    rows = []
    if "oracle" in methods:
        for k, w in enumerate(oracle):
            rows.append(["oracle", k, None, None, float(w), float(np.sqrt(w)) if w >= 0 else None])
    for m, r in results.items():
        for k in range(r.n):
            w = float(r.omega_sq[k])
            rows.append([m, k, float(r.m_eff[k]), float(r.d_eff[k]), w, float(np.sqrt(w)) if w >= 0 else None])
    out.table("frequencies", header, rows)

    res_rows = []
    for m, r in results.items():
        diff = float(np.max(np.abs(r.sorted_omega_sq() - oracle)))
        res_rows.append(
            [m, str(r.converged).lower(), float(r.k_residual), float(r.v_residual), diff, len(r.sequence)]
        )
    out.table(
        "residuals",
        ["method", "converged", "k_residual", "v_residual", "oracle_max_abs_diff", "steps"],
        res_rows,
    )
    out.json(
        "sequence.json",
        {
            "n": h.n,
            "index_base": 0,
            "methods": {
                m: {
                    "steps": r.sequence.as_list(),
                    "converged": r.converged,
                    "k_residual": r.k_residual,
                    "v_residual": r.v_residual,
                    "residual_trace": list(r.residual_trace),
                    "composed_map": r.sequence.composed_map.tolist(),
                }
                for m, r in results.items()
            },
        },
    )
    return EXIT_OK if all(r.converged for r in results.values()) else EXIT_NOT_CONVERGED


COMPARE_ALL = ("oracle", "two_body", "pairs_chain", "three_body", "sweep", "bravais", "toeplitz")


def _compare_methods(cfg: RunConfig, h: QuadHamiltonian) -> list[str]:
    if cfg.method == "all":
        chain = bravais_parameters(h) is not None
        keep = set(_applicable(h)) | {"oracle"}
        if chain:
            keep |= {"bravais", "toeplitz"}
        return [m for m in COMPARE_ALL if m in keep]
    return ["oracle"] + ([cfg.method] if cfg.method != "oracle" else [])


def cmd_compare(cfg: RunConfig) -> int:
    h, raw = _load(cfg)
    methods = _compare_methods(cfg, h)
    if cfg.method == "bravais" and bravais_parameters(h) is None:
        raise ValidationError("method 'bravais' needs a uniform nearest-neighbour chain input")
    if cfg.method == "bravais":
        methods.append("toeplitz")
    report = zpe_compare(h, methods, tol=cfg.tol, max_sweeps=cfg.max_sweeps, root=cfg.root)
    out = Output(Path(cfg.out), cfg.format, cfg.digest("compare", raw))
    header = ["kind", "method", "other", "mode", "value", "status"]
    rows = []
    for e in report.entries:
        status = e.error or ("converged" if e.converged in (None, True) else "not_converged")
        rows.append(["zpe", e.method, "", "", e.zpe, status])
    for e in report.entries:
        for k, w in enumerate(e.omega_sq or ()):
            rows.append(["omega_sq", e.method, "", k, float(w), ""])
    for a, b, v in report.zpe_diffs:
        rows.append(["zpe_abs_diff", a, b, "", float(v), ""])
    for a, b, v in report.spectrum_diffs:
        rows.append(["omega_sq_max_abs_diff", a, b, "", float(v), ""])
    out.table("compare", header, rows)
    failed_exact = [
        e for e in report.entries if e.method not in ("bravais", "toeplitz", "oracle") and e.converged is False
    ]
    return EXIT_NOT_CONVERGED if failed_exact else EXIT_OK


def cmd_groundstate(cfg: RunConfig) -> int:
    h, raw = _load(cfg)
    oracle = normal_modes(h).omega_sq
    if np.any(oracle <= 0):
        bad = oracle[oracle <= 0]
        raise UnstablePotentialError(
            f"unstable potential, no normalizable ground state; offending omega^2 = {bad.tolist()}", bad
        )
    method = "sweep" if cfg.method in ("all", "oracle") else cfg.method
    if h.n == 1:
        result = None
        B_diag = np.array([[np.sqrt(2.0 * h.d_diag[0] * h.masses[0]) / h.hbar]])
        diag_state = GaussianState.from_exponent(B_diag)
        ent = diag_state
        converged = True
    else:
        _methods_for(RunConfig(cfg.input, method, cfg.tol, cfg.max_sweeps, cfg.root, cfg.out, cfg.format), h)
        result = _run_method(method, h, cfg)
        diag_state = ground_state_from_diagonal(result, h.hbar)
        ent = entangled_ground_state(diag_state, result.sequence)
        converged = result.converged
    residual, energy = ground_state_residual(ent, to_kpform(h), h.hbar)
    zpe = zero_point_energy(oracle, h.hbar)
    out = Output(Path(cfg.out), cfg.format, cfg.digest("groundstate", raw))
    out.json(
        "state.json",
        {
            "method": method if result is not None else "single_oscillator",
            "n": h.n,
            "hbar": h.hbar,
            "converged": converged,
            "B_diagonal_frame": diag_state.B.tolist(),
            "B_entangled": ent.B.tolist(),
            "log_norm": ent.log_norm,
            "product_form": ent.is_product(),
            "residual": residual,
            "E0": energy,
            "oracle_zpe": zpe,
            "E0_rel_diff": abs(energy - zpe) / abs(zpe) if zpe else abs(energy),
        },
    )
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


COMMANDS = {"diagonalize": cmd_diagonalize, "compare": cmd_compare, "groundstate": cmd_groundstate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL, description="Shear-transformation diagonalization of quadratic Hamiltonians.")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", required=True, action="append", help="Hamiltonian JSON file (repeat for batch mode)")
        p.add_argument("--method", default="sweep" if name != "compare" else "all", choices=METHODS)
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)
        p.add_argument("--max-sweeps", type=int, default=None)
        p.add_argument("--root", default="smaller", choices=ROOT_POLICIES)
        p.add_argument("--out", default=".")
        p.add_argument("--format", default="csv", choices=FORMATS)
        p.add_argument("--jobs", type=int, default=1, help="parallel workers in batch mode")
    return parser


def run_one(command: str, cfg: RunConfig) -> tuple[int, str]:
    try:
        return COMMANDS[command](cfg), ""
    except (ValidationError, UnstablePotentialError) as exc:
        return EXIT_INPUT, f"{cfg.input}: {exc}"
    except ConvergenceError as exc:
        return EXIT_NOT_CONVERGED, f"{cfg.input}: {exc}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    inputs = args.input
    try:
        configs = []
        for path in inputs:
            out = Path(args.out) if len(inputs) == 1 else Path(args.out) / Path(path).stem
            configs.append(RunConfig(path, args.method, args.tol, args.max_sweeps, args.root, str(out), args.format))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if len(configs) > 1 and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(run_one, [args.command] * len(configs), configs))
    else:
        outcomes = [run_one(args.command, c) for c in configs]
    for _, msg in outcomes:
        if msg:
            print(f"error: {msg}", file=sys.stderr)
    return max(code for code, _ in outcomes)


if __name__ == "__main__":
    sys.exit(main())
