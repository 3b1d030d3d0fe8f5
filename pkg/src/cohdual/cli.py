"""Command-line interface: ``cohdual {roc,discriminate,duality,saturate,sweep}``.

Input files are JSON with complex numbers written as ``[re, im]`` pairs::

    {"dim": 2,
     "states": [{"amplitudes": [[0.7071, 0], [0.7071, 0]]},
                {"matrix": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]}],
     "probs": [0.5, 0.5]}

Exit codes are 0 on success, 1 for bad input and 2 when a solver fails.
Floats are printed with 9 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import discrimination as disc
from .conic import SolverError
from .duality import (
    DualityReport, SeeSawOptions, post_discrimination_coherence, saturating_channel,
)
from .measures import ZERO_THRESHOLD, robustness_dual, robustness_primal
from .quantum import (
    DensityMatrix, PureState, StateEnsemble, channel_action, is_cptp, is_mio, maximally_coherent,
    mcs_ensemble,
)

log = logging.getLogger("cohdual")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2
NORM_TOL = 1e-6
BOUND_SLACK = 1e-5
SWEEP_COLUMNS = ["d", "k", "s_vn", "c_lower", "bound", "gap", "rounds"]
MAX_SWEEP_D = 6


class InputError(ValueError):
    """Malformed input; the message names the offending field."""


# ---------------------------------------------------------------------------
# number formatting


def fmt(x: float) -> str:
    """9 significant digits, with negative zero folded into zero."""
    x = float(x)
    if x == 0:
        x = 0.0
    return f"{x:.9g}"


def _round(x: float) -> float:
    return float(fmt(x))


def _jsonable(obj: Any) -> Any:
    """Recursively round floats and turn arrays into [re, im] nested lists."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return complex_to_json(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(obj) if math.isfinite(obj) else None
    return obj


# ---------------------------------------------------------------------------
# EnsembleFile


def complex_to_json(a: np.ndarray, digits: Optional[int] = 9) -> list:
    a = np.asarray(a, dtype=np.complex128)
    conv = _round if digits else float
    if a.ndim == 0:
        return [conv(a.real), conv(a.imag)]
    return [complex_to_json(x, digits) for x in a]


def _complex_array(value: Any, shape: tuple[int, ...], where: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{where}: expected numbers written as [re, im] pairs") from None
    if arr.shape != shape + (2,):
        raise InputError(f"{where}: expected shape {list(shape)} of [re, im] pairs, got {list(arr.shape)}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{where}: entries must be finite")
    return arr[..., 0] + 1j * arr[..., 1]


def _parse_state(entry: Any, dim: int, where: str):
    if not isinstance(entry, dict):
        raise InputError(f"{where}: expected an object with 'amplitudes' or 'matrix'")
    has_amp, has_mat = "amplitudes" in entry, "matrix" in entry
    if has_amp == has_mat:
        raise InputError(f"{where}: give exactly one of 'amplitudes' or 'matrix'")
    if has_amp:
        v = _complex_array(entry["amplitudes"], (dim,), f"{where}.amplitudes")
        norm = np.linalg.norm(v)
        if norm == 0:
            raise InputError(f"{where}.amplitudes: zero vector")
        if abs(norm - 1) > NORM_TOL:
            log.warning("%s.amplitudes: norm %s renormalized to 1", where, fmt(norm))
        return PureState(v / norm)
    m = _complex_array(entry["matrix"], (dim, dim), f"{where}.matrix")
    if np.max(np.abs(m - m.conj().T)) > NORM_TOL:
        raise InputError(f"{where}.matrix: not Hermitian")
    m = (m + m.conj().T) / 2
    tr = float(np.trace(m).real)
    if tr <= 0:
        raise InputError(f"{where}.matrix: trace must be positive")
    if abs(tr - 1) > NORM_TOL:
        log.warning("%s.matrix: trace %s renormalized to 1", where, fmt(tr))
    m = m / tr
    w, v = np.linalg.eigh(m)
    if w[0] < -NORM_TOL:
        raise InputError(f"{where}.matrix: not positive semidefinite (eigenvalue {fmt(w[0])})")
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        m = (v * (w / w.sum())) @ v.conj().T
    return DensityMatrix(m)


def _parse_dim(obj: dict) -> int:
    dim = obj.get("dim")
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise InputError("dim: expected a positive integer")
    return dim


def parse_ensemble(obj: Any) -> StateEnsemble:
    if not isinstance(obj, dict):
        raise InputError("top level: expected a JSON object")
    dim = _parse_dim(obj)
    raw = obj.get("states")
    if not isinstance(raw, list) or not raw:
        raise InputError("states: expected a non-empty list")
    states = [_parse_state(s, dim, f"states[{i}]") for i, s in enumerate(raw)]
    probs = obj.get("probs")
    if probs is None:
        return StateEnsemble.from_states(states)
    if not isinstance(probs, list) or len(probs) != len(states):
        raise InputError(f"probs: expected a list of {len(states)} numbers")
    for i, p in enumerate(probs):
        if isinstance(p, bool) or not isinstance(p, (int, float)) or not math.isfinite(p) or p < 0:
            raise InputError(f"probs[{i}]: expected a nonnegative finite number")
    total = float(sum(probs))
    if abs(total - 1) > NORM_TOL:
        raise InputError(f"probs: sum to {fmt(total)}, expected 1")
    return StateEnsemble.from_states(states, [p / total for p in probs])


def parse_state(obj: Any):
    """A single state: either an ensemble file with one state or a bare state object."""
    if not isinstance(obj, dict):
        raise InputError("top level: expected a JSON object")
    if "states" in obj:
        e = parse_ensemble(obj)
        if e.k != 1:
            raise InputError(f"states: expected exactly one state, got {e.k}")
        return e.states[0]
    dim = _parse_dim(obj)
    st = _parse_state({k: v for k, v in obj.items() if k in ("amplitudes", "matrix")}, dim, "state")
    return st.density() if isinstance(st, PureState) else st


def ensemble_to_json(e: StateEnsemble) -> dict:
    """Full-precision EnsembleFile; states are written as density matrices."""
    return {
        "dim": e.dim,
        "states": [{"matrix": complex_to_json(r.matrix, digits=None)} for r in e.states],
        "probs": [float(p) for p in e.probs],
    }


def load_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


# ---------------------------------------------------------------------------
# RunReport


@dataclass
class RunReport:
    command: str
    inputs: dict
    results: dict
    diagnostics: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_dict(self, timing: bool = False) -> dict:
        out = {"command": self.command, "inputs": self.inputs, "results": self.results,
               "diagnostics": self.diagnostics}
        if timing:
            out["wall_time"] = self.wall_time
        return _jsonable(out)

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=False)

    def to_text(self, timing: bool = False) -> str:
        lines = [f"command: {self.command}"]
        for title, section in (("inputs", self.inputs), ("results", self.results),
                               ("diagnostics", self.diagnostics)):
            if section:
                lines.append(f"{title}:")
                lines.extend(f"  {k}: {_text_value(v)}" for k, v in section.items())
        if timing:
            lines.append(f"wall time: {fmt(self.wall_time)} s")
        return "\n".join(lines)


def _text_value(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    if isinstance(v, np.ndarray):
        return json.dumps(complex_to_json(v))
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_text_value(x) for x in v) + "]"
    return str(v)


def _emit(report: RunReport, args) -> None:
    text = report.to_json(args.timing) if args.json else report.to_text(args.timing)
    print(text)


# ---------------------------------------------------------------------------
# commands


def cmd_roc(args) -> tuple[RunReport, int]:
    rho = parse_state(load_json(args.state_file)).matrix
    results: dict = {}
    diag: dict = {}
    if not args.dual_only:
        primal, w = robustness_primal(rho)
        results["primal"] = primal
        diag["witness_min_eig_plus_one"] = float(np.linalg.eigvalsh(w)[0] + 1)
        diag["witness_max_diag"] = float(np.max(np.real(np.diag(w))))
        diag["witness_value"] = float(np.real(np.trace(w @ rho)))
    if not args.primal_only:
        dual, s = robustness_dual(rho)
        results["dual_minus_one"] = dual - 1
        diag["dual_s_min_eig"] = float(np.linalg.eigvalsh(s)[0])
    if "primal" in results and "dual_minus_one" in results:
        c_r = (results["primal"] + results["dual_minus_one"]) / 2
        diag["gap"] = abs(results["primal"] - results["dual_minus_one"])
    else:
        c_r = results.get("primal", results.get("dual_minus_one"))
    if c_r < ZERO_THRESHOLD:
        c_r = 0.0
    results = {"c_r": c_r, "c_max": float(np.log2(1 + c_r)), **results}
    mode = "primal" if args.primal_only else "dual" if args.dual_only else "both"
    return RunReport("roc", {"state_file": args.state_file, "dim": rho.shape[0], "mode": mode},
                     results, diag), EXIT_OK


def _povm_json(povm) -> list:
    return [complex_to_json(e) for e in povm.effects]


def cmd_discriminate(args) -> tuple[RunReport, int]:
    if args.ancilla_dim is not None and args.cls != "incoherent":
        raise InputError("--ancilla-dim: only valid with --class incoherent")
    if args.ancilla_dim is not None and args.ancilla_dim < 1:
        raise InputError("--ancilla-dim: must be a positive integer")
    e = parse_ensemble(load_json(args.ensemble_file))
    inputs = {"ensemble_file": args.ensemble_file, "class": args.cls, "dim": e.dim, "k": e.k}
    results: dict = {}
    if args.cls == "optimal":
        res = disc.p_suc_optimal(e)
        results["p_success"] = res.value
    else:
        res = disc.p_suc_incoherent(e)
        results["p_success"] = res.value
        results["p_success_exact"] = str(res.exact)
        if args.ancilla_dim is not None:
            inputs["ancilla_dim"] = args.ancilla_dim
            inputs["ancilla"] = "maximally coherent"
            tau = maximally_coherent(args.ancilla_dim).density()
            assisted = disc.p_suc_incoherent_with_ancilla(e, tau)
            results["p_success_assisted"] = assisted.value
            results["p_success_unassisted"] = res.value
            results["difference"] = float(assisted.exact - res.exact)
            results["difference_exact"] = str(assisted.exact - res.exact)
    results["povm"] = _povm_json(res.povm)
    return RunReport("discriminate", inputs, results), EXIT_OK


def _seesaw_options(args) -> SeeSawOptions:
    if args.rounds < 1:
        raise InputError("--rounds: must be at least 1")
    if args.restarts < 0:
        raise InputError("--restarts: must be nonnegative")
    return SeeSawOptions(max_rounds=args.rounds, restarts=args.restarts, seed=args.seed)


def _duality_results(r: DualityReport) -> dict:
    return {
        "d": r.d, "k": r.k, "c_lower": r.c_lower, "bound": r.bound, "gap": r.gap,
        "pmax_bound": r.pmax_bound, "s_vn": r.s_vn, "s_min": r.s_min, "uniform": r.uniform,
    }


def cmd_duality(args) -> tuple[RunReport, int]:
    opts = _seesaw_options(args)
    e = parse_ensemble(load_json(args.ensemble_file))
    if not e.is_orthogonal_pure():
        raise InputError("states: ensemble must consist of mutually orthogonal pure states")
    r = post_discrimination_coherence(e, opts)
    diag = {"status": r.status, "rounds": r.rounds, "runs": r.runs, "history": r.history}
    if r.note:
        diag["note"] = r.note
    report = RunReport("duality", {"ensemble_file": args.ensemble_file, "rounds": args.rounds,
                                   "restarts": args.restarts, "seed": args.seed},
                       _duality_results(r), diag, r.seconds)
    if r.c_lower > r.bound + BOUND_SLACK:
        log.error("c_lower %s exceeds the bound %s", fmt(r.c_lower), fmt(r.bound))
        return report, EXIT_SOLVER
    return report, EXIT_OK


def cmd_saturate(args) -> tuple[RunReport, int]:
    d, k = args.d, args.k
    if d < 2 or not 1 <= k <= d:
        raise InputError(f"--d/--k: need d >= 2 and 1 <= k <= d, got d={d}, k={k}")
    ch, sigma, sigma_p = saturating_channel(d, k)
    e = mcs_ensemble(d, k)
    err = max(float(np.max(np.abs(channel_action(ch, r.matrix)
                                  - np.kron(np.diag(np.eye(k)[j]), sigma.matrix))))
              for j, r in enumerate(e.states))
    payload = {
        "d": d, "k": k, "dim_in": ch.dim_in, "dims_out": list(ch.dims_out),
        "choi": complex_to_json(ch.choi, digits=None),
        "sigma": complex_to_json(sigma.matrix, digits=None),
        "sigma_prime": complex_to_json(sigma_p.matrix, digits=None),
    }
    text = json.dumps(payload) + "\n"
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    results = {"is_cptp": is_cptp(ch, 1e-9), "is_mio": is_mio(ch, 1e-9), "image_error": err}
    return RunReport("saturate", {"d": d, "k": k, "out": args.out}, results), EXIT_OK


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"{path}: cannot write ({exc.strerror})") from None


def sweep_rows(dmax: int, opts: SeeSawOptions) -> list[DualityReport]:
    return [post_discrimination_coherence(mcs_ensemble(d, k), opts)
            for d in range(1, dmax + 1) for k in range(1, d + 1)]


def write_sweep_csv(fh, reports: Sequence[DualityReport], timing: bool = False) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS + (["seconds"] if timing else []))
    for r in sorted(reports, key=lambda r: (r.d, r.k)):
        row = [r.d, r.k, fmt(r.s_vn), fmt(r.c_lower), fmt(r.bound), fmt(r.gap), r.rounds]
        if timing:
            row.append(fmt(r.seconds))
        w.writerow(row)


def cmd_sweep(args) -> tuple[RunReport, int]:
    if not 2 <= args.dmax <= MAX_SWEEP_D:
        raise InputError(f"--dmax: must be between 2 and {MAX_SWEEP_D}")
    opts = _seesaw_options(args)
    out = Path(args.out)
    # fail on an unwritable path before spending time on the sweep
    try:
        fh = open(out, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"--out: cannot write {out} ({exc.strerror})") from None
    with fh:
        reports = sweep_rows(args.dmax, opts)
        write_sweep_csv(fh, reports, args.timing)
    worst = max(r.gap for r in reports)
    degraded = sum(r.status != "ok" for r in reports)
    report = RunReport("sweep", {"dmax": args.dmax, "out": str(out), "seed": args.seed,
                                 "rounds": args.rounds, "restarts": args.restarts},
                       {"rows": len(reports), "max_gap": worst}, {"degraded_rows": degraded},
                       sum(r.seconds for r in reports))
    return report, EXIT_OK


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 1), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print the run report as JSON")
    common.add_argument("--timing", action="store_true",
                        help="include wall-clock times (makes output run-dependent)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")

    seesaw = argparse.ArgumentParser(add_help=False)
    seesaw.add_argument("--rounds", type=int, default=SeeSawOptions.max_rounds, help="see-saw rounds per run")
    seesaw.add_argument("--restarts", type=int, default=SeeSawOptions.restarts, help="random restarts")
    seesaw.add_argument("--seed", type=int, default=0, help="seed for restart witnesses")

    p = _Parser(prog="cohdual", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    roc = sub.add_parser("roc", parents=[common], help="robustness of coherence of a state")
    roc.add_argument("state_file")
    only = roc.add_mutually_exclusive_group()
    only.add_argument("--primal-only", action="store_true")
    only.add_argument("--dual-only", action="store_true")
    roc.set_defaults(func=cmd_roc)

    dis = sub.add_parser("discriminate", parents=[common], help="minimum-error discrimination")
    dis.add_argument("ensemble_file")
    dis.add_argument("--class", dest="cls", choices=["optimal", "incoherent"], default="optimal")
    dis.add_argument("--ancilla-dim", type=int, default=None,
                     help="append a maximally coherent ancilla of this dimension")
    dis.set_defaults(func=cmd_discriminate)

    dua = sub.add_parser("duality", parents=[common, seesaw], help="post-discrimination coherence")
    dua.add_argument("ensemble_file")
    dua.set_defaults(func=cmd_duality)

    sat = sub.add_parser("saturate", parents=[common], help="emit the bound-saturating channel as JSON")
    sat.add_argument("--d", type=int, required=True)
    sat.add_argument("--k", type=int, required=True)
    sat.add_argument("--out", default=None, help="write the channel JSON here instead of stdout")
    sat.set_defaults(func=cmd_saturate)

    swp = sub.add_parser("sweep", parents=[common, seesaw], help="duality over all mcs ensembles")
    swp.add_argument("--dmax", type=int, required=True)
    swp.add_argument("--out", required=True, help="CSV output path")
    swp.set_defaults(func=cmd_sweep)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    start = time.perf_counter()
    try:
        report, code = args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report.wall_time = time.perf_counter() - start
    # saturate writes its payload to stdout itself unless --out is given
    if args.command != "saturate" or args.out:
        _emit(report, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
