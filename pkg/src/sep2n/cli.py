"""Command-line front end: analyze, generate, verify, batch.

File formats are JSON with complex numbers as [re, im] pairs and a
format_version field.  Exit codes: 0 separable, 2 NPT-entangled, 3
PPT-entangled, 4 inconclusive, 1 input/usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .matrixcore import DensityState, ToleranceConfig, hermitize, partial_transpose_matrix
from .productfinder import ProductVector
from .sepengine import (
    ReductionTrace,
    SeparabilityCertificate,
    Verdict,
    VerdictKind,
    analyze,
    verify_certificate,
)

FORMAT_VERSION = 1
TOL_ENV_VAR = "SEP2N_TOL_FILE"

EXIT_CODES = {
    VerdictKind.SEPARABLE: 0,
    VerdictKind.ENTANGLED_NPT: 2,
    VerdictKind.ENTANGLED_PPT: 3,
    VerdictKind.INCONCLUSIVE: 4,
}


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# JSON encoding helpers
# ---------------------------------------------------------------------------

def _c2j(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _j2c(pair) -> complex:
    if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
        raise InputError(f"expected [re, im] pair, got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def _matrix_to_json(m: np.ndarray) -> list:
    return [[_c2j(z) for z in row] for row in m]


def _matrix_from_json(rows) -> np.ndarray:
    return np.array([[_j2c(z) for z in row] for row in rows], dtype=complex)


def _vector_to_json(v: np.ndarray) -> list:
    return [_c2j(z) for z in v]


def _vector_from_json(entries) -> np.ndarray:
    return np.array([_j2c(z) for z in entries], dtype=complex)


def certificate_to_json(cert: SeparabilityCertificate) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "terms": [
            {"weight": float(w), "e": _vector_to_json(pv.e), "f": _vector_to_json(pv.f)}
            for w, pv in cert.terms
        ],
    }


def certificate_from_json(data) -> SeparabilityCertificate:
    if "certificate" in data and isinstance(data["certificate"], dict):
        data = data["certificate"]
    if data is None or "terms" not in data:
        raise InputError("no certificate terms found")
    terms = []
    for t in data["terms"]:
        terms.append((float(t["weight"]),
                      ProductVector.from_e_f(_vector_from_json(t["e"]),
                                             _vector_from_json(t["f"]))))
    return SeparabilityCertificate(terms)


def _trace_to_json(trace: ReductionTrace) -> dict:
    steps = []
    for s in trace.steps:
        steps.append({
            "op": s.op,
            "lam": s.lam,
            "case": s.case,
            "alpha": "inf" if (s.op.startswith(("kernel", "subtract")) and s.alpha is None)
                     else (_c2j(s.alpha) if s.alpha is not None else None),
            "ranks_before": list(s.ranks_before) if s.ranks_before else None,
            "ranks_after": list(s.ranks_after) if s.ranks_after else None,
            "n_before": s.n_before,
            "n_after": s.n_after,
            "min_eig_after": list(s.min_eig_after) if s.min_eig_after else None,
            "detail": s.detail,
        })
    return {
        "steps": steps,
        "exhaustive_enumeration": trace.exhaustive_enumeration,
        "nonexhaustive_subtraction": trace.nonexhaustive_subtraction,
        "notes": list(trace.notes),
    }


# ---------------------------------------------------------------------------
# state file IO
# ---------------------------------------------------------------------------

def load_tolerances(flag_overrides: dict | None = None,
                    file_overrides: dict | None = None) -> ToleranceConfig:
    """Resolve tolerances: CLI flags > state-file overrides > env file > defaults."""
    data: dict = {}
    env_path = os.environ.get(TOL_ENV_VAR)
    if env_path:
        try:
            with open(env_path) as fh:
                data.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read tolerance config {env_path}: {exc}") from exc
    if file_overrides:
        data.update(file_overrides)
    if flag_overrides:
        data.update(flag_overrides)
    known = {"rank_rel_tol", "psd_tol", "root_residual_tol", "cert_recon_tol"}
    unknown = set(data) - known
    if unknown:
        raise InputError(f"unknown tolerance keys: {sorted(unknown)}")
    try:
        return ToleranceConfig(**data)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid tolerance config: {exc}") from exc


def state_to_json(matrix: np.ndarray, n: int, label: str = "",
                  tolerances: dict | None = None) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "n": int(n),
        "matrix": _matrix_to_json(matrix),
    }
    if label:
        doc["label"] = label
    if tolerances:
        doc["tolerances"] = tolerances
    return doc


def load_state(path, flag_overrides: dict | None = None) -> tuple[DensityState, dict]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "matrix" not in doc or "n" not in doc:
        raise InputError(f"{path}: state file needs 'n' and 'matrix' fields")
    n = int(doc["n"])
    try:
        matrix = _matrix_from_json(doc["matrix"])
    except (InputError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: bad matrix encoding: {exc}") from exc
    if matrix.shape != (2 * n, 2 * n):
        raise InputError(f"{path}: matrix shape {matrix.shape} inconsistent with n={n}")
    tol = load_tolerances(flag_overrides, doc.get("tolerances"))
    try:
        state = DensityState(matrix, n=n, tol=tol)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    return state, doc


def _write_json(path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------

def build_report(state: DensityState, verdict: Verdict, trace: ReductionTrace,
                 label: str, elapsed: float, reverified: bool | None) -> dict:
    report = {
        "format_version": FORMAT_VERSION,
        "label": label,
        "n": state.n,
        "verdict": verdict.kind.value,
        "reason": verdict.reason,
        "ranks": {"rho": state.rank, "rho_ta": state.pt_rank},
        "certificate": certificate_to_json(verdict.certificate)
        if verdict.certificate is not None else None,
        "witness": _witness_to_json(verdict.witness),
        "trace": _trace_to_json(trace),
        "warnings": list(state.warnings) + list(trace.notes),
        "tolerances": state.tol.as_dict(),
        "reverified": reverified,
    }
    return {"report": report, "timings": {"seconds": elapsed}}


def _witness_to_json(witness: dict | None):
    if witness is None:
        return None
    out = {}
    for k, v in witness.items():
        if isinstance(v, complex):
            out[k] = _c2j(v)
        elif isinstance(v, (list, tuple)):
            out[k] = [_c2j(x) if isinstance(x, complex) else x for x in v]
        else:
            out[k] = v
    return out


def run_analysis(path, flag_overrides: dict | None = None) -> tuple[dict, int]:
    state, doc = load_state(path, flag_overrides)
    start = time.perf_counter()
    verdict, trace = analyze(state)
    elapsed = time.perf_counter() - start
    reverified = None
    if verdict.kind is VerdictKind.SEPARABLE:
        # round-trip the certificate through its serialized form before
        # trusting it in the report
        rt = certificate_from_json(certificate_to_json(verdict.certificate))
        reverified = verify_certificate(state, rt)
        if not reverified:
            verdict = Verdict(VerdictKind.INCONCLUSIVE, reason="ReductionStalled")
            trace.notes.append("serialized certificate failed re-verification")
    report = build_report(state, verdict, trace, doc.get("label", ""), elapsed, reverified)
    return report, EXIT_CODES[VerdictKind(report["report"]["verdict"])]


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _random_product_states(rng, n: int, count: int):
    vecs = []
    for _ in range(count):
        e = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        vecs.append(ProductVector.from_e_f(e, f))
    return vecs


def generate_state(kind: str, n: int, rank: int | None, seed: int) -> tuple[np.ndarray, str]:
    """Deterministic test-state construction; self-checked before returning."""
    rng = np.random.default_rng(seed)
    if n < 1:
        raise InputError("n must be >= 1")
    dim = 2 * n
    if kind in ("separable", "rank-n-separable"):
        count = n if kind == "rank-n-separable" else (rank if rank is not None else dim)
        if count < 1 or count > 4 * dim:
            raise InputError(f"rank {count} out of range")
        m = np.zeros((dim, dim), dtype=complex)
        for pv in _random_product_states(rng, n, count):
            m += rng.uniform(0.5, 1.5) * pv.projector()
        m /= np.real(np.trace(m))
        state = DensityState(m, n=n)
        if kind == "rank-n-separable" and state.rank != n:
            raise InputError(f"generated rank {state.rank}, expected {n}; try another seed")
        if not state.is_ppt:
            raise InputError("generated separable state failed the transpose check")
        label = f"{kind} n={n} terms={count} seed={seed}"
    elif kind == "pt-invariant":
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        h = hermitize(g)
        h = (h + partial_transpose_matrix(h, n)) / 2
        wmin = float(np.min(np.linalg.eigvalsh(h)))
        m = h + (abs(wmin) + 0.1 * np.linalg.norm(h, 2)) * np.eye(dim)
        m /= np.real(np.trace(m))
        if np.linalg.norm(m - partial_transpose_matrix(m, n), 2) > 1e-12:
            raise InputError("pt-invariant construction failed")
        label = f"pt-invariant n={n} seed={seed}"
    elif kind == "npt":
        if n < 2:
            raise InputError("npt needs n >= 2")
        vec = np.zeros(dim, dtype=complex)
        vec[0] = 1.0       # |0>|1st>
        vec[n + 1] = 1.0   # |1>|2nd>
        m = np.outer(vec, vec.conj())
        m /= np.real(np.trace(m))
        if float(np.min(np.linalg.eigvalsh(partial_transpose_matrix(m, n)))) >= 0:
            raise InputError("npt construction failed")
        label = f"npt n={n}"
    elif kind == "random-ppt":
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        raw = g @ g.conj().T
        raw /= np.real(np.trace(raw))
        pt_min = float(np.min(np.linalg.eigvalsh(partial_transpose_matrix(raw, n))))
        mix = 0.0
        if pt_min < 0:
            mix = min(1.0, 1.05 * (-pt_min) / (-pt_min + 1.0 / dim))
        m = (1 - mix) * raw + mix * np.eye(dim) / dim
        if float(np.min(np.linalg.eigvalsh(partial_transpose_matrix(m, n)))) < -1e-12:
            raise InputError("random-ppt mixing failed")
        label = f"random-ppt n={n} seed={seed}"
    else:
        raise InputError(f"unknown kind {kind!r}")
    return m, label


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _parse_tol_flags(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise InputError(f"--tol expects KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        try:
            out[key.strip()] = float(value)
        except ValueError as exc:
            raise InputError(f"--tol {pair!r}: {exc}") from exc
    return out


def cmd_analyze(args) -> int:
    overrides = _parse_tol_flags(args.tol)
    report, code = run_analysis(args.input, overrides)
    out = args.report or (str(args.input) + ".report.json")
    _write_json(out, report)
    r = report["report"]
    print(f"{args.input}: {r['verdict']}"
          + (f" ({r['reason']})" if r["reason"] else "")
          + f"  ranks={r['ranks']['rho']},{r['ranks']['rho_ta']}"
          + (f"  terms={len(r['certificate']['terms'])}" if r["certificate"] else ""))
    return code


def cmd_generate(args) -> int:
    matrix, label = generate_state(args.kind, args.n, args.rank, args.seed)
    doc = state_to_json(matrix, args.n, label=label)
    _write_json(args.out, doc)
    print(f"wrote {args.out}: {label}")
    return 0


def cmd_verify(args) -> int:
    state, _doc = load_state(args.state)
    try:
        with open(args.certificate) as fh:
            cert_doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read certificate {args.certificate}: {exc}") from exc
    if isinstance(cert_doc, dict) and "report" in cert_doc:
        cert_doc = cert_doc["report"]
    cert = certificate_from_json(cert_doc)
    try:
        ok = verify_certificate(state, cert)
    except ValueError as exc:
        print(f"invalid certificate: {exc}", file=sys.stderr)
        return 1
    print("certificate " + ("verifies" if ok else "FAILS reconstruction"))
    return 0 if ok else 1


def cmd_batch(args) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        raise InputError(f"{directory} is not a directory")
    inputs = sorted(p for p in directory.glob("*.json")
                    if not p.name.endswith(".report.json"))
    out_dir = Path(args.out_dir) if args.out_dir else directory
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(path):
        try:
            report, _code = run_analysis(path)
            _write_json(out_dir / (path.stem + ".report.json"), report)
            return path.name, report["report"]["verdict"], report["timings"]["seconds"], None
        except InputError as exc:
            return path.name, "error", 0.0, str(exc)

    jobs = max(1, args.jobs)
    if jobs == 1:
        results = [work(p) for p in inputs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, inputs))

    counts: dict[str, int] = {}
    times = []
    for _name, verdict, seconds, err in results:
        counts[verdict] = counts.get(verdict, 0) + 1
        if err is None:
            times.append(seconds)
    print(f"{'file':<32} {'verdict':<16} {'seconds':>8}")
    for name, verdict, seconds, err in results:
        extra = f"  ({err})" if err else ""
        print(f"{name:<32} {verdict:<16} {seconds:>8.3f}{extra}")
    print("-" * 58)
    for verdict in sorted(counts):
        print(f"{verdict:<20} {counts[verdict]}")
    if times:
        times.sort()
        p50 = times[len(times) // 2]
        p90 = times[min(len(times) - 1, int(0.9 * len(times)))]
        print(f"timing p50={p50:.3f}s p90={p90:.3f}s max={times[-1]:.3f}s")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sep2n",
                                     description="Separability analysis on C2 x CN")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="analyze one state file")
    p.add_argument("input")
    p.add_argument("--tol", action="append", metavar="KEY=VALUE",
                   help="tolerance override (repeatable)")
    p.add_argument("--report", help="report output path (default: <input>.report.json)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("generate", help="write a test state")
    p.add_argument("--kind", required=True,
                   choices=["separable", "rank-n-separable", "pt-invariant", "npt", "random-ppt"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("verify", help="verify a certificate against a state")
    p.add_argument("state")
    p.add_argument("certificate")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("batch", help="analyze every *.json state in a directory")
    p.add_argument("directory")
    p.add_argument("--jobs", type=int, default=4)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
