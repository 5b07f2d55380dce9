"""Scenario runner: ``pqkit run --scenario FILE`` and ``pqkit generate NAME``.

Scenario files are JSON::

    {
      "structure": {"generator": "propo", "m": 2, "h": "h_one"}   # or {"file": "H.json"}
      "samples": {"count": 20, "low": 0.5, "high": 1.5, "points": [[...], ...]},
      "tol": 1e-8,
      "seed": 0,
      "checks": ["pde_residual", {"name": "quaternionicity_witness", "expect": "fail"}],
      "output": "report.json"
    }

Each check may carry ``"params"`` (see CHECKS) and ``"tol"``.  The report is
written atomically and contains every residual; its only time-dependent
field is ``"created"``.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import geometry as geo
from . import integrability as integ
from . import pointwise as pw
from . import twistor as tw
from .connections import obata
from .report import Report, Verdict
from .tensorcalc import torsion_TH_at

SCHEMA = "pqkit.report/1"
SCENARIO_KEYS = {"structure", "samples", "tol", "seed", "checks", "output", "name"}

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class ScenarioError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Structures


def _gen_flat(m=2):
    return geo.flat_model(m)


def _gen_propo(m=2, h="h_one"):
    return geo.propo_structure(m, h)


def _gen_diffeo(m=2, seed=0):
    return geo.diffeomorphic_model(m, seed)


def _gen_random(m=2, seed=0, commuting_with=None):
    return geo.random_structure(m, seed, commuting_with=commuting_with, symbolic=commuting_with is None)


GENERATORS: dict[str, Callable[..., geo.PqStructure]] = {
    "flat": _gen_flat,
    "propo": _gen_propo,
    "diffeo": _gen_diffeo,
    "random": _gen_random,
}


def build_structure(spec: dict, base: Path) -> geo.PqStructure:
    if "file" in spec:
        path = Path(spec["file"])
        return geo.load_structure(path if path.is_absolute() else base / path)
    gen = spec.get("generator")
    if gen not in GENERATORS:
        raise ScenarioError(f"unknown generator {gen!r}; known: {sorted(GENERATORS)}")
    params = {k: v for k, v in spec.items() if k != "generator"}
    try:
        return GENERATORS[gen](**params)
    except TypeError as exc:
        raise ScenarioError(f"bad parameters for generator {gen!r}: {exc}") from None


# ---------------------------------------------------------------------------
# Checks: fn(H, samples, tol, seed, **params) -> Report


def _diagonal_block(H: geo.PqStructure):
    """(f_it) with Ker(J3 - Id) spanned by d/dx_i + sum_t f_it d/dy_t, when J2 = diag(Id, -Id)."""
    if not H.is_symbolic:
        raise ScenarioError("pde_residual needs an expression-defined structure")
    k = H.dim // 2
    J2 = np.array(H.J2.value(H.chart.point([1.0] * H.dim)))
    if np.abs(J2 - np.diag([1.0] * k + [-1.0] * k)).max() > 0 or not H.J2.is_constant():
        raise ScenarioError("pde_residual needs J2 = diag(Id, -Id)")
    E = H.J3.entries
    return [[E[k + t][i] for t in range(k)] for i in range(k)]


def check_pde(H, samples, tol, seed):
    f = _diagonal_block(H)
    res = max(integ.pde_residual(f, p, H.chart) for p in samples)
    return Report.from_residuals("pde_residual", {"pde": res}, tol, samples)


def check_admissible(H, samples, tol, seed):
    return geo.admissible_basis_check(H, samples, tol)


def check_integrable(H, samples, tol, seed, coeffs=(0.0, 1.0, 0.0)):
    return integ.is_integrable(integ.CompatibleStructure.constant(H, coeffs), samples, tol, seed=seed)


def check_torsion(H, samples, tol, seed):
    res = max(pw.norm(obata(H, p).torsion() - torsion_TH_at(H, p)) for p in samples)
    return Report.from_residuals("obata_torsion", {"obata - T^H": res}, tol, samples)


def check_sug(H, samples, tol, seed, structures=None):
    I = ([integ.CompatibleStructure.constant(H, c) for c in structures] if structures
         else integ.degenerate_triple(H))
    return integ.theorem_sug_classify(I, samples, tol)


def check_baze(H, samples, tol, seed, structures=((0, 1, 0), (1, 1, 1), (1, 1, -1))):
    form = integ.baze_normal_form([np.asarray(c, float) for c in structures])
    rep = Report.from_residuals("baze_normal_form", {"reconstruction": form.residual}, tol, [],
                                case=form.kind, details={"metrics": form.metrics, "a": form.a, "q": form.q})
    if form.basis is not None:
        rep.details["basis"] = form.basis.tolist()
    return rep


def check_twistor(H, samples, tol, seed, eps=(-1, 1), fibers=1, points=1):
    children = []
    for e in ([eps] if isinstance(eps, int) else eps):
        for i, p in enumerate(samples[:points]):
            for fp in tw.fiber_sample(e, p, fibers, seed=seed + i):
                children.append(tw.twistor_nijenhuis(H, e, fp, tol=tol, seed=seed))
    res = {f"{c.case} #{i}": c.max_residual for i, c in enumerate(children)}
    rep = Report.from_residuals("twistor_nijenhuis", res, tol, samples[:points])
    rep.children = children
    return rep


def check_independence(H, samples, tol, seed, count=3):
    rng = np.random.default_rng(seed)
    p = samples[0]
    fp = tw.fiber_sample(1, p, 1, seed=seed)[0]
    return tw.minimal_independence(H, p, fp, [rng.standard_normal(H.dim) for _ in range(count)], tol)


def check_section(H, samples, tol, seed, coeffs=(0.0, 1.0, 0.0)):
    return tw.tautological_section_check(H, integ.CompatibleStructure.constant(H, coeffs), samples, tol)


CHECKS: dict[str, Callable[..., Report]] = {
    "admissible_basis_check": check_admissible,
    "is_integrable": check_integrable,
    "pde_residual": check_pde,
    "obata_torsion": check_torsion,
    "lemma_pe_check": lambda H, s, tol, seed: integ.lemma_pe_check(H, s, tol),
    "theorem_sug_classify": check_sug,
    "baze_normal_form": check_baze,
    "proof_identity_suite": lambda H, s, tol, seed: integ.proof_identity_suite(H, s, tol, seed=seed),
    "quaternionicity_witness": lambda H, s, tol, seed: integ.quaternionicity_witness(H, s, tol),
    "twistor_nijenhuis": check_twistor,
    "minimal_independence": check_independence,
    "tautological_section_check": check_section,
}


# ---------------------------------------------------------------------------
# Scenarios


@dataclass
class CheckSpec:
    name: str
    expect: str = "pass"
    params: dict = field(default_factory=dict)
    tol: float | None = None


@dataclass
class Scenario:
    structure: dict
    checks: list[CheckSpec]
    tol: float = 1e-8
    seed: int = 0
    samples: dict = field(default_factory=lambda: {"count": 5})
    output: str | None = None
    name: str = ""
    base: Path = Path(".")

    @classmethod
    def from_dict(cls, doc: Any, base: Path = Path(".")) -> "Scenario":
        if not isinstance(doc, dict):
            raise ScenarioError("scenario must be a JSON object")
        unknown = set(doc) - SCENARIO_KEYS
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        if "structure" not in doc or not isinstance(doc["structure"], dict):
            raise ScenarioError("scenario needs a 'structure' object")
        checks = []
        for c in doc.get("checks", []):
            spec = CheckSpec(c) if isinstance(c, str) else CheckSpec(
                c.get("name", ""), c.get("expect", "pass"), dict(c.get("params", {})), c.get("tol"))
            if spec.name not in CHECKS:
                raise ScenarioError(f"unknown check {spec.name!r}; known: {sorted(CHECKS)}")
            if spec.expect not in ("pass", "fail"):
                raise ScenarioError(f"expect must be 'pass' or 'fail', got {spec.expect!r}")
            if spec.tol is not None and not spec.tol > 0:
                raise ScenarioError(f"tolerance of {spec.name} must be positive")
            checks.append(spec)
        if not checks:
            raise ScenarioError("scenario lists no checks")
        sc = cls(doc["structure"], checks, float(doc.get("tol", 1e-8)), int(doc.get("seed", 0)),
                 dict(doc.get("samples", {"count": 5})), doc.get("output"), doc.get("name", ""), base)
        if not sc.tol > 0:
            raise ScenarioError("tolerance must be positive")
        return sc

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
        return cls.from_dict(doc, path.parent)


def sample_points(H: geo.PqStructure, spec: dict, seed: int) -> list:
    pts = [H.chart.point(c) for c in spec.get("points", [])]
    for p in pts:
        if not H.admits(p):
            raise ScenarioError(f"sample {list(p.coords)} lies on a declared singular locus")
    count = int(spec.get("count", 0 if pts else 5))
    low, high = float(spec.get("low", 0.5)), float(spec.get("high", 1.5))
    if not low < high:
        raise ScenarioError(f"empty sampling box [{low}, {high}]")
    if count:
        try:
            pts += integ.sample_domain(H, count, seed, low, high)
        except integ.HypothesisRegionEmpty as exc:
            raise ScenarioError(str(exc)) from None
    return pts


def _run_check(spec: CheckSpec, H, samples, tol, seed) -> dict:
    try:
        rep = CHECKS[spec.name](H, samples, spec.tol or tol, seed, **spec.params)
    except TypeError as exc:
        rep = Report(spec.name, Verdict.ERROR, messages=[f"bad parameters: {exc}"])
    except (ArithmeticError, ValueError, integ.HypothesisRegionEmpty, geo.GeometryError) as exc:
        rep = Report(spec.name, Verdict.ERROR, messages=[str(exc)])
    if rep.verdict is Verdict.ERROR:
        ok = False
    elif spec.expect == "fail":
        ok = rep.verdict is Verdict.FAIL
    else:
        ok = rep.verdict in (Verdict.PASS, Verdict.SKIPPED)
    return {"check": spec.name, "expect": spec.expect, "ok": ok, "report": rep.to_json()}


def run_scenario(sc: Scenario, jobs: int = 1) -> tuple[dict, int]:
    H = build_structure(sc.structure, sc.base)
    samples = sample_points(H, sc.samples, sc.seed)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        entries = list(pool.map(lambda c: _run_check(c, H, samples, sc.tol, sc.seed), sc.checks))
    status = all(e["ok"] for e in entries)
    report = {
        "schema": SCHEMA,
        "toolkit": {"name": "pqkit", "version": __version__},
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "scenario": sc.name,
        "structure": {"name": H.name, "dim": H.dim, "source": sc.structure},
        "seed": sc.seed,
        "tol": sc.tol,
        "samples": [[float(v) for v in p.coords] for p in samples],
        "checks": entries,
        "status": "pass" if status else "fail",
    }
    return report, EXIT_OK if status else EXIT_FAIL


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pqkit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"pqkit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("--scenario", required=True, type=Path)
    run.add_argument("--seed", type=int)
    run.add_argument("--tol", type=float)
    run.add_argument("--out", type=Path)
    run.add_argument("--jobs", type=int, default=1)
    gen = sub.add_parser("generate", help="write a generated structure file")
    gen.add_argument("generator", choices=sorted(GENERATORS))
    gen.add_argument("--m", type=int, default=2)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--h", default=None, help="registered function for the propo family")
    gen.add_argument("--out", type=Path, required=True)
    return ap


def _cmd_run(args) -> int:
    sc = Scenario.load(args.scenario)
    if args.seed is not None:
        sc.seed = args.seed
    if args.tol is not None:
        if not args.tol > 0:
            raise ScenarioError("--tol must be positive")
        sc.tol = args.tol
    if args.jobs < 1:
        raise ScenarioError("--jobs must be at least 1")
    out = args.out or (sc.base / sc.output if sc.output else None)
    report, code = run_scenario(sc, args.jobs)
    text = json.dumps(report, indent=1) + "\n"
    if out is not None:
        write_atomic(Path(out), text)
    for e in report["checks"]:
        r = e["report"]
        mark = "ok " if e["ok"] else "BAD"
        print(f"[{mark}] {e['check']:<28} {r['verdict']:<16} max residual {r['max_residual']:.3e}"
              + ("  (expected fail)" if e["expect"] == "fail" else ""))
    print(f"status: {report['status']}")
    return code


def _cmd_generate(args) -> int:
    params: dict[str, Any] = {"m": args.m}
    if args.seed is not None:
        if args.generator not in ("diffeo", "random"):
            raise ScenarioError(f"generator {args.generator} takes no seed")
        params["seed"] = args.seed
    if args.h is not None:
        if args.generator != "propo":
            raise ScenarioError("--h applies to the propo family only")
        params["h"] = args.h
    H = build_structure({"generator": args.generator, **params}, Path("."))
    write_atomic(args.out, json.dumps(geo.structure_to_json(H), indent=1) + "\n")
    print(f"wrote {H.name} to {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _cmd_run(args) if args.command == "run" else _cmd_generate(args)
    except (ScenarioError, geo.GeometryError, OSError) as exc:
        print(f"pqkit: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
