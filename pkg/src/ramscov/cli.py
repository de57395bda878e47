"""Command-line frontend.

Exit codes: 0 success or consistent verdict, 1 usage or input error,
2 rejection verdict.
"""
from __future__ import annotations

import argparse
import itertools
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import __version__
from .covariogram import (
    E_np,
    clip_to_cube,
    face_count,
    g_np,
    local_covariogram,
    perimeter_B,
    weighted_perimeter_full,
)
from .formats import dumps_csv, dumps_json
from .grid import (
    FormatError,
    GridError,
    Window,
    as_lattice,
    dumps_pixelset,
    loads_pixelset,
    loads_window,
)
from .models import (
    BooleanModel1D,
    estimate_specific_covariogram,
    estimate_specific_perimeter,
    estimate_volume_fraction,
    model_from_dict,
    simulate,
)
from .polytope import (
    Functional,
    apply_to_s2,
    curve_from_dict,
    minimize_functional,
    realisability_report,
    scale_box,
)

EXIT_OK, EXIT_USAGE, EXIT_REJECTED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ----------------------------------------------------------------- helpers

def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text()


def _read_json(path: str) -> dict:
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON: {e.msg}", e.lineno) from None


def _emit(text: str, output: str | None) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _manifest(args: argparse.Namespace, extra: dict | None = None) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    out = {"tool": "ramscov", "version": __version__, "subcommand": args.command, "config": config}
    if extra:
        out.update(extra)
    return out


def _write_manifest(args: argparse.Namespace, extra: dict | None = None, path: str | None = None) -> None:
    target = path or (args.output + ".manifest.json" if args.output not in (None, "-") else None)
    if target:
        Path(target).write_text(dumps_json(_manifest(args, extra)))


def parse_scales(spec: str, d: int = 1) -> list:
    """``"1:12,2:12"`` → scales with window ``(0, cells/n)^d``."""
    scales = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            n, cells = (int(v) for v in part.split(":"))
        except ValueError:
            raise UsageError(f"bad scale {part!r}; expected n:cells") from None
        if n < 1 or cells < 1:
            raise UsageError(f"bad scale {part!r}; n and cells must be positive")
        scales.append(scale_box(n, d, cells))
    if not scales:
        raise UsageError("no scales given")
    return scales


def parse_shifts(spec: str, n: int, d: int) -> list[tuple[int, ...]]:
    """``"a:b"`` → every lattice shift with coordinates in ``[a, b]`` (cell units);
    otherwise ``;``-separated real vectors such as ``"0.5,0;1,0"``."""
    spec = spec.strip()
    if ":" in spec and ";" not in spec and "," not in spec:
        try:
            a, b = (int(v) for v in spec.split(":"))
        except ValueError:
            raise UsageError(f"bad shift range {spec!r}") from None
        return [tuple(k) for k in itertools.product(range(a, b + 1), repeat=d)]
    out = []
    for part in spec.split(";"):
        vals = [Fraction(v.strip()) for v in part.split(",") if v.strip()]
        if len(vals) != d:
            raise UsageError(f"shift {part!r} has {len(vals)} coordinates, expected {d}")
        out.append(as_lattice(vals, n, d))
    return out


# ---------------------------------------------------------------- commands

def cmd_covariogram(args) -> int:
    A = loads_pixelset(_read(args.input))
    W = loads_window(_read(args.window)) if args.window else Window.unit(A.n, A.d)
    if W.n != A.n:
        raise GridError(f"window resolution {W.n} differs from set resolution {A.n}")
    shifts = parse_shifts(args.shifts, A.n, A.d)
    header = [f"y_{i + 1}" for i in range(A.d)] + ["delta"]
    rows = []
    for k in shifts:
        y = [Fraction(v, A.n) for v in k]
        rows.append([float(v) for v in y] + [float(local_covariogram(A, y, W, exact=True))])
    _emit(dumps_csv(header, rows), args.output)
    _write_manifest(args)
    return EXIT_OK


def cmd_perimeter(args) -> int:
    A = loads_pixelset(_read(args.input))
    if args.window:
        W = loads_window(_read(args.window))
    else:
        lo, hi = A.bounds() if len(A) else ((0,) * A.d, (0,) * A.d)
        W = Window.box(A.n, [v - 1 for v in lo], [v + 1 for v in hi]) if len(A) else Window.empty(A.n, A.d)
    wp = weighted_perimeter_full(A)
    report = {
        "n": A.n,
        "d": A.d,
        "cells": len(A),
        "per_B": float(perimeter_B(A, W)) if len(W) else 0.0,
        "face_count_per_axis": [face_count(A, j, W) if len(W) else 0 for j in range(A.d)],
        "per_B_beta": wp.value,
        "tail_remainder": wp.tail_remainder,
        "saturation_index": wp.saturation,
    }
    if args.clip_p is not None:
        p = args.clip_p
        full = g_np(A, A.n, p)
        clipped = g_np(clip_to_cube(A, p), A.n, p)
        bound = E_np(A.n, p, A.d)
        report["clip_check"] = {
            "p": p,
            "g_np": full,
            "g_np_clipped": clipped,
            "difference": abs(full - clipped),
            "E_np": bound,
            "ok": abs(full - clipped) <= bound,
        }
    _emit(dumps_json(report), args.output)
    _write_manifest(args)
    return EXIT_OK


def cmd_minimize(args) -> int:
    g = Functional.from_dict(_read_json(args.input))
    res = minimize_functional(g, budget=args.budget)
    report = {
        "min_value": float(res.value),
        "min_value_exact": str(res.value) if isinstance(res.value, Fraction) else None,
        "exact": res.exact,
        "evaluated": res.evaluated,
        "domain_cells": len(g.domain()),
        "argmin_cells": [list(c) for c in sorted(res.argmin.cells)],
        "argmin_rams1": dumps_pixelset(res.argmin),
    }
    _emit(dumps_json(report), args.output)
    _write_manifest(args)
    return EXIT_OK


def cmd_check(args) -> int:
    s2 = curve_from_dict(_read_json(args.input))
    scales = parse_scales(args.scales, s2.d)
    rep = realisability_report(s2, scales, budget=args.budget, n_random=args.random_probes,
                               seed=args.seed, tol=args.tolerance, nsigma=args.nsigma)
    out = rep.to_dict()
    out["seed"] = args.seed
    _emit(dumps_json(out), args.output)
    _write_manifest(args, {"verdict": rep.verdict})
    return EXIT_REJECTED if rep.rejected else EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _read_json(args.input)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.replicates is not None:
        cfg["replicates"] = args.replicates
    R = int(cfg.get("replicates", 1000))
    model = model_from_dict(cfg)
    outdir = Path(args.output or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    for r in range(args.realizations):
        X = simulate(model, replicate=r)
        if isinstance(model, BooleanModel1D):
            (outdir / f"realization_{r}.json").write_text(
                dumps_json({"seed": model.seed, "replicate": r, "window": [0.0, 1.0],
                            "intervals": [list(ab) for ab in X]}))
        else:
            (outdir / f"realization_{r}.rams").write_text(
                f"# seed={model.seed} replicate={r}\n" + dumps_pixelset(X))
    if isinstance(model, BooleanModel1D):
        h = Fraction(args.h)
        curve = estimate_specific_covariogram(model, h, args.K, R)
        rows = [[float(m * h), float(curve.values[m + args.K]),
                 None if curve.stderr is None else float(curve.stderr[m + args.K]), R]
                for m in range(-args.K, args.K + 1)]
        header = ["y", "estimate", "stderr", "R"]
    else:
        curve = estimate_specific_covariogram(model, None, args.K, R)
        rows = []
        for a in range(-args.K, args.K + 1):
            for b in range(-args.K, args.K + 1):
                idx = (a + args.K, b + args.K)
                se = None if curve.stderr is None else float(curve.stderr[idx])
                rows.append([a / model.n, b / model.n, float(curve.values[idx]), se, R])
        header = ["y_1", "y_2", "estimate", "stderr", "R"]
    (outdir / "covariogram.csv").write_text(dumps_csv(header, rows))
    (outdir / "s2.json").write_text(dumps_json(curve.to_dict()))
    per = estimate_specific_perimeter(model, R)
    vf = estimate_volume_fraction(model, R)
    summary = {
        "model": model.to_dict(),
        "replicates": R,
        "volume_fraction": {"estimate": vf.value, "stderr": vf.stderr},
        "specific_perimeter": {"estimate": per.value, "stderr": per.stderr},
        "estimator": "mean of L(X ∩ (X + y) ∩ (0,1)^d) over replicates; window dilated by the grain reach",
    }
    if isinstance(model, BooleanModel1D):
        summary["truncation_bias_bound"] = model.truncation_bias
    (outdir / "estimates.json").write_text(dumps_json(summary))
    args.output = str(outdir)
    _write_manifest(args, {"seed": model.seed, "model": model.to_dict()},
                    path=str(outdir / "manifest.json"))
    return EXIT_OK


def cmd_report(args) -> int:
    rep = _read_json(args.input)
    lines = [f"verdict: {rep.get('verdict')}"]
    if rep.get("label"):
        lines.append(f"curve: {rep['label']}")
    for s in rep.get("scales_tested", []):
        lines.append(f"scale: n={s['n']} cells={s['cells']}")
    lines.append("probe families: " + ", ".join(f"{k}={v}" for k, v in rep.get("probe_families", {}).items()))
    for e in rep.get("lipschitz", []):
        lines.append(f"Lip axis {e['axis']}: sup={e['sup']:.6g} at t={e['sup_t']:.6g}, "
                     f"smallest-t quotient={e['smallest_t_quotient']:.6g}"
                     + (" (diverging)" if e.get("diverging") else ""))
    lines.append(f"specific perimeter lower bound: {rep.get('per_s_lower_bound', 0.0):.6g}")
    lines.append(f"pointwise violations: {rep.get('violation_count', 0)}; "
                 f"functional witnesses: {rep.get('functional_witness_count', 0)}")
    s2 = curve_from_dict(_read_json(args.s2)) if args.s2 else None
    status = EXIT_OK
    for w in rep.get("witnesses", []):
        if w.get("kind") == "functional":
            line = f"  functional ({w['family']}): min over sets={w['min_over_sets']:.6g}, phi={w['phi']:.6g}"
            if s2 is not None:
                g = Functional.from_dict(w["functional"])
                res = minimize_functional(g, budget=args.budget)
                phi = apply_to_s2(g, s2)
                ok = res.exact and float(res.value) >= -args.tolerance and phi < 0
                line += f" | recheck min={float(res.value):.6g} phi={phi:.6g} {'confirmed' if ok else 'NOT confirmed'}"
                if not ok:
                    status = EXIT_USAGE
            lines.append(line)
        else:
            pts = "; ".join(",".join(f"{v:.6g}" for v in p) for p in w.get("points", []))
            lines.append(f"  {w['kind']} at ({pts}) by {w['amount']:.6g}")
    _emit("\n".join(lines) + "\n", args.output)
    return status


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ramscov", description="Covariogram functionals, perimeters and S2 screening.")
    p.add_argument("--version", action="version", version=f"ramscov {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("covariogram", help="local covariogram table of a RAMS1 set")
    c.add_argument("--input", required=True, help="RAMS1 set file")
    c.add_argument("--window", help="WIN1 window file (default: unit cube)")
    c.add_argument("--shifts", default="0:0", help="'a:b' lattice range per axis, or 'y1,y2;...' real vectors")
    c.add_argument("--output")
    c.set_defaults(func=cmd_covariogram)

    c = sub.add_parser("perimeter", help="face-count and weighted perimeters of a RAMS1 set")
    c.add_argument("--input", required=True)
    c.add_argument("--window", help="WIN1 window for per_B (default: bounding box grown by one cell)")
    c.add_argument("--clip-p", type=int, dest="clip_p", help="also compare g_np with its clipped value")
    c.add_argument("--output")
    c.set_defaults(func=cmd_perimeter)

    c = sub.add_parser("minimize", help="exact minimum of a functional over pixel sets")
    c.add_argument("--input", required=True, help="functional JSON")
    c.add_argument("--budget", type=int, default=2**24)
    c.add_argument("--output")
    c.set_defaults(func=cmd_minimize)

    c = sub.add_parser("check", help="screen an S2 curve for realisability")
    c.add_argument("--input", required=True, help="S2 JSON (samples or closed_form)")
    c.add_argument("--scales", default="1:12,2:12,3:12", help="n:cells list")
    c.add_argument("--budget", type=int, default=2**16)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--tolerance", type=float, default=1e-9)
    c.add_argument("--nsigma", type=float, default=3.0)
    c.add_argument("--random-probes", type=int, default=200, dest="random_probes")
    c.add_argument("--output")
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("simulate", help="simulate a Boolean model and estimate S2 and Per^s")
    c.add_argument("--input", required=True, help="model config JSON")
    c.add_argument("--output", default=".", help="output directory")
    c.add_argument("--seed", type=int)
    c.add_argument("--replicates", type=int)
    c.add_argument("--h", default="1/100", help="1-D lattice step")
    c.add_argument("--K", type=int, default=10, help="lattice half-width of the estimated curve")
    c.add_argument("--realizations", type=int, default=1, help="realization files to write")
    c.set_defaults(func=cmd_simulate)

    c = sub.add_parser("report", help="summarize a check report, optionally re-verifying witnesses")
    c.add_argument("--input", required=True)
    c.add_argument("--s2", help="S2 JSON used to re-evaluate functional witnesses")
    c.add_argument("--budget", type=int, default=2**16)
    c.add_argument("--tolerance", type=float, default=1e-9)
    c.add_argument("--output")
    c.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"ramscov {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as e:
        print(f"ramscov {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, GridError, ValueError, KeyError, TypeError) as e:
        if isinstance(e, OSError) and e.strerror:
            msg = f"{e.strerror}: {e.filename}"
        elif isinstance(e, KeyError):
            msg = f"missing field {e.args[0]!r}"
        else:
            msg = str(e)
        print(f"ramscov {args.command}: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
