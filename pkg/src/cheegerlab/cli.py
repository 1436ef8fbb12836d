"""Command-line front end: build domains, run solves, emit reports and figures.

Exit codes: 0 success, 1 invalid flags, 2 solver infeasibility, 3 I/O
failure, 4 failed invariant (check).  The output directory is written
atomically (temp directory + rename), so a nonzero exit leaves no partial
artifacts.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import oracle as oracle_mod
from .extract import (eigen_bounds, extract_cluster, ratio_profile,
                      simplified_loops)
from .grid import (GridDomain, load_mask, make_barbell, make_disc, make_square,
                   rasterize_polygon)
from .skeleton import split_signed
from .solver import (SolverConfig, SolverInfeasibleError, psi_perturb,
                     solve_lambda_n, solve_m2, upper_bound_balls)
from .tvops import coarea_check, divergence, energy_star, gradient, tv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_IO = 3
EXIT_INVARIANT = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; the contract is 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="cheegerlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="minimize the partition energy on a domain")
    ps.add_argument("--domain", required=True,
                    help="disc:R | square:S | barbell:A,EPS,DELTA | mask.png | polygons.json")
    ps.add_argument("--h", type=float, default=None, help="pixel size (length units)")
    ps.add_argument("--n", type=int, required=True, help="number of chambers")
    ps.add_argument("--signed", action="store_true",
                    help="solve the signed two-chamber problem (requires --n 2)")
    ps.add_argument("--restarts", type=int, default=1)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--tol", type=float, default=1e-6)
    ps.add_argument("--max-iter", type=int, default=20000)
    ps.add_argument("--out", default="out", help="output directory")

    pc = sub.add_parser("check", help="run the invariant suite")
    pc.add_argument("--quick", action="store_true", help="small grids only, under 2 minutes")
    pc.add_argument("--fixtures", default=None, help="override the fixture directory")

    po = sub.add_parser("oracle", help="print analytic or brute-force reference values")
    po.add_argument("--shape", default=None, help="disc:R | square:S")
    po.add_argument("--fixture", default=None, help="fixture JSON path")
    po.add_argument("--n", type=int, default=1)
    po.add_argument("--write", action="store_true", help="regenerate the fixture file")
    return p


def _parse_domain(spec: str, h: float | None) -> GridDomain:
    if spec.startswith("disc:"):
        if h is None:
            raise UsageError("--h is required for generated domains")
        return make_disc(float(spec[5:]), h)
    if spec.startswith("square:"):
        if h is None:
            raise UsageError("--h is required for generated domains")
        return make_square(float(spec[7:]), h)
    if spec.startswith("barbell:"):
        if h is None:
            raise UsageError("--h is required for generated domains")
        parts = [float(x) for x in spec[8:].split(",")]
        if len(parts) != 3:
            raise UsageError("barbell domain needs three parameters: side,neck,shrink")
        return make_barbell(parts[0], parts[1], parts[2], h)
    path = Path(spec)
    if path.suffix.lower() == ".png":
        if h is None:
            raise UsageError("--h is required for PNG masks")
        return load_mask(path, h)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text())
        if h is not None:
            doc = dict(doc, h=h)
        return rasterize_polygon(doc)
    raise UsageError(f"unrecognized domain spec {spec!r}")


def _domain_record(spec: str, dom: GridDomain) -> dict:
    return {
        "spec": spec,
        "nx": dom.nx,
        "ny": dom.ny,
        "h": dom.h,
        "pixels_inside": dom.num_inside,
        "bbox_origin": list(dom.bbox_origin),
    }


def _dump_report(path: Path, report: dict) -> None:
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def _write_convergence(path: Path, energy_trace, residual_trace) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "energy", "residual"])
        for i, (e, r) in enumerate(zip(energy_trace, residual_trace)):
            w.writerow([i, repr(float(e)), repr(float(r))])


def _write_chamber_pngs(outdir: Path, cluster) -> None:
    from PIL import Image

    for i, mask in enumerate(cluster.chambers):
        img = (mask[::-1].astype(np.uint8)) * 255  # row 0 at the bottom -> image top last
        Image.fromarray(img, mode="L").save(outdir / f"chamber_{i}.png")


_SVG_COLORS = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"]


def _write_contours_svg(path: Path, dom: GridDomain, cluster) -> None:
    ox, oy = dom.bbox_origin
    w = dom.nx * dom.h
    hgt = dom.ny * dom.h
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{ox} {-oy - hgt} {w} {hgt}">',
        f'<g stroke-width="{dom.h}" fill="none">',
    ]

    def path_for(mask, color):
        segs = []
        for poly in simplified_loops(mask):
            xs = ox + poly[:, 0] * dom.h
            ys = -(oy + poly[:, 1] * dom.h)  # SVG y axis points down
            d = "M " + " L ".join(f"{x:.6g} {y:.6g}" for x, y in zip(xs, ys)) + " Z"
            segs.append(d)
        return f'<path stroke="{color}" d="{" ".join(segs)}"/>'

    parts.append(path_for(dom.mask, "#555555"))
    for i, mask in enumerate(cluster.chambers):
        parts.append(path_for(mask, _SVG_COLORS[i % len(_SVG_COLORS)]))
    parts.append("</g></svg>")
    path.write_text("\n".join(parts) + "\n")


def cmd_solve(args) -> int:
    if args.signed and args.n != 2:
        raise UsageError("signed requires N=2")
    dom = _parse_domain(args.domain, args.h)
    cfg = SolverConfig(max_iter=args.max_iter, tol=args.tol,
                       restarts=args.restarts, seed=args.seed)
    if args.signed:
        v, report = solve_m2(dom, cfg)
        u = split_signed(v)
    else:
        u, report = solve_lambda_n(dom, args.n, cfg)
    cluster = extract_cluster(u)
    record = {
        "domain": _domain_record(args.domain, dom),
        "n": args.n,
        "energy": report.energy,
        "lambda_n_estimate": report.energy,
        "h_n_estimate": cluster.total_ratio_sum,
        "chambers": [
            {"perimeter": p, "volume": v_, "ratio": r, "threshold": t}
            for p, v_, r, t in zip(cluster.perimeters, cluster.volumes,
                                   cluster.ratios, cluster.thresholds_used)
        ],
        "solver": report.as_dict(),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if args.signed:
        record["m2_estimate"] = report.energy
    if args.n == 2:
        eb = eigen_bounds(report.energy, cluster)
        record["eigen_bounds"] = {
            "lower": eb.lower,
            "certificate": eb.certificate,
            "h2_upper": eb.h2_upper,
            "equality_value": eb.equality_value,
            "ratio_gap": eb.ratio_gap,
        }
    else:
        record["eigen_bounds"] = None

    out = Path(args.out)
    tmp = Path(tempfile.mkdtemp(prefix=out.name + ".tmp.", dir=out.parent or Path(".")))
    try:
        _dump_report(tmp / "report.json", record)
        _write_convergence(tmp / "convergence.csv", report.energy_trace, report.residual_trace)
        _write_chamber_pngs(tmp, cluster)
        _write_contours_svg(tmp / "contours.svg", dom, cluster)
        if out.exists():
            shutil.rmtree(out)
        tmp.rename(out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    print(f"energy={report.energy:.6f} ratio_sum={cluster.total_ratio_sum:.6f} "
          f"converged={report.converged} -> {out}")
    return EXIT_OK


def _fixture_dir(override: str | None) -> Path:
    if override:
        return Path(override)
    return Path(__file__).parent / "fixtures"


def _run_checks(quick: bool, fixture_dir: Path):
    """Yield (name, passed, detail) tuples for the invariant suite."""
    from .grid import ScalarField

    rng = np.random.default_rng(7)
    sq = make_square(1.0, 1 / 32)

    # gradient/divergence adjointness on random fields
    worst = 0.0
    for _ in range(20 if quick else 100):
        f = ScalarField.from_values(sq, rng.standard_normal(sq.mask.shape))
        p = rng.standard_normal((2,) + sq.mask.shape)
        lhs = float((gradient(f) * p).sum() * sq.pixel_area)
        rhs = -float((f.values * divergence(sq, p).values).sum() * sq.pixel_area)
        worst = max(worst, abs(lhs - rhs) / (abs(lhs) + 1.0))
    yield "adjointness", worst <= 1e-10, f"max rel gap {worst:.2e}"

    # tv of an axis-aligned rectangle: closed form including the corner term
    m = np.zeros(sq.mask.shape)
    m[8:20, 10:26] = 1.0
    val = tv(ScalarField.from_values(sq, m))
    expect = sq.h * (2 * (12 + 16) - (2 - np.sqrt(2)))
    yield "tv rectangle closed form", abs(val - expect) < 1e-12, f"{val} vs {expect}"

    # coarea/Cavalieri gap on a scaled indicator
    f = ScalarField.from_values(sq, 3.0 * (m > 0))
    gap = coarea_check(f, 64)
    yield "coarea indicator", gap < 1 / 64, f"gap {gap:.2e}"

    # oracle fixtures reproduce bit-identically
    fixtures = sorted(fixture_dir.glob("*.json"))
    if not fixtures:
        yield "oracle fixtures", False, f"no fixtures in {fixture_dir}"
    for fx in fixtures:
        ok = oracle_mod.check_fixture(fx)
        yield f"fixture {fx.name}", ok, "bit-identical" if ok else "MISMATCH"

    # solver sandwich + optimality diagnostics on a converged small disc
    disc = make_disc(1.0, 1 / 64)
    u, rep = solve_lambda_n(disc, 1, SolverConfig(max_iter=4000, tol=0.0))
    bound = upper_bound_balls(disc, 1)
    yield "ball bound sandwich", rep.energy <= bound + 1e-12, \
        f"energy {rep.energy:.4f} <= bound {bound:.4f}"
    prof = ratio_profile(u.component(0), 64)
    yield "ratio profile CV", prof.cv < 0.05, f"cv {prof.cv:.3f}"
    vmax = u.data[0].max()
    emin = min(psi_perturb(u, 0, t * vmax, T * vmax, a)
               for t in (0.2, 0.4, 0.6) for T in (0.5, 0.7, 0.9) if t < T
               for a in (0.25, 0.5, 2.0, 4.0))
    yield "deformation optimality", emin >= (1 - 1e-3) * rep.energy, \
        f"min deformed {emin:.4f} vs {rep.energy:.4f}"

    if not quick:
        disc = make_disc(1.0, 1 / 256)
        _, rep = solve_lambda_n(disc, 1, SolverConfig(max_iter=3500, tol=0.0))
        yield "disc constant 1/256", abs(rep.energy - 2.0) <= 0.06, f"{rep.energy:.4f}"
        sq256 = make_square(1.0, 1 / 256)
        _, rep = solve_lambda_n(sq256, 1, SolverConfig(max_iter=20000))
        target = oracle_mod.analytic_square(1.0)[0]
        yield "square constant 1/256", abs(rep.energy - target) <= 0.03 * target, \
            f"{rep.energy:.4f} vs {target:.4f}"


def cmd_check(args) -> int:
    fixture_dir = _fixture_dir(args.fixtures)
    if not fixture_dir.is_dir():
        print(f"fixture directory not found: {fixture_dir}", file=sys.stderr)
        return EXIT_IO
    failures = 0
    try:
        for name, ok, detail in _run_checks(args.quick, fixture_dir):
            print(f"{'PASS' if ok else 'FAIL'}  {name:32s} {detail}")
            failures += 0 if ok else 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if failures == 0 else EXIT_INVARIANT


def cmd_oracle(args) -> int:
    if args.shape:
        kind, _, val = args.shape.partition(":")
        if kind == "disc":
            print(f"{oracle_mod.analytic_disc(float(val)):.10g}")
            return EXIT_OK
        if kind == "square":
            h1, rho = oracle_mod.analytic_square(float(val))
            print(f"{h1:.10g}")
            return EXIT_OK
        raise UsageError(f"unsupported shape {args.shape!r}")
    if args.fixture:
        if args.n not in (1, 2):
            raise UsageError("oracle supports --n 1 or 2")
        dom, record = oracle_mod.load_fixture(args.fixture)
        if args.write:
            record = oracle_mod.write_fixture(dom, args.n, args.fixture)
            print(f"{record['value']:.10g}")
            return EXIT_OK
        value, _ = oracle_mod.brute_force_hn(dom, args.n)
        print(f"{value:.10g}")
        return EXIT_OK
    raise UsageError("oracle needs --shape or --fixture")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "check":
            return cmd_check(args)
        if args.command == "oracle":
            return cmd_oracle(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverInfeasibleError as exc:
        print(f"solver infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
