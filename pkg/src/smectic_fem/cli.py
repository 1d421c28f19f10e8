"""Convergence studies and q-sweeps from the command line.

Example::

    python -m smectic_fem --method mixed --degree 1 --levels 8,16,32 --out runs/mixed1
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .assembly import ProblemParams, assemble, system_size, write_triplets
from .linalg import SolverError, solve_direct
from .mesh import DEFAULT_BOUNDARY, assign_boundary, build_structured_mesh, parse_boundary_spec
from .mms import SOLUTIONS, make_solution, parse_director
from .norms import NORMS, ErrorReport, compute_errors, estimate_rates, slope

log = logging.getLogger("smectic_fem")

DEGREES = {"argyris": (5,), "c0ip": (2, 3, 4), "mixed": (1, 2, 3)}
DESK_LEVELS = (8, 16, 32, 64)
PAPER_LEVELS = (64, 128, 256, 512)
DESK_MAX_N = 128


@dataclass
class StudyConfig:
    method: str = "c0ip"
    k: int | None = 3
    q: float = 10.0
    B: float | str = "qinv4"
    m: float = 10.0
    nu: tuple[float, float] = (0.6, 0.8)
    solution: str = "planewave"
    levels: tuple[int, ...] = DESK_LEVELS
    boundary: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDARY))
    quad_degree: int | None = None
    error_quad_degree: int | None = None
    out: str | None = None
    plot: bool = False
    paper_scale: bool = False
    dump_matrix: bool = False
    dump_mesh: bool = False
    sweep_q: tuple[float, ...] = ()

    def __post_init__(self):
        self.levels = tuple(int(n) for n in self.levels)
        self.sweep_q = tuple(float(v) for v in self.sweep_q)
        self.nu = tuple(float(v) for v in self.nu)
        if self.method not in DEGREES:
            raise ValueError(f"method must be one of {sorted(DEGREES)}, got {self.method!r}")
        if self.method == "argyris":
            if self.k not in (None, 5):
                raise ValueError("the Argyris element is quintic; --degree must be omitted or 5")
            self.k = None
        elif self.k not in DEGREES[self.method]:
            raise ValueError(f"{self.method} supports degrees {DEGREES[self.method]}, got {self.k}")
        if not self.levels:
            raise ValueError("at least one mesh level is required")
        for n in self.levels:
            if n < 1 or n & (n - 1):
                raise ValueError(f"mesh levels must be powers of two, got {n}")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError(f"mesh levels must be strictly increasing, got {list(self.levels)}")
        if max(self.levels) > DESK_MAX_N and not self.paper_scale:
            raise ValueError(f"levels above n={DESK_MAX_N} need --paper-scale")
        if isinstance(self.B, str) and self.B != "qinv4":
            self.B = float(self.B)
        if self.solution not in SOLUTIONS:
            raise ValueError(f"solution must be one of {sorted(SOLUTIONS)}")
        if self.sweep_q and len(self.sweep_q) < 2:
            raise ValueError("a q sweep needs at least two values of q")
        ProblemParams(self.B_value(), self.q, self.m, self.k)

    def B_value(self, q: float | None = None) -> float:
        q = self.q if q is None else q
        return q**-4 if self.B == "qinv4" else float(self.B)

    def params(self, q: float | None = None) -> ProblemParams:
        q = self.q if q is None else q
        return ProblemParams(B=self.B_value(q), q=q, m=self.m, k=self.k)

    def tag(self) -> str:
        return self.method if self.k is None else f"{self.method}{self.k}"


@dataclass
class StudyResult:
    config: StudyConfig
    reports: list[ErrorReport]
    rates: dict[str, float]
    abscissa: str = "n"
    qs: tuple[float, ...] = ()

    @property
    def failed(self) -> bool:
        return any(not r.ok for r in self.reports)

    def slopes(self) -> dict[str, dict[str, float]]:
        # Orders are positive for convergence; the raw slope is against log2(1/h).
        if self.abscissa == "q":
            return {k: {"slope": v, "order": v} for k, v in self.rates.items()}
        return {k: {"slope": -v, "order": v} for k, v in self.rates.items()}


def run_level(config: StudyConfig, n: int, q: float | None = None) -> ErrorReport:
    q = config.q if q is None else q
    params = config.params(q)
    mesh = build_structured_mesh(n)
    partition = assign_boundary(mesh, config.boundary, mixed=config.method == "mixed")
    ms = make_solution(config.solution, q=q, nu=config.nu, B=params.B, m=params.m)
    t0 = time.perf_counter()
    system = assemble(config.method, mesh, partition, params, ms, config.quad_degree)
    if (config.dump_matrix or config.dump_mesh) and config.out:
        Path(config.out).parent.mkdir(parents=True, exist_ok=True)
    if config.dump_matrix and config.out:
        write_triplets(system, f"{config.out}_n{n}_matrix.txt")
    if config.dump_mesh and config.out:
        Path(f"{config.out}_n{n}_mesh.txt").write_text(mesh.to_text(partition))
    try:
        x, res = solve_direct(system.matrix, system.rhs, return_residual=True,
                              local_blocks=system.extras.get("local_blocks"))
    except (SolverError, MemoryError) as exc:
        log.error("n=%d: solve failed: %s", n, exc)
        nan = dict.fromkeys(NORMS[config.method], math.nan)
        return ErrorReport(system.method, config.k, n, nan, system.n_dofs,
                           time.perf_counter() - t0, getattr(exc, "residual", None), f"failed: {exc}")
    seconds = time.perf_counter() - t0
    return compute_errors(system, x, ms, quad_degree=config.error_quad_degree,
                          seconds=seconds, residual=res)


def _safe_rates(reports, fn):
    try:
        return fn(reports)
    except ValueError as exc:
        (log.warning if len(reports) > 1 else log.info)("no slopes: %s", exc)
        return {}


def run_study(config: StudyConfig) -> StudyResult:
    """Assemble, solve and measure errors on every level, then estimate slopes."""
    if config.paper_scale:
        sizes = {n: system_size(config.method, n, config.k) for n in config.levels}
        log.warning("paper-scale run: up to %d unknowns; direct factorisation may need tens of GB",
                    max(sizes.values()))
    reports = []
    for n in config.levels:
        rep = run_level(config, n)
        log.info("%s n=%d dofs=%d %s", config.tag(), n, rep.dofs,
                 " ".join(f"{k}={v:.3e}" for k, v in rep.errors.items()))
        reports.append(rep)
    rates = _safe_rates(reports, estimate_rates)
    return StudyResult(config, reports, rates)


def sweep_q(config: StudyConfig, qs=None, n: int | None = None) -> StudyResult:
    """Errors against q at a fixed mesh; slopes are against log2 q from the last two values."""
    qs = tuple(float(v) for v in (qs if qs is not None else config.sweep_q))
    if len(qs) < 2:
        raise ValueError("a q sweep needs at least two values of q")
    n = config.levels[-1] if n is None else n
    reports = [run_level(config, n, q) for q in qs]

    def rates(reps):
        pairs = [(q, r) for q, r in zip(qs, reps) if r.ok]
        if len(pairs) < 2:
            raise ValueError("fewer than two completed q values")
        (q0, r0), (q1, r1) = pairs[-2], pairs[-1]
        return {k: slope(q0, q1, r0.errors[k], r1.errors[k]) for k in r1.errors}

    return StudyResult(config, reports, _safe_rates(reports, rates), abscissa="q", qs=qs)


# ---------------------------------------------------------------------------
# Output


def _fmt(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".17g")


def to_csv(result: StudyResult) -> str:
    norms = NORMS[result.config.method]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    lead = ["q"] if result.abscissa == "q" else []
    w.writerow(lead + ["method", "k", "n", "h", "dofs", *norms, "residual", "seconds"])
    for i, r in enumerate(result.reports):
        lead = [_fmt(result.qs[i])] if result.abscissa == "q" else []
        w.writerow(lead + [r.method, "" if r.k is None else r.k, r.n, _fmt(r.h), r.dofs,
                           *[_fmt(r.errors[k]) for k in norms], _fmt(r.residual), _fmt(r.seconds)])
    return buf.getvalue()


def _json_float(v):
    return None if v is None or not math.isfinite(v) else float(v)


def to_json(result: StudyResult) -> str:
    levels = []
    for i, r in enumerate(result.reports):
        d = r.as_dict()
        d["errors"] = {k: _json_float(v) for k, v in d["errors"].items()}
        if result.abscissa == "q":
            d["q"] = result.qs[i]
        levels.append(d)
    doc = {
        "config": asdict(result.config),
        "abscissa": result.abscissa,
        "reports": levels,
        "slopes": result.slopes(),
        "residuals": [_json_float(r.residual) for r in result.reports],
        "timings": [r.seconds for r in result.reports],
        "failed": result.failed,
    }
    return json.dumps(doc, indent=2)


def plot_svg(result: StudyResult, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    reps = [r for r in result.reports if r.ok]
    if result.abscissa == "q":
        xs = [math.log2(q) for q, r in zip(result.qs, result.reports) if r.ok]
        ax.set_xlabel("log2(q)")
    else:
        xs = [math.log2(r.n) for r in reps]
        ax.set_xlabel("log2(1/h)")
    for name in NORMS[result.config.method]:
        ys = [r.errors[name] for r in reps]
        s = result.slopes().get(name, {}).get("slope")
        label = name if s is None else f"{name} (s={s:.2f})"
        ax.semilogy(xs, ys, marker="o", label=label)
    ax.set_ylabel("error")
    ax.set_title(f"{result.config.tag()}, q={result.config.q:g}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def write_outputs(result: StudyResult, prefix: str) -> list[Path]:
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    paths = [prefix.with_name(prefix.name + ".csv"), prefix.with_name(prefix.name + ".json")]
    paths[0].write_text(to_csv(result))
    paths[1].write_text(to_json(result))
    if result.config.plot:
        paths.append(prefix.with_name(prefix.name + ".svg"))
        plot_svg(result, paths[-1])
    return paths


# ---------------------------------------------------------------------------
# Argument parsing


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _B(text: str):
    return "qinv4" if text.strip().lower() == "qinv4" else float(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smectic_fem", description=__doc__.splitlines()[0])
    p.add_argument("--method", choices=sorted(DEGREES), default="c0ip")
    p.add_argument("--degree", type=int, default=None,
                   help="polynomial degree k (c0ip: 2-4, default 3; mixed: 1-3, default 1)")
    p.add_argument("--q", type=float, default=None, help="wavenumber (default 10, or 40 with --paper-scale)")
    p.add_argument("--B", type=_B, default=None, help="number or 'qinv4' (default qinv4, or 1 with --paper-scale)")
    p.add_argument("--m", type=float, default=10.0)
    p.add_argument("--nu", default="3/5,4/5", help='director as two rationals, e.g. "3/5,4/5"')
    p.add_argument("--solution", choices=sorted(SOLUTIONS), default="planewave")
    p.add_argument("--levels", type=_int_list, default=None, help='e.g. "8,16,32,64"')
    p.add_argument("--boundary", default=None, help='e.g. "S=02,N=01,E=32,W=31"')
    p.add_argument("--quad-degree", type=int, default=None, help="assembly quadrature degree")
    p.add_argument("--error-quad-degree", type=int, default=None)
    p.add_argument("--sweep-q", type=_float_list, default=(),
                   help='q values for a sweep at the finest level, e.g. "8,16,32"')
    p.add_argument("--out", default=None, help="output prefix for .csv/.json/.svg")
    p.add_argument("--plot", action="store_true", help="write an SVG convergence plot")
    p.add_argument("--paper-scale", action="store_true", help="q=40, n up to 512 (very large systems)")
    p.add_argument("--dump-matrix", action="store_true", help="write matrix triplets per level")
    p.add_argument("--dump-mesh", action="store_true", help="write a plain-text mesh listing per level")
    p.add_argument("--count-only", action="store_true", help="print system sizes and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> StudyConfig:
    default_k = {"argyris": None, "c0ip": 3, "mixed": 1}[args.method]
    paper = args.paper_scale
    return StudyConfig(
        method=args.method,
        k=default_k if args.degree is None else args.degree,
        q=args.q if args.q is not None else (40.0 if paper else 10.0),
        B=args.B if args.B is not None else (1.0 if paper else "qinv4"),
        m=args.m,
        nu=tuple(parse_director(args.nu)),
        solution=args.solution,
        levels=args.levels or (PAPER_LEVELS if paper else DESK_LEVELS),
        boundary=parse_boundary_spec(args.boundary) if args.boundary else dict(DEFAULT_BOUNDARY),
        quad_degree=args.quad_degree,
        error_quad_degree=args.error_quad_degree,
        out=args.out,
        plot=args.plot,
        paper_scale=paper,
        dump_matrix=args.dump_matrix,
        dump_mesh=args.dump_mesh,
        sweep_q=args.sweep_q,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        config = config_from_args(args)
        # Validates labels and coverage before any work is done.
        assign_boundary(build_structured_mesh(1), config.boundary, mixed=config.method == "mixed")
    except ValueError as exc:
        parser.error(str(exc))

    if args.count_only:
        print("method,k,n,dofs")
        for n in config.levels:
            print(f"{config.method},{'' if config.k is None else config.k},{n},"
                  f"{system_size(config.method, n, config.k)}")
        return 0

    result = sweep_q(config) if config.sweep_q else run_study(config)
    if config.out:
        for path in write_outputs(result, config.out):
            log.info("wrote %s", path)
    sys.stdout.write(to_csv(result))
    for name, s in result.slopes().items():
        print(f"# {name}: order {s['order']:.2f}")
    return 2 if result.failed else 0


def rerun(config_echo: dict) -> StudyResult:
    """Re-run a study from the ``config`` block of a JSON report."""
    cfg = dict(config_echo)
    cfg["nu"] = tuple(cfg["nu"])
    cfg["levels"] = tuple(cfg["levels"])
    cfg["sweep_q"] = tuple(cfg.get("sweep_q", ()))
    config = StudyConfig(**cfg)
    return sweep_q(config) if config.sweep_q else run_study(config)

