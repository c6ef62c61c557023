"""Command line front end: ``kreinspec SUBCOMMAND PROBLEM [options]``.

PROBLEM is a path to a problem file or the name of a bundled example.
Results go to ``--out`` (default: current directory) as CSV/JSON files,
written atomically.  Exit codes: 0 success, 1 computation or certification
failure (a JSON diagnostic is printed), 2 usage error.
"""

from __future__ import annotations

import os

# Dense linear algebra runs single-threaded so outputs do not depend on the
# BLAS thread count; parallelism comes from KREINSPEC_THREADS only.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import math  # noqa: E402
import sys  # noqa: E402
import tempfile  # noqa: E402
from pathlib import Path  # noqa: E402

import click  # noqa: E402
import numpy as np  # noqa: E402

from .boundary_algebra import validate_boundary_data  # noqa: E402
from .coefficients import CONDITIONS, check_condition, structure_flags  # noqa: E402
from .problem import SHIPPED, ProblemError, ProblemSpec, load_problem, shipped_problem  # noqa: E402

DIGITS = 17


# ---------------------------------------------------------------------------
# deterministic serialisation

def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return f"{x:.{DIGITS}g}"


def to_json(obj, indent: int = 0) -> str:
    """JSON with every float printed to 17 significant digits and sorted keys."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}"{k}": {to_json(obj[k], indent + 1)}' for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return f"[{fmt(obj.real)}, {fmt(obj.imag)}]"
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist(), indent)
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_json(out: Path, name: str, obj) -> None:
    write_atomic(out / name, to_json(obj) + "\n")


def write_csv(out: Path, name: str, header_note: str, columns: list[str], rows: list[list]) -> None:
    lines = [f"# {header_note}", ",".join(columns)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(fmt(v).strip('"'))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    write_atomic(out / name, "\n".join(lines) + "\n")


class Failure(Exception):
    """Computation finished but a requested clause failed; carries the payload."""

    def __init__(self, payload: dict):
        super().__init__(payload.get("error", "failure"))
        self.payload = payload


# ---------------------------------------------------------------------------
# stages

def resolve_problem(ref: str) -> ProblemSpec:
    if ref in SHIPPED and not Path(ref).exists():
        return shipped_problem(ref)
    return load_problem(ref)


def stage_validate(problem: ProblemSpec, out: Path) -> dict:
    rep = validate_boundary_data(problem.M, problem.N)
    data = {"problem": problem.name, "boundary": rep.to_dict(),
            "coefficients": {"p": "ok", "q": "ok", "r": "ok"}, "passed": rep.passed}
    write_json(out, "validate.json", data)
    write_atomic(out / "problem.json", problem.canonical_json())
    return data


def stage_classify(problem: ProblemSpec, out: Path) -> dict:
    data = {"problem": problem.name, "classification": problem.classification.to_dict(),
            "delta": problem.delta_info.to_dict()}
    write_json(out, "classify.json", data)
    return data


def stage_conditions(problem: ProblemSpec, out: Path) -> dict:
    data = {"problem": problem.name,
            "structure": structure_flags(problem.p, problem.r).to_dict(),
            "conditions": {w: check_condition(problem, w).to_dict() for w in CONDITIONS}}
    write_json(out, "conditions.json", data)
    return data


def stage_spectrum(problem: ProblemSpec, out: Path, lmin: float, lmax: float, complex_window=None,
                   density: float = 400.0) -> dict:
    from .spectral_solver import find_nonreal_eigenvalues, find_real_eigenvalues

    roots = find_real_eigenvalues(problem, (lmin, lmax), density=density)
    rows = [[i, rt.lam, 0.0, rt.D_abs, rt.dD.real, rt.dD.imag, rt.kind] for i, rt in enumerate(roots)]
    nonreal = []
    if complex_window is not None:
        nonreal = sorted(find_nonreal_eigenvalues(problem, tuple(complex_window)),
                         key=lambda z: (z.real, z.imag))
        start = len(rows)
        rows += [[start + i, z.real, z.imag, float("nan"), float("nan"), float("nan"), "nonreal"]
                 for i, z in enumerate(nonreal)]
    note = (f"eigenvalues of {problem.name}; lambda dimensionless; window [{fmt(lmin)}, {fmt(lmax)}]; "
            f"ode_rtol={fmt(problem.tol.ode_rel)} root_tol={fmt(problem.tol.root_tol)} scan_density={fmt(density)}")
    write_csv(out, "spectrum.csv", note,
              ["index", "lambda_re", "lambda_im", "abs_D", "dD_re", "dD_im", "kind"], rows)
    data = {"problem": problem.name, "window": [lmin, lmax], "real": [rt.to_dict() for rt in roots],
            "nonreal": [[z.real, z.imag] for z in nonreal]}
    write_json(out, "spectrum.json", data)
    return data


def stage_chain(problem: ProblemSpec, out: Path, lam: complex) -> dict:
    from .spectral_solver import multiplicity, root_chains

    rep = multiplicity(problem, lam)
    chains = root_chains(problem, lam) if rep.geometric else []
    data = {"problem": problem.name, "multiplicity": rep.to_dict(), "chains": [c.to_dict() for c in chains]}
    write_json(out, "chain.json", data)
    return data


def stage_riesz(problem: ProblemSpec, out: Path, nmax: int) -> dict:
    from .riesz_diagnostics import riesz_run

    run = riesz_run(problem, nmax)
    rows = [[e.N, e.lam_min, e.lam_max, e.ratio] for e in run.gram.entries]
    note = (f"finite-section Gram extremes for {problem.name}; majorant inner product; "
            f"grid {problem.n_panels}x{problem.order}; ode_rtol={fmt(problem.tol.ode_rel)}")
    write_csv(out, "riesz.csv", note, ["N", "lam_min", "lam_max", "ratio"], rows)
    data = {"problem": problem.name, **run.to_dict()}
    write_json(out, "riesz.json", data)
    return data


def stage_wverify(problem: ProblemSpec, out: Path, route=None) -> dict:
    from . import w_construction as wc

    route = route or wc.route_for(problem)
    if route.startswith("k1"):
        if route != wc.route_for(problem):
            raise Failure({"error": f"route {route} does not match the classification", "stage": "wverify"})
        cert = wc.certify_full(problem)
    else:
        cert = wc.certify_glued(problem, route)
    const = cert.constants
    data = {"problem": problem.name, "route": route, "one_minus_kappa_minus_alpha_over_delta2":
            const.identity_residual, "min_eig_target": const.z_bound, **cert.to_dict()}
    write_json(out, "wverify.json", data)
    if not cert.passed:
        failed = [k for k, v in cert.clauses().items() if not v]
        raise Failure({"error": "certification failed", "stage": "wverify", "clauses": failed})
    return data


# ---------------------------------------------------------------------------
# click wiring

def _run(fn, *args, **kwargs) -> None:
    try:
        fn(*args, **kwargs)
    except Failure as exc:
        click.echo(to_json(exc.payload))
        sys.exit(1)
    except ProblemError as exc:
        click.echo(to_json({"error": str(exc), "location": exc.location, "kind": "problem"}))
        sys.exit(1)
    except Exception as exc:  # surfaced as a JSON diagnostic, not a traceback
        click.echo(to_json({"error": str(exc), "kind": type(exc).__name__}))
        sys.exit(1)


problem_arg = click.argument("problem", metavar="PROBLEM")
out_opt = click.option("--out", "out", type=click.Path(file_okay=False, path_type=Path), default=Path("."),
                       show_default=True, help="Output directory.")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main() -> None:
    """Spectral analysis of indefinite Sturm-Liouville problems with lambda-dependent boundary conditions."""


@main.command()
@problem_arg
@out_opt
def validate(problem: str, out: Path) -> None:
    """Parse and validate a problem file."""
    def go():
        data = stage_validate(resolve_problem(problem), out)
        if not data["passed"]:
            raise Failure({"error": "boundary data invalid", "stage": "validate"})
    _run(go)


@main.command()
@problem_arg
@out_opt
def classify(problem: str, out: Path) -> None:
    """Essential-row count, case and the matrix Delta."""
    _run(lambda: stage_classify(resolve_problem(problem), out))


@main.command()
@problem_arg
@out_opt
def conditions(problem: str, out: Path) -> None:
    """Verdicts for the coefficient conditions at 0, -1, 1 and the mixed one."""
    _run(lambda: stage_conditions(resolve_problem(problem), out))


@main.command()
@problem_arg
@out_opt
@click.option("--lmin", type=float, required=True)
@click.option("--lmax", type=float, required=True)
@click.option("--complex-window", type=float, nargs=4, default=None,
              help="re_min re_max im_min im_max for a nonreal search.")
@click.option("--density", type=float, default=400.0, show_default=True,
              help="Scan points per unit of sgn(l)sqrt|l|.")
def spectrum(problem: str, out: Path, lmin: float, lmax: float, complex_window, density: float) -> None:
    """Eigenvalues in a window."""
    _run(lambda: stage_spectrum(resolve_problem(problem), out, lmin, lmax, complex_window or None, density))


@main.command()
@problem_arg
@out_opt
@click.option("--lambda", "lam", type=float, required=True)
@click.option("--lambda-im", "lam_im", type=float, default=0.0)
def chain(problem: str, out: Path, lam: float, lam_im: float) -> None:
    """Multiplicities and Jordan chains at one eigenvalue."""
    _run(lambda: stage_chain(resolve_problem(problem), out, complex(lam, lam_im)))


@main.command()
@problem_arg
@out_opt
@click.option("--nmax", type=click.IntRange(10, 400), default=40, show_default=True)
def riesz(problem: str, out: Path, nmax: int) -> None:
    """Finite-section Gram diagnostics plus the hypothesis dispatcher."""
    _run(lambda: stage_riesz(resolve_problem(problem), out, nmax))


ROUTE_CHOICES = ("k0", "k2-positive", "k2-negative", "k2-indefinite", "k1-u", "k1-v", "k1-uv")


@main.command()
@problem_arg
@out_opt
@click.option("--case", "route", type=click.Choice(ROUTE_CHOICES), default=None,
              help="Override the construction route chosen from the classification.")
def wverify(problem: str, out: Path, route) -> None:
    """Build and certify the positive operator."""
    _run(lambda: stage_wverify(resolve_problem(problem), out, route))


@main.command()
@problem_arg
@out_opt
@click.option("--lmin", type=float, default=-100.0, show_default=True)
@click.option("--lmax", type=float, default=100.0, show_default=True)
@click.option("--nmax", type=click.IntRange(10, 400), default=20, show_default=True)
def report(problem: str, out: Path, lmin: float, lmax: float, nmax: int) -> None:
    """All stages into one directory; exit 1 if any certification fails."""
    def go():
        spec = resolve_problem(problem)
        summary = {"problem": spec.name, "stages": {}}
        failed = []
        stage_validate(spec, out)
        stage_classify(spec, out)
        stage_conditions(spec, out)
        spec_data = stage_spectrum(spec, out, lmin, lmax)
        summary["stages"].update(validate="ok", classify="ok", conditions="ok", spectrum="ok")
        if spec_data["real"]:
            lam0 = min((r["lambda"] for r in spec_data["real"]), key=lambda z: (abs(z), z))
            try:
                stage_chain(spec, out, complex(lam0))
                summary["stages"]["chain"] = "ok"
            except Exception as exc:
                summary["stages"]["chain"] = f"error: {exc}"
                failed.append("chain")
        stage_riesz(spec, out, nmax)
        summary["stages"]["riesz"] = "ok"
        try:
            stage_wverify(spec, out)
            summary["stages"]["wverify"] = "ok"
        except Failure as exc:
            summary["stages"]["wverify"] = "failed"
            failed.append("wverify")
        except Exception as exc:
            summary["stages"]["wverify"] = f"error: {type(exc).__name__}: {exc}"
            failed.append("wverify")
        summary["failed"] = failed
        write_json(out, "report.json", summary)
        if failed:
            raise Failure({"error": "report stages failed", "stages": failed})
    _run(go)


if __name__ == "__main__":  # pragma: no cover
    main()
