"""Command-line front end.

Every command prints a JSON report (default) or CSV (``--format csv``).
Exact values are serialized as ``p/q`` strings and every record carries an
``"arith"`` tag (``"exact"`` or ``"float"``).

Exit codes: 0 success, 2 usage error, 3 precondition failure.

Symbol specifications (``--f``, ``--g``):

* ``1``, ``h`` or ``a,b,d[:c];...``: closed forms
  ``sum c x^a y^b (1 + x y)^-d`` in the chart coordinates (one variable);
* ``d:e1,...,e2n[:c];...``: a polynomial in the displacement from the base.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor

from .errors import BerezinError, LayoutError, PreconditionError
from .scalars import QQi, format_scalar, is_exact, parse_scalar

__all__ = ["main", "run_command", "parse_k_list", "sweep", "build_parser"]


class UsageError(Exception):
    """Bad command-line input (exit code 2)."""


# -- parsing helpers -----------------------------------------------------------

def parse_k_list(text: str) -> list:
    """``"8..64"``, ``"8..64:8"`` (step) or ``"8,16,32"``."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                rng, _, step = part.partition(":")
                lo, hi = rng.split("..")
                out.extend(range(int(lo), int(hi) + 1, int(step) if step else 1))
            else:
                out.append(int(part))
        except ValueError:
            raise UsageError(f"bad k-list {text!r}") from None
    if not out:
        raise UsageError("empty k-list")
    return out


def _scalar(text, allow_float):
    try:
        return parse_scalar(text, allow_float=allow_float)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _base(text, model, allow_float):
    parts = [t for t in str(text).replace(";", ",").split(",") if t.strip()]
    vals = [_scalar(t, allow_float) for t in parts]
    n = model.n
    if len(vals) != 2 * n:
        raise UsageError(f"--base needs {2 * n} coordinates for {model.name}")
    return (tuple(vals[:n]), tuple(vals[n:]))


def _model(text):
    from .geometry import parse_model
    try:
        return parse_model(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _symbol_jet(spec, model, base, order):
    from .jets import Jet, VariableLayout, from_polynomial
    from .oracle import OracleSymbol

    spec = spec.strip()
    n = model.n
    lay = VariableLayout(n, ("x", "y_c"))
    if spec.startswith("d:"):
        terms = {}
        for part in spec[2:].split(";"):
            exps, _, coeff = part.partition(":")
            try:
                e = tuple(int(t) for t in exps.split(","))
            except ValueError:
                raise UsageError(f"bad displacement term {part!r}") from None
            if len(e) != 2 * n:
                raise UsageError(f"displacement term {part!r} needs {2 * n} exponents")
            terms[e] = terms.get(e, 0) + (_scalar(coeff, False) if coeff else 1)
        jet = from_polynomial(lay, terms, order)
        exact = all(is_exact(c) for c in base[0] + base[1])
        return jet if exact else jet.to_float()
    if n != 1:
        raise UsageError("closed-form symbols need a one-variable model; use d:... terms")
    try:
        sym = OracleSymbol.parse(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return sym.polarized_jet((base[0][0], base[1][0]), order)


def _oracle_symbol(spec):
    from .oracle import OracleSymbol
    try:
        return OracleSymbol.parse(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- serialization -------------------------------------------------------------

def _arith(x) -> str:
    return "exact" if (isinstance(x, (int, QQi)) or is_exact(x)) else "float"


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return format_scalar(x)


def _record(**fields):
    """Ordered record; numeric fields are formatted and tagged."""
    out, tags = {}, set()
    for key, val in fields.items():
        if isinstance(val, (list, tuple)):
            out[key] = [_fmt(v) for v in val]
            tags.update(_arith(v) for v in val)
        elif val is None or isinstance(val, (str, bool)):
            out[key] = val
        else:
            out[key] = _fmt(val)
            tags.add(_arith(val))
    out["arith"] = "float" if "float" in tags else "exact"
    return out


def _emit(report, fmt, columns=None) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    buf = io.StringIO()
    rows = report["records"]
    cols = columns or (list(rows[0].keys()) if rows else [])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([";".join(r[c]) if isinstance(r.get(c), list) else ("" if r.get(c) is None else r.get(c))
                    for c in cols])
    return buf.getvalue()


# -- commands --------------------------------------------------------------------

def cmd_models(args):
    from .geometry import parse_model
    recs = []
    for spec, note in (("flat:1", "phi = sum x_i y_i on C^n"),
                       ("fs:0", "Fubini-Study chart of CP^1, auxiliary O(m)"),
                       ("pflat:1/10", "phi = w + lam w^2 / 2, w = x y")):
        m = parse_model(spec)
        recs.append({"model": spec, "kind": m.kind, "n": str(m.n), "global_potential": m.has_global_potential,
                     "description": note, "arith": "exact"})
    return recs, ["model", "kind", "n", "global_potential", "description"]


def cmd_rho(args):
    from .bergman import rho_jets
    model = _model(args.model)
    base = _base(args.base, model, args.float)
    sym = rho_jets(model, base, args.cap, out_order=args.order)
    vals = sym.values()
    recs = [_record(ell=str(l), value=v) for l, v in enumerate(vals)]
    return recs, ["ell", "value"], {"coefficients": [_fmt(v) for v in vals],
                                    "arith": "float" if any(_arith(v) == "float" for v in vals) else "exact"}


def _prefix(spec, model, base, order, cap):
    from .starproduct import SymbolPrefix
    return SymbolPrefix.from_jet(_symbol_jet(spec, model, base, order), cap)


def cmd_star(args):
    from .starproduct import star_product
    model = _model(args.model)
    base = _base(args.base, model, args.float)
    order = args.order if args.order is not None else 2 * args.cap
    F = _prefix(args.f, model, base, order, args.cap)
    G = _prefix(args.g, model, base, order, args.cap)
    P = star_product(model, base, F, G, args.cap)
    return [_record(ell=str(l), value=v) for l, v in enumerate(P.values())], ["ell", "value"]


def cmd_bmap(args, inverse=False):
    from .contravariant import b_inverse_map, b_map
    model = _model(args.model)
    base = _base(args.base, model, args.float)
    order = args.order if args.order is not None else 2 * args.cap
    F = _prefix(args.f, model, base, order, args.cap)
    out = (b_inverse_map if inverse else b_map)(model, base, F, args.cap)
    return [_record(ell=str(l), value=v) for l, v in enumerate(out.values())], ["ell", "value"]


def cmd_acoeff(args):
    from .starproduct import a_coeff, a_table
    model = _model(args.model)
    base = _base(args.base, model, args.float)
    if args.alpha is not None or args.beta is not None:
        if args.ell is None or args.alpha is None or args.beta is None:
            raise UsageError("--alpha and --beta need --ell")
        al = tuple(int(t) for t in args.alpha.split(","))
        be = tuple(int(t) for t in args.beta.split(","))
        v = a_coeff(model, base, args.ell, al, be)
        return [_record(ell=str(args.ell), alpha=",".join(map(str, al)), beta=",".join(map(str, be)), value=v)], \
            ["ell", "alpha", "beta", "value"]
    L = args.ell if args.ell is not None else 2
    tab = a_table(model, base, L)
    recs = [_record(ell=str(l), alpha=",".join(map(str, al)), beta=",".join(map(str, be)), value=v)
            for (l, al, be), v in sorted(tab.entries.items())]
    return recs, ["ell", "alpha", "beta", "value"]


def cmd_growth(args):
    from .bergman import rho_jets
    from .contravariant import b_inverse_coefficients
    from .scalars import magnitude
    from .starproduct import a_table
    from .symbols import running_constants
    model = _model(args.model)
    base = _base(args.base, model, args.float)
    if args.what == "a":
        tab = a_table(model, base, args.cap)
        norms = [tab.level_max(l) for l in range(args.cap + 1)]
        kind = "unit"
    elif args.what == "rho":
        norms = [magnitude(v) for v in rho_jets(model, base, args.cap, out_order=0).values()]
        kind = "power"
    else:
        tabs = b_inverse_coefficients(model, base, args.cap)
        norms = [1.0] + [max((magnitude(v) for v in tabs[l].values()), default=0.0) for l in range(1, args.cap + 1)]
        kind = "power"
    if kind == "unit":
        per = [float(nm) ** (1.0 / (l + 1)) for l, nm in enumerate(norms)]
        run = [max(per[:i + 1]) for i in range(len(per))]
    else:
        per, run = running_constants(norms, kind)
    return [_record(ell=str(l), norm=float(nm), C_level=p, C_running=r)
            for l, (nm, p, r) in enumerate(zip(norms, per, run))], ["ell", "norm", "C_level", "C_running"]


def cmd_oracle_product(args):
    from .oracle import compare_product
    f, g = _oracle_symbol(args.f), _oracle_symbol(args.g)
    N = "auto" if args.N == "auto" else int(args.N)
    rep = compare_product(f, g, N, parse_k_list(args.k), m=args.m, method=args.method)
    slopes = rep.slopes_so_far()
    recs = [_record(k=str(k), N=str(n), residual=float(r), slope_so_far=(float(s) if s is not None else None))
            for (k, n, r, _), s in zip(rep.rows, slopes)]
    summary = {"slope": rep.slope, "epsilon": None if rep.epsilon is None else format_scalar(rep.epsilon),
               "C_fit": rep.C_fit, "arith": "float"}
    if rep.rate is not None:
        summary.update(rate=rep.rate.rate, r2=rep.rate.quality, floor_limited=rep.rate.floor_limited)
    return recs, ["k", "N", "residual", "slope_so_far"], summary


def cmd_oracle_covariant(args):
    from .oracle import covariant_from_oracle
    f = _oracle_symbol(args.f)
    z = _scalar(args.z, args.float)
    est = covariant_from_oracle(f, args.cap, parse_k_list(args.k), z=z, m=args.m)
    recs = [_record(ell=str(l), value=v, error=float(e)) for l, (v, e) in enumerate(zip(est.values, est.errors))]
    return recs, ["ell", "value", "error"], {"condition": est.condition, "arith": "float"}


def cmd_oracle_bergman(args):
    from .oracle import bergman_kernel_eval, bergman_kernel_sum
    z, w = (complex(_scalar(t, args.float)) for t in (args.z, args.w))
    recs = []
    for k in parse_k_list(args.k):
        recs.append(_record(k=str(k), closed_form=bergman_kernel_eval(k, args.m, z, w),
                            basis_sum=abs(bergman_kernel_sum(k, args.m, z, w))))
    return recs, ["k", "closed_form", "basis_sum"]


def cmd_oracle_offdiag(args):
    from .oracle import offdiag_rate
    z, w = (complex(_scalar(t, args.float)) for t in (args.z, args.w))
    fit = offdiag_rate(z, w, args.m, parse_k_list(args.k))
    recs = [_record(k=str(k), kernel=v) for k, v in sorted(fit.samples.items())]
    return recs, ["k", "kernel"], {"rate": fit.rate, "reference": fit.reference, "arith": "float"}


def cmd_seminorm(args):
    from .symbols import cauchy_upper_bound, derivative_op, seminorm_lower_bound
    t, s = float(_scalar(args.t, args.float)), float(_scalar(args.s, args.float))
    if args.op == "id":
        gamma = (0,) * args.n
    else:
        try:
            gamma = tuple(int(v) for v in args.op.split(":", 1)[1].split(","))
        except (IndexError, ValueError):
            raise UsageError("--op must be 'id' or 'd:g1,...,gn'") from None
    if len(gamma) != args.n:
        raise UsageError(f"--op needs {args.n} derivative orders")
    upper = cauchy_upper_bound(gamma, t, s)
    est = seminorm_lower_bound(derivative_op(gamma), t, s, args.deg, n=args.n, name=args.op, upper=upper)
    return [_record(operator=args.op, t=t, s=s, deg_cap=str(args.deg), lower=est.lower, upper=upper,
                    witness=est.witness)], ["operator", "t", "s", "deg_cap", "lower", "upper", "witness"]


COMMANDS = {
    "models": cmd_models,
    "rho": cmd_rho,
    "star": cmd_star,
    "acoeff": cmd_acoeff,
    "bmap": cmd_bmap,
    "binv": lambda a: cmd_bmap(a, inverse=True),
    "growth": cmd_growth,
    "oracle-product": cmd_oracle_product,
    "oracle-covariant": cmd_oracle_covariant,
    "oracle-bergman": cmd_oracle_bergman,
    "oracle-offdiag": cmd_oracle_offdiag,
    "seminorm": cmd_seminorm,
}

CSV_DEFAULT = {"oracle-product", "oracle-bergman", "oracle-offdiag"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="berezin", description="Berezin-Toeplitz symbol calculus and CP^1 oracle.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, model=True):
        if model:
            sp.add_argument("--model", default="fs:0")
            sp.add_argument("--base", default="0,0")
        sp.add_argument("--format", choices=("json", "csv"))
        sp.add_argument("--output")
        sp.add_argument("--float", action="store_true", help="accept decimal literals")
        sp.add_argument("--timing", action="store_true", help="record wall time in JSON reports")

    common(sub.add_parser("models"), model=False)
    sp = sub.add_parser("rho")
    common(sp)
    sp.add_argument("--cap", type=int, default=4)
    sp.add_argument("--order", type=int, default=0)
    for name in ("star", "bmap", "binv"):
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--f", required=True)
        if name == "star":
            sp.add_argument("--g", required=True)
        sp.add_argument("--cap", type=int, default=3)
        sp.add_argument("--order", type=int)
    sp = sub.add_parser("acoeff")
    common(sp)
    sp.add_argument("--ell", type=int)
    sp.add_argument("--alpha")
    sp.add_argument("--beta")
    sp = sub.add_parser("growth")
    common(sp)
    sp.add_argument("--what", choices=("a", "rho", "binv"), default="a")
    sp.add_argument("--cap", type=int, default=4)
    sp = sub.add_parser("oracle-product")
    common(sp, model=False)
    sp.add_argument("--f", default="h")
    sp.add_argument("--g", default="h")
    sp.add_argument("--N", default="0")
    sp.add_argument("--k", default="8..64")
    sp.add_argument("--m", type=int, default=0)
    sp.add_argument("--method", choices=("closed", "quadrature"), default="closed")
    sp = sub.add_parser("oracle-covariant")
    common(sp, model=False)
    sp.add_argument("--f", default="h")
    sp.add_argument("--cap", type=int, default=2)
    sp.add_argument("--k", default="40..64:2")
    sp.add_argument("--z", default="0")
    sp.add_argument("--m", type=int, default=0)
    for name in ("oracle-bergman", "oracle-offdiag"):
        sp = sub.add_parser(name)
        common(sp, model=False)
        sp.add_argument("--z", default="0")
        sp.add_argument("--w", default="1" if name == "oracle-offdiag" else "0")
        sp.add_argument("--m", type=int, default=0)
        sp.add_argument("--k", default="8..64")
    sp = sub.add_parser("seminorm")
    common(sp, model=False)
    sp.add_argument("--op", default="d:1")
    sp.add_argument("--t", default="1")
    sp.add_argument("--s", default="1/2")
    sp.add_argument("--deg", type=int, default=8)
    sp.add_argument("--n", type=int, default=1)
    sp = sub.add_parser("sweep")
    sp.add_argument("config")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--outdir", default=".")
    return p


def _write_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _run(argv, out=None, err=None):
    """Run one command; returns ``(exit code, text)``."""
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage())
        if args.command == "sweep":
            return sweep(args.config, jobs=args.jobs, outdir=args.outdir, err=err), ""
        t0 = time.perf_counter()
        res = COMMANDS[args.command](args)
        recs, cols = res[0], res[1]
        summary = res[2] if len(res) > 2 else None
        report = {"command": args.command,
                  "args": {k: v for k, v in sorted(vars(args).items())
                           if k not in ("command", "output", "format", "timing") and v is not None},
                  "records": recs}
        if summary is not None:
            report["summary"] = summary
        if args.timing:
            report["timing"] = {"seconds": round(time.perf_counter() - t0, 6), "arith": "float"}
        fmt = args.format or ("csv" if args.command in CSV_DEFAULT else "json")
        text = _emit(report, fmt, cols)
        if args.output:
            _write_atomic(args.output, text)
        else:
            out.write(text)
        return 0, text
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return 2, ""
    except LayoutError as exc:
        err.write(f"usage error: {exc}\n")
        return 2, ""
    except (PreconditionError, BerezinError) as exc:
        err.write(f"precondition failed: {exc}\n")
        return 3, ""
    except OSError as exc:
        err.write(f"precondition failed: {exc}\n")
        return 3, ""


def run_command(argv) -> int:
    """Run ``argv`` (without the program name) and return the exit code."""
    return _run(list(argv))[0]


# -- sweeps ---------------------------------------------------------------------------

def _parse_config(path):
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise PreconditionError(f"cannot read sweep config: {exc}") from None
    jobs, cur = [], {}
    for no, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            if cur:
                jobs.append(cur)
                cur = {}
            continue
        if line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep or not key.strip():
            raise PreconditionError(f"{path}:{no}: expected key=value, got {raw!r}")
        cur[key.strip()] = val.strip()
    if cur:
        jobs.append(cur)
    for i, job in enumerate(jobs):
        if "command" not in job:
            raise PreconditionError(f"{path}: job {i + 1} has no command")
    return jobs


def _job_argv(job, outdir, index):
    argv = [job["command"]]
    out = job.get("output") or f"job{index:03d}.{job.get('format', 'json')}"
    for key, val in job.items():
        if key in ("command", "output"):
            continue
        if val.lower() in ("true", "yes") and key in ("float",):
            argv.append(f"--{key}")
        else:
            argv.extend([f"--{key}", val])
    path = out if os.path.isabs(out) else os.path.join(outdir, out)
    return argv + ["--output", path], path


def _run_job(argv):
    buf_err = io.StringIO()
    code, _ = _run(argv, out=io.StringIO(), err=buf_err)
    return code, buf_err.getvalue()


def sweep(config, jobs=1, outdir=".", err=None) -> int:
    """Run every job of a sweep config; returns the worst exit code.

    A summary (``sweep-summary.csv`` in ``outdir``) lists jobs in config order.
    """
    err = err if err is not None else sys.stderr
    try:
        specs = _parse_config(config)
    except PreconditionError as exc:
        err.write(f"precondition failed: {exc}\n")
        return 3
    argvs = [_job_argv(job, outdir, i + 1) for i, job in enumerate(specs)]
    if jobs > 1 and len(argvs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_job, [a for a, _ in argvs]))
    else:
        results = [_run_job(a) for a, _ in argvs]
    worst = 0
    lines = ["job,command,exit,output"]
    for i, ((argv, path), (code, msg)) in enumerate(zip(argvs, results), 1):
        if msg:
            err.write(msg)
        worst = max(worst, code)
        lines.append(f"{i},{argv[0]},{code},{os.path.basename(path)}")
    _write_atomic(os.path.join(outdir, "sweep-summary.csv"), "\n".join(lines) + "\n")
    return worst


def main(argv=None):
    code = run_command(sys.argv[1:] if argv is None else argv)
    sys.exit(code)


if __name__ == "__main__":
    main()
