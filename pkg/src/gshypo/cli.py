"""Command-line entry point: ``gshypo <subcommand> [options]``.

JSON reports go to stdout with sorted keys and no timestamps; CSV
artifacts go to ``--out`` (default ``$GSHYPO_OUT`` or ``./gshypo-out``),
next to a ``<subcommand>_metadata.json`` that carries the provenance.

Exit codes: 0 success, 2 violated precondition (contract named on stderr),
1 internal error, 64 unknown subcommand.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import traceback
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .config import (RunConfig, load_system, load_time_system, load_toml, run_config_from_dict)
from .diagnostics import (decay_classify, diophantine_profile, hypoellipticity_verdict, shell_eps_csv,
                          solvability_verdict)
from .eigen import Harmonic1D, provider_from_dict, weyl_fit
from .exceptions import AdmissibilityError, ContractError, ShapeError
from .liouville import ContinuedFraction, exp_liouville_test, vector_coordinate_test
from .normal_form import (average_coefficient, conjugation_residual, normal_form_verdict, psi_apply)
from .solver import (apply_system, counterexample_pair, division_field, load_data_vector, save_data_vector,
                     solve_with_report)
from .spectral_core import Bounds, SpaceParams, load_field, mode, reconstruct, save_field
from .symbols import resonance_exact, symbol_values, system_norm_argmax, zero_set

SCHEMA_VERSION = "1"
OUT_ENV = "GSHYPO_OUT"
EXIT_OK, EXIT_INTERNAL, EXIT_CONTRACT, EXIT_USAGE = 0, 1, 2, 64

SUBCOMMANDS = ("symbol", "zero-set", "check-hypo", "check-solv", "solve", "apply", "counterexample",
               "decay-fit", "liouville", "weyl", "normal-form", "psi", "reconstruct")


# ------------------------------------------------------------------ output helpers


def _plain(obj):
    """Make ``obj`` JSON-safe: non-finite floats become strings, Fractions ``"p/q"``."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, str)) or obj is None:
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return str(obj) if obj.denominator != 1 else int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("NaN" if math.isnan(x) else ("Infinity" if x > 0 else "-Infinity"))
    if isinstance(obj, complex):
        return {"re": _plain(obj.real), "im": _plain(obj.imag)}
    return str(obj)


def dumps(payload) -> str:
    return json.dumps(_plain(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


class Output:
    def __init__(self, directory: Path, argv, command: str):
        self.directory = Path(directory)
        self.command = command
        self.argv = list(argv)
        self.written = []

    def path(self, name: str) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        p = self.directory / name
        self.written.append(p.name)
        return p

    def text(self, name: str, content: str) -> Path:
        p = self.path(name)
        p.write_text(content)
        return p

    def finish(self):
        if not self.written:
            return
        meta = {"tool": "gshypo", "version": __version__, "schemaVersion": SCHEMA_VERSION,
                "argv": self.argv, "python": platform.python_version(),
                "numpy": np.__version__, "files": sorted(set(self.written)),
                "createdUtc": datetime.now(timezone.utc).isoformat(timespec="seconds")}
        meta_path = self.directory / f"{self.command}_metadata.json"
        meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


# ------------------------------------------------------------------ parser


def _add_common(p, spec=True, grid=True):
    if spec:
        p.add_argument("--spec", required=True, help="TOML system config")
    if grid:
        p.add_argument("--tau-max", type=int, help="|tau_k| bound (overrides [grid])")
        p.add_argument("--j-max", type=int, help="j bound (overrides [grid])")
        p.add_argument("--shells", type=int, help="number of weight shells")
        p.add_argument("--delta0", type=float)
        p.add_argument("--delta1", type=float)
    p.add_argument("--tol", type=float, help="admissibility tolerance")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./gshypo-out)")
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gshypo", description="Global hypoellipticity and solvability "
                                     "diagnostics for systems on the torus times R^n.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("symbol", help="symbol values and norm at one mode")
    _add_common(p, grid=False)
    p.add_argument("--tau", required=True, help="comma-separated tau")
    p.add_argument("--j", type=int, required=True)

    p = sub.add_parser("zero-set", help="modes where every symbol vanishes")
    _add_common(p)

    for name in ("check-hypo", "check-solv"):
        p = sub.add_parser(name, help="hypoellipticity verdict" if name == "check-hypo" else "solvability verdict")
        _add_common(p)

    p = sub.add_parser("solve", help="solve L u = F")
    _add_common(p, grid=False)
    p.add_argument("--data", required=True, help="data vector manifest JSON")
    p.add_argument("--kernel", help="field supported on the zero set to add")

    p = sub.add_parser("apply", help="F = L u")
    _add_common(p, grid=False)
    p.add_argument("--field", required=True, help="field CSV")

    p = sub.add_parser("counterexample", help="data vectors built on small-divisor witnesses")
    _add_common(p, spec=False)
    p.add_argument("--spec", help="TOML system config (witnesses from its profile or --witness)")
    p.add_argument("--planted", help="planted system on T x R with witnesses j = START:STOP:STEP")
    p.add_argument("--eps", type=float, default=1.0, help="planted decay rate")
    p.add_argument("--witness", action="append", default=[], help="witness 'tau1,...;j' (repeatable)")
    p.add_argument("--flavor", choices=("GH", "GS"), default="GH")

    p = sub.add_parser("decay-fit", help="classify a coefficient field")
    _add_common(p, spec=False, grid=False)
    p.add_argument("--field", required=True)
    p.add_argument("--spec", help="config supplying [space] when the field sidecar has none")
    p.add_argument("--shells", type=int, default=16)
    p.add_argument("--delta0", type=float)
    p.add_argument("--delta1", type=float)

    p = sub.add_parser("liouville", help="exponential Liouville test along convergents")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--rule", action="append", help="factorial-power:B, exp:B, periodic:a,b,..., golden "
                     "(repeat for a vector)")
    src.add_argument("--quotients", help="comma-separated a_1, a_2, ...")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("weyl", help="Weyl-law fit of the eigenvalues")
    p.add_argument("--spec", help="config with an [eigen] table (default harmonic1d)")
    p.add_argument("--j-lo", type=int, default=1000)
    p.add_argument("--j-hi", type=int, default=1_000_000)
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("normal-form", help="averages, normal form and its verdict")
    _add_common(p)
    p.add_argument("--kind", choices=("hypo", "solv"), default="hypo")
    p.add_argument("--n-t", type=int, help="time grid size for the conjugation check")

    p = sub.add_parser("psi", help="apply the phase conjugation or its inverse")
    _add_common(p, grid=False)
    p.add_argument("--field", required=True)
    p.add_argument("--direction", choices=("forward", "inverse"), default="forward")
    p.add_argument("--n-t", type=int)

    p = sub.add_parser("reconstruct", help="evaluate a field on a (t, x) grid")
    _add_common(p, spec=False, grid=False)
    p.add_argument("--field", required=True)
    p.add_argument("--spec", help="config with the eigen provider (default harmonic1d)")
    p.add_argument("--nt", type=int, default=32, help="points per time axis")
    p.add_argument("--x-min", type=float, default=-5.0)
    p.add_argument("--x-max", type=float, default=5.0)
    p.add_argument("--nx", type=int, default=101)
    return parser


# ------------------------------------------------------------------ helpers


def _run_config(args, data, m) -> RunConfig:
    base = run_config_from_dict(data, m) if data is not None else RunConfig()
    bounds = base.bounds
    tau_max, j_max = getattr(args, "tau_max", None), getattr(args, "j_max", None)
    if tau_max is not None or j_max is not None:
        if bounds is None and (tau_max is None or j_max is None):
            raise ContractError("give both --tau-max and --j-max (or a [grid] table)", contract="grid bounds")
        tm = (tau_max,) * m if tau_max is not None else bounds.tau_max
        bounds = Bounds(tm, j_max if j_max is not None else bounds.j_max)
    if bounds is not None and (min(bounds.tau_max) < 0 or bounds.j_max < 0):
        raise ContractError("bounds must be nonnegative", contract="grid bounds")

    def pick(name, default):
        v = getattr(args, name, None)
        return default if v is None else v

    return RunConfig(bounds, pick("shells", base.shell_count), pick("delta0", base.delta0),
                     pick("delta1", base.delta1), pick("tol", base.tol), _out_dir(args))


def _out_dir(args) -> Path:
    return Path(getattr(args, "out", None) or os.environ.get(OUT_ENV) or "gshypo-out")


def _need_bounds(cfg: RunConfig) -> Bounds:
    if cfg.bounds is None:
        raise ContractError("grid bounds missing: use --tau-max/--j-max or a [grid] table", contract="grid bounds")
    return cfg.bounds


def _threads(args) -> int:
    t = int(getattr(args, "threads", 1) or 1)
    if t < 1:
        raise ContractError("--threads must be >= 1", contract="threads >= 1")
    return t


def _system(args):
    spec = load_system(args.spec)
    return spec, _run_config(args, load_toml(args.spec), spec.params.m)


def _parse_witness(text: str, m: int):
    tau_part, _, j_part = text.partition(";")
    tau = tuple(int(x) for x in tau_part.split(","))
    if len(tau) != m or not j_part:
        raise ContractError(f"bad witness {text!r}; expected 'tau1,...,tau{m};j'", contract="witness format")
    return mode(tau, int(j_part))


def _field_params(path, fallback_spec=None, m=None):
    field_, params = load_field(path)
    if params is None and fallback_spec:
        params = SpaceParams.from_dict(load_toml(fallback_spec).get("space", {}))
    if params is None:
        params = SpaceParams(m=field_.bounds.m)
    return field_, params


# ------------------------------------------------------------------ subcommands


def cmd_symbol(args, out):
    spec, _ = _system(args)
    tau = tuple(int(x) for x in args.tau.split(","))
    md = mode(tau, args.j)
    if len(tau) != spec.params.m:
        raise ShapeError(f"--tau has {len(tau)} entries, system has m={spec.params.m}")
    vals = symbol_values(spec, np.array([list(tau) + [args.j]], dtype=np.int64))[:, 0]
    norm, r = system_norm_argmax(spec, md)
    return {"tau": list(tau), "j": args.j, "values": [complex(v) for v in vals],
            "norm": float(norm), "argmax": int(r)}


def cmd_zero_set(args, out):
    spec, cfg = _system(args)
    bounds = _need_bounds(cfg)
    zs = zero_set(spec, bounds)
    lines = [",".join([f"tau_{k + 1}" for k in range(spec.params.m)] + ["j"])]
    lines += [",".join(str(x) for x in list(md.tau) + [md.j]) for md in zs.modes]
    out.text("zero_set.csv", "\n".join(lines) + "\n")
    res = resonance_exact(spec)
    return {"grid": bounds.to_dict(), "count": len(zs), "floatZeroCaveat": zs.float_zero_caveat,
            "modes": [{"tau": list(md.tau), "j": md.j} for md in zs.modes[:1000]],
            "resonance": res.to_dict()}


def _verdict(args, out, fn):
    spec, cfg = _system(args)
    bounds = _need_bounds(cfg)
    rep = diophantine_profile(spec, bounds, cfg.shell_count, delta0=cfg.delta0, delta1=cfg.delta1,
                              threads=_threads(args))
    out.text("shell_eps.csv", shell_eps_csv(rep))
    return fn(spec, bounds, cfg.shell_count, report=rep).to_dict()


def cmd_check_hypo(args, out):
    return _verdict(args, out, hypoellipticity_verdict)


def cmd_check_solv(args, out):
    return _verdict(args, out, solvability_verdict)


def cmd_solve(args, out):
    spec, cfg = _system(args)
    F = load_data_vector(args.data)
    kernel = load_field(args.kernel, F.bounds)[0] if args.kernel else None
    u, rep = solve_with_report(spec, F, kernel, cfg.tol)
    save_field(u, out.path("u.csv"), spec.params)
    out.written.append("u.csv.json")
    return {"solve": rep.to_dict(), "u": "u.csv"}


def cmd_apply(args, out):
    spec, _ = _system(args)
    u, _ = load_field(args.field)
    F = apply_system(spec, u)
    manifest = save_data_vector(F, out.directory, "f", spec.params)
    out.written.extend([manifest.name] + [f"f_{r + 1}.csv" for r in range(F.ell)])
    return {"manifest": manifest.name, "ell": F.ell}


def cmd_counterexample(args, out):
    from .synthetic import planted_system

    if args.planted:
        start, stop, step = (int(x) for x in args.planted.split(":"))
        spec, witnesses = planted_system(range(start, stop + 1, step), args.eps)
        cfg = _run_config(args, None, 1)
    elif args.spec:
        spec, cfg = _system(args)
        witnesses = [_parse_witness(w, spec.params.m) for w in args.witness]
        if not witnesses:
            rep = diophantine_profile(spec, _need_bounds(cfg), cfg.shell_count, threads=_threads(args))
            witnesses = [md for md, norm, _, _ in rep.worst_modes if norm > 0]
    else:
        raise ContractError("give --spec or --planted", contract="counterexample source")
    F, u = counterexample_pair(spec, witnesses, args.flavor, cfg.bounds)
    manifest = save_data_vector(F, out.directory, "f", spec.params)
    out.written.extend([manifest.name] + [f"f_{r + 1}.csv" for r in range(F.ell)])
    kw = {"delta0": cfg.delta0, "delta1": cfg.delta1}
    result = {"flavor": args.flavor, "witnessCount": len(witnesses), "manifest": manifest.name,
              "F": [decay_classify(F[r], spec.params, **kw).to_dict() for r in range(F.ell)]}
    if u is not None:
        save_field(u, out.path("u.csv"), spec.params)
        result["u"] = decay_classify(u, spec.params, **kw).to_dict()
    else:
        div = division_field(spec, F)
        save_field(div, out.path("division.csv"), spec.params)
        result["division"] = decay_classify(div, spec.params, **kw).to_dict()
    return result


def cmd_decay_fit(args, out):
    field_, params = _field_params(args.field, args.spec)
    kw = {k: v for k, v in (("delta0", args.delta0), ("delta1", args.delta1)) if v is not None}
    verdict = decay_classify(field_, params, shell_count=args.shells, **kw)
    pts = verdict.profile.points
    out.text("decay_profile.csv", "rho,negLogMag\n" + "".join(f"{w!r},{y!r}\n" for w, y in pts.tolist()))
    return verdict.to_dict()


def cmd_liouville(args, out):
    if args.quotients:
        cfs = [ContinuedFraction([int(a) for a in args.quotients.split(",")])]
    else:
        cfs = [ContinuedFraction.from_rule_string(r) for r in args.rule]
    if len(cfs) == 1:
        return exp_liouville_test(cfs[0], args.sigma, args.depth).to_dict()
    return vector_coordinate_test(cfs, args.sigma, args.depth).to_dict()


def cmd_weyl(args, out):
    eigen = provider_from_dict(load_toml(args.spec).get("eigen", {}), Path(args.spec).parent) \
        if args.spec else Harmonic1D()
    fit = weyl_fit(eigen, (args.j_lo, args.j_hi))
    return {"provider": eigen.describe(), "rhoHat": fit.rho_hat, "exponentHat": fit.exponent_hat,
            "sampleRange": list(fit.sample_range)}


def cmd_normal_form(args, out):
    La = load_time_system(args.spec)
    cfg = _run_config(args, load_toml(args.spec), La.params.m)
    bounds = _need_bounds(cfg)
    nf = normal_form_verdict(La, bounds, cfg.shell_count, args.kind, delta0=cfg.delta0, delta1=cfg.delta1,
                             threads=_threads(args))
    rep = nf.verdict.report
    out.text("shell_eps.csv", shell_eps_csv(rep))
    result = nf.to_dict()
    result["averagesExact"] = [str(average_coefficient(a)) for a in La.coeffs.coeffs]
    # conjugation check on a unit-impulse field in every mode of a small window
    small = Bounds(tuple(min(t, 8) for t in bounds.tau_max), min(bounds.j_max, 4))
    test = _probe_field(small)
    result["conjugation"] = conjugation_residual(La, test, args.n_t, report=True).to_dict()
    return result


def _probe_field(bounds: Bounds):
    from .spectral_core import SpectralField, weights

    modes = bounds.all_modes()
    w = weights(SpaceParams(m=bounds.m), modes)
    return SpectralField(bounds, modes, np.exp(-w).astype(complex))


def cmd_psi(args, out):
    La = load_time_system(args.spec)
    u, _ = load_field(args.field)
    res = psi_apply(args.direction, u, La, args.n_t, _threads(args), report=True)
    name = "psi_forward.csv" if args.direction == "forward" else "psi_inverse.csv"
    save_field(res.field, out.path(name), La.params)
    out.written.append(name + ".json")
    return dict(res.to_dict(), field=name, direction=args.direction)


def cmd_reconstruct(args, out):
    field_, params = _field_params(args.field, args.spec)
    eigen = provider_from_dict(load_toml(args.spec).get("eigen", {}), Path(args.spec).parent) \
        if args.spec else Harmonic1D()
    m = field_.bounds.m
    axes = [2 * np.pi * np.arange(args.nt) / args.nt] * m
    t_grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    x = np.linspace(args.x_min, args.x_max, args.nx)
    vals = reconstruct(field_, t_grid, x, eigen)
    head = ",".join([f"t_{k + 1}" for k in range(m)] + ["x", "re", "im"])
    rows = [head]
    for a, t in enumerate(t_grid):
        tt = ",".join(repr(float(v)) for v in t)
        for b, xv in enumerate(x):
            v = vals[a, b]
            rows.append(f"{tt},{float(xv)!r},{float(v.real)!r},{float(v.imag)!r}")
    out.text("reconstruction.csv", "\n".join(rows) + "\n")
    return {"points": int(vals.size), "file": "reconstruction.csv", "maxAbs": float(np.abs(vals).max())}


COMMANDS = {
    "symbol": cmd_symbol, "zero-set": cmd_zero_set, "check-hypo": cmd_check_hypo,
    "check-solv": cmd_check_solv, "solve": cmd_solve, "apply": cmd_apply,
    "counterexample": cmd_counterexample, "decay-fit": cmd_decay_fit, "liouville": cmd_liouville,
    "weyl": cmd_weyl, "normal-form": cmd_normal_form, "psi": cmd_psi, "reconstruct": cmd_reconstruct,
}


def run_cli(argv=None, stdout=None, stderr=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    first = next((a for a in argv if not a.startswith("-")), None)
    if first is None and any(a in ("-h", "--help", "--version") for a in argv):
        try:
            parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
    if first not in COMMANDS:
        parser.print_usage(stderr)
        stderr.write(f"gshypo: unknown subcommand {first!r}; choose from {', '.join(SUBCOMMANDS)}\n")
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse reports bad flags with code 2, which is also a contract violation
        return int(exc.code or 0)
    out = Output(_out_dir(args), argv, args.command)
    try:
        result = COMMANDS[args.command](args, out)
    except AdmissibilityError as exc:
        stderr.write(f"gshypo: contract violated [{exc.contract}]: {exc}\n")
        stderr.write(dumps(exc.report.to_dict()))
        return EXIT_CONTRACT
    except ContractError as exc:
        stderr.write(f"gshypo: contract violated [{exc.contract}]: {exc}\n")
        return EXIT_CONTRACT
    except Exception as exc:  # noqa: BLE001 - report and map to the internal-error code
        stderr.write(f"gshypo: internal error: {exc!r}\n")
        traceback.print_exc(file=stderr)
        return EXIT_INTERNAL
    result = dict(result, schemaVersion=SCHEMA_VERSION, command=args.command)
    stdout.write(dumps(result))
    out.finish()
    return EXIT_OK


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
