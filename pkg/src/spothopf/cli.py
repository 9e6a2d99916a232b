"""Command-line entry point.

Exit codes: 0 success, 1 failed validation checks, 2 usage error,
3 numerical failure (a diagnostic JSON document is written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
SIG_DIGITS = 12


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------

def _round(x):
    if isinstance(x, bool) or x is None or isinstance(x, (str, int)):
        return x
    if hasattr(x, "tolist") and not isinstance(x, (float, complex)):
        return _round(x.tolist())
    if isinstance(x, complex):
        return [_round(x.real), _round(x.imag)]
    if isinstance(x, float):
        if not math.isfinite(x):
            return None
        return float(f"{x:.{SIG_DIGITS}g}")
    if isinstance(x, dict):
        return {str(k): _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    if hasattr(x, "item"):
        return _round(x.item())
    return x


def dumps(obj) -> str:
    """JSON with floats rounded to 12 significant digits and sorted keys."""
    return json.dumps(_round(obj), indent=2, sort_keys=True) + "\n"


def _fmt(x) -> str:
    return f"{float(x):.{SIG_DIGITS}g}"


def _csv(header, rows, manifest) -> str:
    buf = io.StringIO()
    buf.write("# manifest: " + json.dumps(_round(manifest), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) if isinstance(v, float) or hasattr(v, "dtype") else v for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# inputs
# ---------------------------------------------------------------------------

def _range(text, integer=False):
    """``a..b`` (inclusive) or a comma list."""
    try:
        if ".." in text:
            a, b = text.split("..")
            return (int(a), int(b)) if integer else (float(a), float(b))
        vals = [int(v) if integer else float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad range {text!r}") from exc
    return vals


def _floats(text):
    try:
        return [float(v) for v in text.split(",")] if text else []
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def domain_from_dict(spec: dict):
    """Domain from ``{"kind": ..., ...}``."""
    from .greens import Disk, GriddedDomain, HalfDisk, PerturbedDisk, Rectangle

    kind = spec.get("kind")
    try:
        if kind == "disk":
            return Disk(spec.get("radius", 1.0))
        if kind == "half_disk":
            return HalfDisk(spec.get("radius", 1.0))
        if kind == "rectangle":
            return Rectangle(spec.get("width", 2.0), spec.get("height", 1.0))
        if kind == "perturbed_disk":
            return PerturbedDisk(spec["sigma"], spec["fourier_cos"], spec.get("fourier_sin"))
        if kind == "gridded":
            return GriddedDomain.from_dict(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid {kind} domain: {exc}") from exc
    raise UsageError(f"unknown domain kind {kind!r}")


def _domain(args):
    if not args.domain:
        return {"kind": "disk", "radius": 1.0}, domain_from_dict({"kind": "disk"})
    spec = load_json(args.domain)
    return spec, domain_from_dict(spec)


def _seeds(args):
    if not getattr(args, "seeds", None):
        return None
    data = load_json(args.seeds)
    if isinstance(data, dict):
        data = data.get("locations", data.get("sources"))
    try:
        import numpy as np
        pts = np.asarray(data, float).reshape(-1, 2)
    except (TypeError, ValueError) as exc:
        raise UsageError("seeds must be a list of [x, y] points") from exc
    return pts


def _initial(domain, spec, n, seeds):
    import numpy as np

    from .equilibrium import SpotConfiguration, line_init, ring_init

    if seeds is not None:
        return SpotConfiguration(seeds, np.ones(len(seeds)))
    kind = spec["kind"]
    if kind in ("disk", "perturbed_disk"):
        return ring_init(n, 0.6 * spec.get("radius", 1.0))
    if kind == "rectangle":
        return line_init(n, domain.width, domain.height)
    if n == 1 and kind == "half_disk":
        return SpotConfiguration(np.array([[0.0, 0.45 * domain.radius]]), np.ones(1))
    if n == 1 and kind == "gridded":
        c = domain.shape.centroid
        if not domain.shape.contains(c):
            c = domain.shape.representative_point()
        return SpotConfiguration(np.array([[c.x, c.y]]), np.ones(1))
    raise UsageError(f"--seeds is required for {n} spots in a {kind} domain")


def _params(args, domain, n):
    from .equilibrium import SchnakenbergParams

    try:
        if args.feed is not None:
            return SchnakenbergParams(args.eps, args.feed)
        return SchnakenbergParams.from_strength(args.eps, args.strength, n, domain.area)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _manifest(args, spec=None, params=None, outputs=()):
    m = {"command": args.command, "version": __version__,
         "domain_path": getattr(args, "domain", None), "domain": spec,
         "tol": getattr(args, "tol", None), "seeds": getattr(args, "seeds", None),
         "threads": getattr(args, "threads", None), "outputs": list(outputs)}
    if params is not None:
        m["parameters"] = {"epsilon": params.epsilon, "feed": params.feed, "nu": params.nu}
    return m


class _Sink:
    """Collects named outputs; written to ``--out`` or printed."""

    def __init__(self, args):
        self.out = Path(args.out) if getattr(args, "out", None) else None
        self.files = []

    def emit(self, name, text, primary=True):
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)
            (self.out / name).write_text(text)
            self.files.append(name)
        if primary:
            sys.stdout.write(text)

    def finish(self, manifest):
        if self.out is not None:
            stamped = dict(manifest, timestamp=datetime.now(timezone.utc).isoformat(), outputs=self.files)
            (self.out / "manifest.json").write_text(dumps(stamped))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_core_table(args):
    import numpy as np

    from .core import core_data

    if args.S_values:
        S = _floats(args.S_values)
    else:
        S = np.linspace(args.S_min, args.S_max, args.count).tolist()
    if any(not (0 < s <= 4.3) for s in S):
        raise UsageError("S must lie in (0, 4.3]")
    rows = []
    for s in S:
        d = core_data(round(float(s), 10))
        rows.append([float(s), d.chi, d.chi_prime, d.k1, d.k2])
    man = _manifest(args)
    sink = _Sink(args)
    sink.emit("core_table.csv", _csv(["S", "chi", "chi_prime", "k1", "k2"], rows, man))
    sink.finish(man)
    return EXIT_OK


def cmd_greens_probe(args):
    spec, domain = _domain(args)
    pts = _seeds(args)
    if pts is None:
        raise UsageError("greens-probe needs --seeds (source points)")
    out = []
    for x in pts:
        domain.check_source(x)
        nd = domain.neumann_self(x)
        item = {"source": x, "neumann": {"regular_value": nd.regular_value, "gradient": nd.gradient,
                                         "hessian": nd.hessian}}
        if args.mu is not None:
            hd = domain.helmholtz_self(complex(args.mu), x)
            item["helmholtz"] = {"mu": hd.parameter, "regular_value": hd.regular_value,
                                 "grad_regular": hd.grad_regular,
                                 "grad_source_of_grad": hd.grad_source_of_grad, "hessian": hd.hessian}
        out.append(item)
    man = _manifest(args, spec)
    sink = _Sink(args)
    sink.emit("greens_probe.json", dumps({"manifest": man, "sources": out}))
    sink.finish(man)
    return EXIT_OK


def _equilibrium(args, spec, domain):
    from .equilibrium import EquilibriumError, solve_equilibrium

    seeds = _seeds(args)
    n = len(seeds) if seeds is not None else args.n_spots
    params = _params(args, domain, n)
    cfg = solve_equilibrium(domain, params, _initial(domain, spec, n, seeds), tol=args.tol)
    if not cfg.converged:
        raise EquilibriumError(f"equilibrium Newton stalled at residual {cfg.residual:.3g}")
    return params, cfg


def cmd_equilibrium(args):
    spec, domain = _domain(args)
    params, cfg = _equilibrium(args, spec, domain)
    man = _manifest(args, spec, params)
    sink = _Sink(args)
    sink.emit("equilibrium.json", dumps(dict(cfg.to_dict(), manifest=man)))
    sink.finish(man)
    return EXIT_OK


def _root_dict(r, eps):
    d = r.to_dict()
    d["tau_unscaled"] = r.tau_hat / eps**2
    d["lambda_unscaled"] = r.lambda_im * eps**2
    return d


def cmd_threshold(args):
    from .hopf import HopfError, axis_subspace, find_roots

    spec, domain = _domain(args)
    params, cfg = _equilibrium(args, spec, domain)
    sub = None if args.axis is None else axis_subspace(cfg.n, "xy".index(args.axis))
    roots = find_roots(domain, cfg, params, subspace=sub)
    if not roots:
        raise HopfError("no Hopf root found")
    eps = params.epsilon
    best = roots[0]
    body = {"roots": [_root_dict(r, eps) for r in roots], "tau_star": best.tau_hat,
            "tau_star_unscaled": best.tau_hat / eps**2,
            "mode_star": _root_dict(best, eps)["mode"], "equilibrium": cfg.to_dict()}
    man = _manifest(args, spec, params)
    body["manifest"] = man
    sink = _Sink(args)
    sink.emit("threshold.json", dumps(body))
    sink.finish(man)
    return EXIT_OK


def cmd_sweep(args):
    import numpy as np

    from .equilibrium import SchnakenbergParams, SpotConfiguration, solve_equilibrium
    from .greens import Rectangle
    from .hopf import axis_subspace, find_roots

    if (args.rect_length is None) == (args.n_range is None):
        raise UsageError("give exactly one of --rect-length or --n-range")
    rows = []
    if args.rect_length is not None:
        rng = _range(args.rect_length)
        ells = np.linspace(rng[0], rng[1], args.steps) if isinstance(rng, tuple) else rng
        header = ["length", "tau_x", "omega_x", "lambda_x", "tau_y", "omega_y", "lambda_y"]
        spec = {"kind": "rectangle", "height": 1.0, "lengths": list(map(float, ells))}
        for ell in ells:
            D = Rectangle(float(ell), 1.0)
            p = _params(args, D, 1)
            cfg = SpotConfiguration(np.array([[ell / 2.0, 0.5]]), np.ones(1))
            cfg = solve_equilibrium(D, p, cfg, tol=args.tol)
            row = [float(ell)]
            for ax in (0, 1):
                r = find_roots(D, cfg, p, subspace=axis_subspace(1, ax))
                row += [r[0].tau_hat, r[0].omega_im, r[0].lambda_im] if r else [float("nan")] * 3
            rows.append(row)
        params = p
    else:
        spec, domain = _domain(args)
        rng = _range(args.n_range, integer=True)
        Ns = range(rng[0], rng[1] + 1) if isinstance(rng, tuple) else rng
        header = ["N", "tau_star", "omega_im", "lambda_im", "x_fraction", "residual"]
        params = None
        for N in Ns:
            params = _params(args, domain, N)
            cfg = solve_equilibrium(domain, params, _initial(domain, spec, N, None), tol=args.tol)
            r = find_roots(domain, cfg, params)
            if not r:
                rows.append([N] + [float("nan")] * 5)
                continue
            m = r[0].spot_modes()
            frac = float(np.sum(np.abs(m[:, 0]) ** 2) / np.sum(np.abs(m) ** 2))
            rows.append([N, r[0].tau_hat, r[0].omega_im, r[0].lambda_im, frac, cfg.residual])
    man = _manifest(args, spec, params)
    sink = _Sink(args)
    sink.emit("sweep.csv", _csv(header, rows, man))
    sink.finish(man)
    return EXIT_OK


def cmd_perturbed_disk(args):
    import numpy as np

    from .equilibrium import SchnakenbergParams, SpotConfiguration, solve_equilibrium
    from .hopf import find_roots
    from .perturbed_disk import PerturbationSpec, predict

    cos = _floats(args.fourier_cos)
    sin = _floats(args.fourier_sin) if args.fourier_sin else None
    if sin is not None and len(sin) != len(cos):
        raise UsageError("--fourier-cos and --fourier-sin need equal length")
    try:
        spec = PerturbationSpec(args.sigma, cos, sin)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    D = spec.to_domain()
    if args.feed is not None:
        raise UsageError("perturbed-disk takes --strength, not --feed")
    params = SchnakenbergParams.from_strength(args.eps, args.strength, 1, np.pi)
    res = predict(spec, args.strength, params)
    body = res.to_dict()
    body["sigma"] = args.sigma
    body["predicted_threshold"] = res.threshold(args.sigma)
    body["dominant_axis"] = res.dominant.axis
    if args.full:
        pf = SchnakenbergParams.from_strength(args.eps, args.strength, 1, D.area)
        cfg = solve_equilibrium(D, pf, SpotConfiguration(np.zeros((1, 2)), np.ones(1)), tol=args.tol)
        roots = find_roots(D, cfg, pf)
        body["full_pipeline"] = {"roots": [_root_dict(r, args.eps) for r in roots],
                                 "equilibrium": cfg.to_dict()}
    man = _manifest(args, D.describe(), params)
    body["manifest"] = man
    sink = _Sink(args)
    sink.emit("perturbed_disk.json", dumps(body))
    sink.finish(man)
    return EXIT_OK


def cmd_simulate(args):
    import numpy as np

    from .pde_sim import simulate

    spec, domain = _domain(args)
    params, cfg = _equilibrium(args, spec, domain)
    kick = _floats(args.kick)
    if len(kick) != 2:
        raise UsageError("--kick needs two components")
    tr = simulate(domain, params, args.tau_hat / params.epsilon**2, args.t_end, cfg,
                  h=args.h, dt_max=args.dt, kick_vector=kick, record_every=args.record_every)
    man = _manifest(args, spec, params)
    summary = dict(tr.to_dict(), tau_hat=args.tau_hat, manifest=man,
                   equilibrium=cfg.to_dict(), final_centers=tr.centers[-1])
    sink = _Sink(args)
    n = tr.centers.shape[1]
    header = ["t"] + [f"x{c}_{j}" for j in range(n) for c in (1, 2)]
    rows = [[t] + list(map(float, c.ravel())) for t, c in zip(tr.times, tr.centers)]
    sink.emit("trajectory.csv", _csv(header, rows, man), primary=False)
    if args.snapshots and sink.out is not None:
        st = tr.final
        np.savez(sink.out / "final_fields.npz", v=st.to_array(st.v), u=st.to_array(st.u),
                 origin=st.grid.origin, h=st.grid.h, time=st.time)
        sink.files.append("final_fields.npz")
    sink.emit("summary.json", dumps(summary))
    sink.finish(man)
    return EXIT_OK


def cmd_validate(args):
    from . import validation

    skip = set()
    if args.quick:
        skip.add(9)
    if args.only:
        keep = set(int(v) for v in _floats(args.only))
        skip |= set(range(1, 11)) - keep
    results = validation.run_all(skip=skip)
    for r in results:
        print(r.line(), flush=True)
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} checks passed")
    if args.out:
        sink = _Sink(args)
        man = _manifest(args)
        sink.emit("validate.json", dumps({"manifest": man, "results": [
            {"number": r.number, "name": r.name, "passed": r.passed, "detail": r.detail,
             "seconds": r.seconds} for r in results]}), primary=False)
        sink.finish(man)
    return EXIT_OK if n_pass == len(results) else EXIT_CHECKS_FAILED


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--domain", help="domain JSON file")
    common.add_argument("--eps", type=float, help="epsilon (default 0.01; 0.05 for simulate)")
    g = common.add_mutually_exclusive_group()
    g.add_argument("--feed", type=float, help="feed rate A")
    g.add_argument("--strength", "--S", dest="strength", type=float, default=4.0,
                   help="common spot strength S (default 4)")
    common.add_argument("--n-spots", type=_positive_int, default=1)
    common.add_argument("--out", help="output directory")
    common.add_argument("--seeds", help="JSON list of initial spot locations or probe points")
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("--threads", type=_positive_int, help="BLAS/OpenMP thread count")

    p = argparse.ArgumentParser(prog="spothopf", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("core-table", parents=[common], help="CSV of chi, chi', k1, k2 against S")
    s.add_argument("--S-min", type=float, default=0.5)
    s.add_argument("--S-max", type=float, default=4.3)
    s.add_argument("--count", type=_positive_int, default=20)
    s.add_argument("--S-values", help="comma list overriding the range")
    s.set_defaults(func=cmd_core_table)

    s = sub.add_parser("greens-probe", parents=[common], help="local Green's data at sources")
    s.add_argument("--mu", type=complex, help="Helmholtz parameter, e.g. 3j")
    s.set_defaults(func=cmd_greens_probe)

    s = sub.add_parser("equilibrium", parents=[common], help="N-spot equilibrium")
    s.set_defaults(func=cmd_equilibrium)

    s = sub.add_parser("threshold", parents=[common], help="Hopf roots and minimal threshold")
    s.add_argument("--axis", choices=["x", "y"], help="restrict to one motion component")
    s.set_defaults(func=cmd_threshold)

    s = sub.add_parser("sweep", parents=[common], help="thresholds against rectangle length or N")
    s.add_argument("--rect-length", help="a..b or list of lengths of an l x 1 rectangle")
    s.add_argument("--steps", type=_positive_int, default=9)
    s.add_argument("--n-range", help="a..b or list of spot counts in --domain")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("perturbed-disk", parents=[common], help="O(sigma) threshold shifts")
    s.add_argument("--sigma", type=float, required=True)
    s.add_argument("--fourier-cos", required=True, help="a_0,a_1,... of f")
    s.add_argument("--fourier-sin", help="b_0,b_1,... of f")
    s.add_argument("--full", action="store_true", help="also run the full pipeline")
    s.set_defaults(func=cmd_perturbed_disk)

    s = sub.add_parser("simulate", parents=[common], help="PDE run with spot tracking")
    s.add_argument("--tau-hat", type=float, required=True, help="scaled tau (tau = tau_hat / eps^2)")
    s.add_argument("--t-end", type=float, default=300.0)
    s.add_argument("--h", type=float, help="grid spacing (default eps/3)")
    s.add_argument("--dt", type=float, default=0.02)
    s.add_argument("--kick", default="1e-3,0", help="initial spot displacement")
    s.add_argument("--record-every", type=float, default=0.5)
    s.add_argument("--snapshots", action="store_true", help="save final fields (npz) to --out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("validate", parents=[common], help="run the acceptance checks")
    s.add_argument("--quick", action="store_true", help="skip the PDE check")
    s.add_argument("--only", help="comma list of check numbers")
    s.set_defaults(func=cmd_validate)
    return p


def _numerical_errors():
    import numpy as np

    from .core import CoreConvergenceError
    from .equilibrium import EquilibriumError
    from .greens import GreensError
    from .hopf import HopfError
    from .pde_sim import SimulationError, ThresholdError
    from .special import BesselDomainError
    return (CoreConvergenceError, EquilibriumError, GreensError, HopfError, SimulationError,
            ThresholdError, BesselDomainError, np.linalg.LinAlgError, FloatingPointError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    # parent-parser defaults are shared between subcommands, so resolve here
    if args.eps is None:
        args.eps = 0.05 if args.command == "simulate" else 0.01
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    numerical = _numerical_errors()
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except numerical as exc:
        diag = {"status": "numerical_failure", "command": args.command,
                "error": type(exc).__name__, "message": str(exc)}
        text = dumps(diag)
        if getattr(args, "out", None):
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "diagnostic.json").write_text(text)
        sys.stdout.write(text)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
