"""Command-line entry point.

    compass-metrology engineer --config drives.json
    compass-metrology generate --approach 1 --alpha 3
    compass-metrology scan --alpha 3 --phi 1.0472 --s-max 0.6 --steps 121
    compass-metrology wigner --state cat --alpha 3 --M 4 --out cat4
    compass-metrology estimate --alpha 3 --phi 1.0472 --s-true 0.15 --R 1000

Every command takes --config (JSON of option values), --seed, --out and
--format {csv,json}; command-line flags override the config file.
--figure additionally renders a PNG next to the numeric output.
Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import circuits, ham_engineering as he, metrology as mt, wigner as wg
from . import fockspace as fs, hybrid as hy
from .circuits import Approach, CircuitVerificationError
from .fockspace import TruncationError

SCHEMA_VERSION = 1
EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


def _schema(name: str) -> str:
    return f"compass-metrology/{name}/{SCHEMA_VERSION}"


# ---------------------------------------------------------------- output helpers

def _dump_json(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _dump_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _sibling(out: str | None, suffix: str, default: str) -> Path:
    """Path next to ``out`` with its extension replaced by ``suffix``."""
    base = Path(out) if out else Path(default)
    return base.with_name(base.stem + suffix)


def _figure_path(args, default: str) -> Path | None:
    return _sibling(args.out, ".png", default) if args.figure else None


def _complex_list(v: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in v]


# ---------------------------------------------------------------- engineer

DEFAULT_OMEGA_L = 9.5e3


def load_drive_spec(data: dict) -> tuple[int, list[float], dict[int, complex]]:
    if not isinstance(data, dict) or "drives" not in data or "targets" not in data:
        raise UsageError('drive spec needs "drives" and "targets"')
    k = int(data.get("k", 0))
    drives = data["drives"]
    if not drives:
        raise UsageError("drive list is empty")
    etas = []
    for d in drives:
        if "k" in d and int(d["k"]) != k:
            raise UsageError("all drives must share the sideband index k")
        etas.append(float(d["eta"]))
    targets = {int(p): complex(v) if not isinstance(v, dict) else complex(v["re"], v.get("im", 0.0))
               for p, v in data["targets"].items()}
    if len(targets) != len(etas):
        raise UsageError(f"{len(etas)} drive(s) cannot fix {len(targets)} target coefficient(s)")
    return k, etas, targets


def _real_or_pair(z: complex) -> dict[str, float]:
    return {"re": float(z.real), "im": float(z.imag)}


def cmd_engineer(args) -> int:
    cfg = args.config_data
    if not cfg:
        raise UsageError("engineer needs --config pointing at a drive-spec JSON")
    k, etas, targets = load_drive_spec(cfg)
    pmax = int(args.pmax if args.pmax is not None else cfg.get("pmax", max(max(targets), 2) + 1))
    omega_L = float(args.omega_L if args.omega_L is not None else cfg.get("omega_L", DEFAULT_OMEGA_L))
    phi2 = float(args.phi2 if args.phi2 is not None else cfg.get("phi2", math.pi / 4))
    sol = he.solve_rabi(etas, k, targets)
    drives = [he.RamanDrive(eta, float(np.real(w)), k) for eta, w in zip(etas, np.atleast_1d(sol.omega_rel))]
    coeffs = he.engineered_A(drives, pmax, omega_L)
    report: dict[str, Any] = {
        "schema": _schema("engineer"),
        "k": k,
        "drives": [{"eta": d.eta, "omega_rel": d.omega_rel} for d in drives],
        "condition_number": sol.cond,
        "residual": sol.residual,
        "A": [dict(p=p, **_real_or_pair(complex(a))) for p, a in enumerate(coeffs.A)],
        "truncation_bound": coeffs.truncation_bound,
    }
    if abs(complex(coeffs.A[2]).real) > 0:
        t = he.pulse_timing(coeffs, phi2)
        report["timing"] = {
            "omega_L": omega_L,
            "phi2_target": phi2,
            "t_star": {"rad_per_s": t.t_star, "cycles_per_s": t.t_star_cyclic},
            "phi0": t.phi0,
            "phi1": t.phi1,
            "phi2": t.phi2,
        }
    if args.format == "csv":
        rows = [(p, float(complex(a).real), float(complex(a).imag)) for p, a in enumerate(coeffs.A)]
        _emit(_dump_csv(["p", "A_re", "A_im"], rows), args.out)
    else:
        _emit(_dump_json(report), args.out)
    fig = _figure_path(args, "engineer")
    if fig:
        from .plotting import plot_engineered

        n = np.arange(0, 21)
        exact = np.array([sum(d.omega_rel * he.f_k(int(m), d.eta, k) for d in drives) for m in n])
        ph = (1j) ** k
        plot_engineered(n, (exact / ph).real, (coeffs.evaluate(n) / ph).real, fig)
    return EXIT_OK


# ---------------------------------------------------------------- generate

def _build_spec(args) -> circuits.CircuitSpec:
    if args.alpha <= 0:
        raise UsageError("--alpha must be positive")
    return circuits.build(args.approach, args.alpha, nu=args.nu, phi0=args.phi0, phi1=args.phi1, align=args.align)


def cmd_generate(args) -> int:
    spec = _build_spec(args)
    state = spec.generate()
    back = spec.run(state, spec.reversal())
    pg, _ = hy.measure_populations(back)
    if args.format == "csv":
        g, e = state.branch_g.amplitudes, state.branch_e.amplitudes
        rows = [(n, g[n].real, g[n].imag, e[n].real, e[n].imag) for n in range(state.dim)]
        _emit(_dump_csv(["n", "g_re", "g_im", "e_re", "e_im"], rows), args.out)
    else:
        report = {
            "schema": _schema("generate"),
            "circuit": json.loads(spec.to_json()),
            "dim": state.dim,
            "target_fidelity": circuits.target_fidelity(spec),
            "reverse_ground_population": pg,
            "state": {"g": _complex_list(state.branch_g.amplitudes), "e": _complex_list(state.branch_e.amplitudes)},
        }
        _emit(_dump_json(report), args.out)
    fig = _figure_path(args, "generate")
    if fig:
        from .plotting import plot_wigner

        branch = state.branch_e if state.branch_e.norm() > 1e-12 else state.branch_g
        if spec.approach is Approach.KERR_BASED:
            branch = state.x_branches()[0]
        o = branch.scaled(1 / branch.norm())
        plot_wigner(wg.wigner(o, alpha_mag=args.alpha), fig)
    return EXIT_OK


# ---------------------------------------------------------------- scan

def scan_table(approach, alpha_mag: float, varphi: float, s_values: np.ndarray, phi1: float = 0.0) -> dict[str, np.ndarray]:
    spec = circuits.build(approach, alpha_mag, phi1=phi1)
    p = mt.PerturbationParams(0.0, varphi, alpha_mag)
    pol = fs.TruncationPolicy(alpha_mag + float(np.max(s_values, initial=0.0)))
    cat = fs.make_cat(alpha_mag, 4, policy=pol)
    f_sim = [fs.fidelity(cat, fs.displace(cat, circuits.perturbation_amplitude(s, varphi, alpha_mag))) for s in s_values]
    return {
        "s": s_values,
        "f_exact": np.array([mt.fidelity_exact(p.at(s)) for s in s_values]),
        "f_approx": np.array([mt.fidelity_approx(p.at(s)) for s in s_values]),
        "P_g_closed": np.array([mt.pg_closed(p.at(s), approach, phi1) for s in s_values]),
        "P_g_sim": circuits.pg_scan(spec, s_values, varphi),
        "f_sim": np.array(f_sim),
    }


def _table_csv(table: dict[str, np.ndarray]) -> str:
    names = list(table)
    return _dump_csv(names, zip(*(table[n] for n in names)))


def cmd_scan(args) -> int:
    if args.steps is None or args.steps < 1:
        raise UsageError("--steps must be at least 1")
    if args.alpha <= 0:
        raise UsageError("--alpha must be positive")
    s_max = mt.quasi_orthogonal_displacement(args.phi, args.alpha) if args.s_max is None else args.s_max
    if args.s_min < 0 or s_max < args.s_min:
        raise UsageError("need 0 <= s-min <= s-max")
    s = np.linspace(args.s_min, s_max, args.steps)
    table = scan_table(args.approach, args.alpha, args.phi, s, args.phi1)
    if args.format == "json":
        _emit(_dump_json({
            "schema": _schema("scan"),
            "approach": Approach.parse(args.approach).value,
            "alpha_mag": args.alpha,
            "varphi": args.phi,
            "phi1": args.phi1,
            "s_o": mt.quasi_orthogonal_displacement(args.phi, args.alpha),
            "columns": {k: v.tolist() for k, v in table.items()},
        }), args.out)
    else:
        _emit(_table_csv(table), args.out)
    fig = _figure_path(args, "scan")
    if fig:
        from .plotting import plot_scan

        plot_scan(table, fig, s_o=mt.quasi_orthogonal_displacement(args.phi, args.alpha))
    return EXIT_OK


# ---------------------------------------------------------------- wigner

def _wigner_state(args) -> tuple[fs.OscState, dict]:
    if args.alpha <= 0:
        raise UsageError("--alpha must be positive")
    reach = args.alpha + (args.compare_s or 0.0) + (args.displace_s or 0.0)
    pol = fs.TruncationPolicy(reach)
    if args.state == "cat":
        gams = None if args.gammas is None else [float(g) for g in args.gammas.split(",")]
        psi = fs.make_cat(args.alpha, args.M, gammas=gams, policy=pol)
        desc = {"kind": "cat", "alpha": args.alpha, "M": args.M, "gammas": gams}
    elif args.state == "coherent":
        psi = fs.coherent(args.alpha, pol)
        desc = {"kind": "coherent", "alpha": args.alpha}
    else:
        spec = _build_spec(args)
        st = spec.generate()
        branches = {"g": st.branch_g, "e": st.branch_e, "up": st.x_branches()[0], "down": st.x_branches()[1]}
        psi = branches[args.branch]
        if psi.norm() < 1e-12:
            raise UsageError(f"branch {args.branch!r} is empty for this circuit")
        psi = psi.scaled(1 / psi.norm())
        if psi.dim < pol.dim:
            amps = np.zeros(pol.dim, dtype=complex)
            amps[: psi.dim] = psi.amplitudes
            psi = fs.OscState(amps, psi.tail_tol)
        desc = {"kind": "circuit", "approach": spec.approach.value, "alpha": args.alpha, "branch": args.branch}
    if args.displace_s:
        psi = fs.displace(psi, circuits.perturbation_amplitude(args.displace_s, args.displace_phi, args.alpha))
        desc["displacement"] = {"s": args.displace_s, "varphi": args.displace_phi}
    return psi, desc


def cmd_wigner(args) -> int:
    if args.resolution < 2:
        raise UsageError("--resolution must be at least 2")
    psi, desc = _wigner_state(args)
    L = args.extent if args.extent is not None else args.alpha + wg.DEFAULT_MARGIN
    w = wg.wigner(psi, (-L, L), (-L, L), args.resolution)
    stem = Path(args.out) if args.out else Path("wigner")
    extra = None
    if args.compare_s is not None:
        other = fs.displace(psi, circuits.perturbation_amplitude(args.compare_s, args.compare_phi, args.alpha))
        w2 = wg.wigner(other, w.x_range, w.y_range, w.resolution)
        extra = (w2, {"s": args.compare_s, "varphi": args.compare_phi,
                      "overlap_wigner": wg.overlap_from_wigner(w, w2), "overlap_fock": fs.fidelity(psi, other)})
        desc["comparison"] = extra[1]
    wg.save_grid(w, stem, desc)
    if args.figure:
        from .plotting import plot_product, plot_wigner

        plot_wigner(w, stem.with_suffix(".png"))
        if extra:
            plot_product(w, extra[0], stem.with_name(stem.stem + "_product.png"))
    return EXIT_OK


# ---------------------------------------------------------------- estimate

def cmd_estimate(args) -> int:
    if args.R is None or args.R < 1:
        raise UsageError("--R must be at least 1")
    if args.replicas < 1:
        raise UsageError("--replicas must be at least 1")
    if args.alpha <= 0:
        raise UsageError("--alpha must be positive")
    if args.s_true is None or args.s_true < 0:
        raise UsageError("--s-true must be non-negative")
    p = mt.PerturbationParams(args.s_true, args.phi, args.alpha)
    resp = mt.response_model(args.approach, args.alpha, args.phi, args.phi1)
    bound = resp.effective_bound(args.model)
    if args.s_true > bound:
        raise NumericalFailure(
            f"s_true={args.s_true} lies beyond the monotone inversion bound {bound:.6f}; P_g cannot be inverted there"
        )
    rep = mt.run_estimation(args.s_true, p, args.approach, args.R, args.replicas, args.seed, args.phi1, args.model)
    if args.format == "csv":
        rows = [(i, int(r), s) for i, (r, s) in enumerate(zip(rep.counts, rep.estimates))]
        _emit(_dump_csv(["replica", "r", "s_hat"], rows), args.out)
    else:
        out = {"schema": _schema("estimate"), "model": args.model, "phi1": args.phi1, **rep.summary()}
        _emit(_dump_json(out), args.out)
    s = np.linspace(0.0, resp.s_o, args.scan_steps)
    rows = []
    for x, sim in zip(s, circuits.pg_scan(resp.spec, s, args.phi)):
        try:
            d = mt.analytic_uncertainty(float(x), p, args.approach, args.R, args.phi1)
        except mt.DivergentUncertaintyError:
            d = math.inf
        rows.append((x, mt.pg_closed(p.at(float(x)), args.approach, args.phi1), sim, d))
    scan_path = _sibling(args.out, "_scan.csv", "estimate")
    scan_path.write_text(_dump_csv(["s", "P_g_closed", "P_g_sim", "delta_analytic"], rows))
    fig = _figure_path(args, "estimate")
    if fig and args.replicas > 1:
        from .plotting import plot_estimates

        plot_estimates(rep.estimates, args.s_true, rep.delta_analytic, fig)
    return EXIT_OK


# ---------------------------------------------------------------- parser

COMMANDS = {
    "engineer": cmd_engineer,
    "generate": cmd_generate,
    "scan": cmd_scan,
    "wigner": cmd_wigner,
    "estimate": cmd_estimate,
}


def _common(p: argparse.ArgumentParser, fmt: str) -> None:
    p.add_argument("--config", help="JSON file of option values (drive spec for engineer)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"), default=fmt)
    p.add_argument("--figure", action="store_true", help="also write a PNG next to the output")


def _circuit_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--approach", default="1", help="1/gate or 2/kerr")
    p.add_argument("--alpha", type=float, default=3.0, help="|alpha|")
    p.add_argument("--nu", type=float, default=0.0)
    p.add_argument("--phi0", type=float, default=0.0)
    p.add_argument("--phi1", type=float, default=0.0)
    p.add_argument("--align", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="compass-metrology", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = {}

    p = parser.subcommands["engineer"] = sub.add_parser("engineer", help="solve relative Rabi frequencies for target coefficients")
    _common(p, "json")
    p.add_argument("--pmax", type=int)
    p.add_argument("--omega-L", dest="omega_L", type=float, help="|Omega_L| in s^-1")
    p.add_argument("--phi2", type=float, help="target n^2 phase (default pi/4)")

    p = parser.subcommands["generate"] = sub.add_parser("generate", help="build a compass-state circuit and its output state")
    _common(p, "json")
    _circuit_opts(p)

    p = parser.subcommands["scan"] = sub.add_parser("scan", help="f(s) and P_g(s) tables")
    _common(p, "csv")
    _circuit_opts(p)
    p.add_argument("--phi", type=float, default=math.pi / 3, help="perturbation direction varphi")
    p.add_argument("--s-min", dest="s_min", type=float, default=0.0)
    p.add_argument("--s-max", dest="s_max", type=float, help="default s_o")
    p.add_argument("--steps", type=int, default=121, help="number of s points")

    p = parser.subcommands["wigner"] = sub.add_parser("wigner", help="Wigner grid as CSV matrix plus JSON header")
    _common(p, "csv")
    _circuit_opts(p)
    p.add_argument("--state", choices=("cat", "coherent", "circuit"), default="cat")
    p.add_argument("--M", type=int, default=4)
    p.add_argument("--gammas", help="comma-separated phases gamma_k")
    p.add_argument("--branch", choices=("g", "e", "up", "down"), default="e")
    p.add_argument("--displace-s", dest="displace_s", type=float)
    p.add_argument("--displace-phi", dest="displace_phi", type=float, default=0.0)
    p.add_argument("--compare-s", dest="compare_s", type=float, help="also grid the copy displaced by s")
    p.add_argument("--compare-phi", dest="compare_phi", type=float, default=math.pi / 3)
    p.add_argument("--extent", type=float, help="half-width of the square grid")
    p.add_argument("--resolution", type=int, default=wg.DEFAULT_RESOLUTION)

    p = parser.subcommands["estimate"] = sub.add_parser("estimate", help="Monte Carlo estimation of s")
    _common(p, "json")
    _circuit_opts(p)
    p.add_argument("--phi", type=float, default=math.pi / 3)
    p.add_argument("--s-true", dest="s_true", type=float, default=0.15)
    p.add_argument("--R", type=int, default=1000)
    p.add_argument("--replicas", type=int, default=2000)
    p.add_argument("--model", choices=("simulated", "closed"), default="simulated")
    p.add_argument("--scan-steps", dest="scan_steps", type=int, default=51)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str] | None) -> argparse.Namespace:
    args = parser.parse_args(argv)
    args.config_data = {}
    if args.config:
        try:
            args.config_data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if args.command != "engineer":
            if not isinstance(args.config_data, dict):
                raise UsageError("config must be a JSON object")
            sub = parser.subcommands[args.command]
            known = {a.dest for a in sub._actions}
            unknown = set(args.config_data) - known
            if unknown:
                raise UsageError(f"unknown config keys: {sorted(unknown)}")
            sub.set_defaults(**args.config_data)
            args = parser.parse_args(argv)
            args.config_data = {}
    return args


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except (he.SingularSystemError, TruncationError, CircuitVerificationError, NumericalFailure,
            mt.DivergentUncertaintyError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, KeyError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
