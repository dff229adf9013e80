"""Command line entry point: ``elax <kind> --config <path> [--out <dir>] [--seed <u64>]``.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical blow-up
or solver failure, 4 degenerate input.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import euler2d, euler3d, laxlab, lyapunov, spectrum
from .config import KINDS, load_config
from .errors import BlowUpError, ConfigurationError, DegenerateInputError, ElaxError, NumericalError
from .euler2d import NamedInitialCondition
from .io import write_csv, write_manifest, write_snapshot
from .spectral import FourierField, GridSpec

NAN = float("nan")


# -- inputs built from the config ----------------------------------------------

def _initial_condition(cfg):
    ini = cfg.initial
    return NamedInitialCondition(ini["name"], amplitude=ini["amplitude"], seed=cfg.seed, decay=ini["decay"])


def _omega2d(cfg):
    return euler2d.initial_vorticity(_initial_condition(cfg), GridSpec(2, cfg.n))


def _random_phi(grid, seed, components):
    """Smooth complex field from the ``(seed, 1)`` stream of numpy's default generator."""
    rng = np.random.default_rng([seed, 1])
    shape = (components,) + grid.shape
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    coeffs *= np.exp(-grid.k_squared() / 16.0) * grid.dealias_mask()
    return FourierField(grid, coeffs, real=False)


def build_phi0(cfg, omega):
    """Auxiliary initial field from ``[lax] phi0``.

    ``mode:k1,k2[,k3]`` is a plane wave (times ``direction`` for the vector
    pair), ``omega^p`` is a power of the initial vorticity (2D), ``random``
    is a seeded smooth complex field.
    """
    grid = omega.grid
    choice = cfg.lax["phi0"].replace(" ", "")
    vector = grid.dim == 3 and cfg.lax["pair"] == "childress"
    if choice == "random":
        return _random_phi(grid, cfg.seed, 3 if vector else 1)
    if choice.startswith("mode:"):
        try:
            k = tuple(int(v) for v in choice[5:].split(","))
        except ValueError:
            raise ConfigurationError(f"phi0: cannot parse wavevector in {choice!r}") from None
        if len(k) != grid.dim:
            raise ConfigurationError(f"phi0: wavevector needs {grid.dim} components")
        phi = FourierField.single_mode(grid, k)
        if vector:
            d = np.asarray(cfg.lax["direction"], dtype=float)
            return FourierField(grid, d[:, None, None, None] * phi.coeffs, real=False)
        return phi
    if choice.startswith("omega^") and grid.dim == 2:
        try:
            p = int(choice[6:])
        except ValueError:
            raise ConfigurationError(f"phi0: cannot parse exponent in {choice!r}") from None
        if p < 1:
            raise ConfigurationError("phi0: exponent must be >= 1")
        return FourierField.from_physical(grid, omega.physical().real ** p, real=True)
    raise ConfigurationError(f"phi0: unsupported value {choice!r} (mode:..., omega^p or random)")


PUSHFORWARDS = {"identity": lambda w: w, "square": lambda w: w**2, "cube": lambda w: w**3, "constant": lambda w: np.ones_like(w)}


def _snapshot_due(t, last, every):
    if every <= 0:
        return False
    slot = int(np.floor(t / every + 1e-9))
    return slot > last


# -- experiments ------------------------------------------------------------------

def _simulate(cfg, out, dim):
    files = []
    ic = _initial_condition(cfg)
    if dim == 2:
        result = euler2d.run_simulation2d(ic, cfg.n, cfg.dt, cfg.t_end, output_every=cfg.output_every or None)
        header = ["t", "energy", "enstrophy"]
    else:
        result = euler3d.run_simulation3d(ic, cfg.n, cfg.dt, cfg.t_end, output_every=cfg.output_every or None)
        header = ["t", "energy", "helicity", "div_u", "div_omega"]
    write_csv(out / "series.csv", header, ([r[h] for h in header] for r in result.records))
    files.append("series.csv")
    last = -1
    for i, st in enumerate(result.states):
        first_or_last = i == 0 or i == len(result.states) - 1
        if first_or_last or _snapshot_due(st.t, last, cfg.snapshot_every):
            name = f"snapshot_{len([f for f in files if f.startswith('snapshot_')]):05d}.elax1"
            write_snapshot(out / name, st.omega, st.t)
            files.append(name)
            if cfg.snapshot_every > 0:
                last = int(np.floor(st.t / cfg.snapshot_every + 1e-9))
    return files


def _observer_rows(records, sobolev, expansion=NAN):
    cols = ["t", "r_commutation"] + [f"I_s{s:g}" for s in sobolev] + ["norm_phi", "residual_expansion"]
    rows = ([r.get(c, expansion) for c in cols] for r in records)
    return cols, rows


def _laxcheck(cfg, out, dim):
    files = []
    ic = _initial_condition(cfg)
    every = cfg.output_every or None
    if dim == 2:
        state = euler2d.FlowState2D.from_vorticity(euler2d.initial_vorticity(ic, GridSpec(2, cfg.n)))
        phi0 = build_phi0(cfg, state.omega)
        res = laxlab.commutation_check_2d(state, phi0, cfg.dt, cfg.t_end, sobolev=cfg.sobolev, output_every=every)
    else:
        state = euler3d.FlowState3D.from_vorticity(euler3d.initial_vorticity3d(ic, GridSpec(3, cfg.n)))
        phi0 = build_phi0(cfg, state.omega)
        res = laxlab.commutation_check_3d(
            state, phi0, cfg.dt, cfg.t_end, pair=cfg.lax["pair"], sobolev=cfg.sobolev, output_every=every
        )
    cols, rows = _observer_rows(res.records, cfg.sobolev)
    write_csv(out / "commutation.csv", cols, rows)
    files.append("commutation.csv")

    names = [p.strip() for p in cfg.lax["pushforward"].split(",") if p.strip() and p.strip() != "none"]
    if names:
        if dim != 2:
            raise ConfigurationError("pushforward checks are available for laxcheck2d only")
        unknown = [p for p in names if p not in PUSHFORWARDS]
        if unknown:
            raise ConfigurationError(f"unknown pushforward function(s) {unknown}; expected {sorted(PUSHFORWARDS)}")
        rows = []
        for name in names:
            push = laxlab.pushforward_check(state, phi0, PUSHFORWARDS[name], cfg.dt, cfg.t_end, output_every=every)
            rows.extend([name, r["t"], r["residual"]] for r in push.records)
        write_csv(out / "pushforward.csv", ["f", "t", "residual"], rows)
        files.append("pushforward.csv")
    return files


def _operator(cfg):
    sp_cfg = cfg.spectrum
    omega = _omega2d(cfg)
    op = spectrum.assemble_L2d(omega, sp_cfg["m"], sector=sp_cfg["sector"], name=cfg.initial["name"])
    if sp_cfg["s"]:
        op = spectrum.weighted_similarity(op, sp_cfg["s"])
    return op


def _spectrum(cfg, out):
    op = _operator(cfg)
    rep = spectrum.eigen_spectrum(op, band=tuple(cfg.spectrum["band"]), cap=cfg.caps["dense"])
    vals = rep.eigenvalues[np.lexsort((rep.eigenvalues.real, rep.eigenvalues.imag))]
    write_csv(out / "eigenvalues.csv", ["re", "im"], ([v.real, v.imag] for v in vals))
    summary = [
        ["dimension", op.size],
        ["s", float(op.s)],
        ["max_abs_real", rep.max_abs_real],
        ["coverage_gap", rep.coverage_gap],
        ["skew_hermitian_defect", rep.skew_defect],
        ["numerical_abscissa", spectrum.numerical_abscissa(op)],
    ]
    write_csv(out / "summary.csv", ["quantity", "value"], summary)
    return ["eigenvalues.csv", "summary.csv"]


def _pseudospec(cfg, out):
    op = _operator(cfg)
    ps = cfg.pseudospec
    rep = spectrum.pseudospectrum(op, tuple(ps["rectangle"]), ps["resolution"], tuple(ps["eps"]))
    rows = ([x, y, rep.sigma[j, i]] for j, y in enumerate(rep.im) for i, x in enumerate(rep.re))
    write_csv(out / "pseudospectrum.csv", ["re", "im", "sigma_min"], rows)
    abs_rows = []
    for eps in ps["eps"]:
        a = spectrum.pseudospectral_abscissa(op, eps, cap=cfg.caps["dense"])
        abs_rows.append([eps, a.value, a.point.real, a.point.imag, a.sigma_at_point, rep.grid_abscissa[eps]])
    write_csv(out / "abscissa.csv", ["eps", "abscissa", "re_point", "im_point", "sigma_at_point", "grid_abscissa"], abs_rows)
    return ["pseudospectrum.csv", "abscissa.csv"]


def _lyapunov(cfg, out):
    omega = _omega2d(cfg)
    ly = cfg.lyapunov
    report = lyapunov.stagnation_analysis(omega)
    write_csv(
        out / "stagnation.csv",
        ["x", "y", "kind", "re_1", "im_1", "re_2", "im_2"],
        (
            [p.position[0], p.position[1], p.kind, p.eigenvalues[0].real, p.eigenvalues[0].imag, p.eigenvalues[1].real, p.eigenvalues[1].imag]
            for p in sorted(report.stagnation_points, key=lambda p: tuple(np.round(p.position, 12)))
        ),
    )
    if ly["starts"] == "saddles":
        starts = [p.position for p in report.saddles()]
        if not starts:
            raise DegenerateInputError("no saddle stagnation points; give explicit [lyapunov] starts")
    else:
        starts = ly["starts"]
    trajs = lyapunov.lyapunov_qr(
        omega, np.array(starts), ly["horizon"], renorm_interval=ly["renorm"], dt=cfg.dt, transient=ly["transient"]
    )
    rows = ([i, h[0], h[1], h[2]] for i, tr in enumerate(trajs) for h in tr.history)
    write_csv(out / "exponents.csv", ["start", "t", "lambda_1", "lambda_2"], rows)
    for tr in trajs:
        for w in tr.warnings:
            print(f"warning: start {tr.x0.tolist()}: {w}", file=sys.stderr)
    return ["stagnation.csv", "exponents.csv"]


def _expand(cfg, out):
    omega = _omega2d(cfg)
    ex = cfg.expand
    probes = laxlab.eigen_probes(omega, ex["m"], sector=ex["sector"])
    state = euler2d.FlowState2D.from_vorticity(omega)
    rep = laxlab.expand_vorticity(state, probes, cfg.dt, cfg.t_end, sector=ex["sector"], output_every=cfg.output_every or None)
    write_csv(out / "coefficients.csv", ["j", "re", "im"], ([j, a.real, a.imag] for j, a in enumerate(rep.coefficients)))
    write_csv(
        out / "residuals.csv",
        ["t", "residual_expansion", "coefficient_drift"],
        zip(rep.times, rep.residuals, rep.coefficient_drift),
    )
    write_csv(out / "basis.csv", ["quantity", "value"], [["size", len(probes)], ["gram_condition", rep.gram_condition]])
    return ["coefficients.csv", "residuals.csv", "basis.csv"]


def run_experiment(cfg, out_dir=None):
    """Run one configured experiment, write its artifacts and manifest; returns the output path."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind = cfg.kind
    if kind in ("simulate2d", "simulate3d"):
        files = _simulate(cfg, out, 2 if kind == "simulate2d" else 3)
    elif kind in ("laxcheck2d", "laxcheck3d"):
        files = _laxcheck(cfg, out, 2 if kind == "laxcheck2d" else 3)
    elif kind == "spectrum":
        files = _spectrum(cfg, out)
    elif kind == "pseudospec":
        files = _pseudospec(cfg, out)
    elif kind == "lyapunov":
        files = _lyapunov(cfg, out)
    else:
        files = _expand(cfg, out)
    write_manifest(out, kind, files)
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="elax", description="Lax-pair experiments for the incompressible Euler equations.")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--config", required=True, type=Path, help="key=value configuration file")
    parser.add_argument("--out", type=Path, default=None, help="output directory (overrides output_dir)")
    parser.add_argument("--seed", type=int, default=None, help="random seed (overrides seed)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, kind=args.kind)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigurationError("--seed must be an unsigned 64-bit integer")
            cfg.seed = args.seed
        out = run_experiment(cfg, args.out)
    except ConfigurationError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return exc.exit_code
    except (BlowUpError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return exc.exit_code
    except DegenerateInputError as exc:
        print(f"degenerate input: {exc}", file=sys.stderr)
        return exc.exit_code
    except ElaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
