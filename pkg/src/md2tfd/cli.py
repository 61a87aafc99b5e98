"""Command line entry point and run orchestration.

    md2tfd bath --alpha 0.015 --omega-c 1.5 --beta 5 --tol 1e-4 --out bath.txt
    md2tfd run --config weak_hot.toml --out results/
    md2tfd run --preset t2_a0.02_wc1.5 --out results/
    md2tfd sweep --preset t2_a0.02_wc1.5 --M 10,15,18,20
    md2tfd oracle --config tiny.toml --out exact.traj
    md2tfd compare a.traj b.traj
    md2tfd spectrum run.traj --out spectrum.dat
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .config import ConfigError, OracleSpec, dump_config, load_config, parse_config

__all__ = ["classify_regime", "compare_trajectories", "ComparisonMetrics", "list_presets",
           "load_preset", "run", "main"]

log = logging.getLogger("md2tfd")

WORKERS_ENV = "MD2TFD_WORKERS"


def classify_regime(alpha, omega_c, T, alpha_c0=1.0):
    """weak / intermediate / strong against the temperature-corrected band
    [0.1, 1] * alpha_c0 / (1 + omega_c / T), boundaries inclusive."""
    if alpha <= 0 or omega_c <= 0 or T <= 0 or alpha_c0 <= 0:
        raise ValueError("alpha, omega_c, T and alpha_c0 must be positive")
    upper = alpha_c0 / (1.0 + omega_c / T)
    lower = 0.1 * upper
    if alpha < lower:
        return "weak"
    if alpha > upper:
        return "strong"
    return "intermediate"


@dataclass(frozen=True)
class ComparisonMetrics:
    max_abs: float
    rms: float
    first_crossing: float | None
    threshold: float
    t_start: float
    t_end: float


def compare_trajectories(a, b, threshold=1e-2):
    """sigma_z differences with b interpolated linearly onto a's grid."""
    lo = max(a.times[0], b.times[0])
    hi = min(a.times[-1], b.times[-1])
    if hi < lo:
        raise ValueError("trajectories cover disjoint time ranges")
    mask = (a.times >= lo - 1e-12) & (a.times <= hi + 1e-12)
    t = a.times[mask]
    diff = np.abs(a.sigma_z[mask] - np.interp(t, b.times, b.sigma_z))
    above = np.flatnonzero(diff > threshold)
    return ComparisonMetrics(float(diff.max()), float(np.sqrt(np.mean(diff ** 2))),
                             float(t[above[0]]) if above.size else None, threshold,
                             float(t[0]), float(t[-1]))


def list_presets():
    root = resources.files("md2tfd") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_preset(name):
    root = resources.files("md2tfd") / "presets"
    path = root / f"{name}.toml"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return parse_config(path.read_text(), source=f"preset:{name}")


def _write_columns(path, header, *cols):
    np.savetxt(path, np.column_stack(cols), fmt="%.17g", header=header)


def run(config, out_dir, with_oracle=False):
    """bath -> tfd -> dynamics (-> oracle). Returns (exit status, summary)."""
    from .dynamics import TrajectoryAborted, prepare_run, propagate
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{config.name}.toml").write_text(dump_config(config))
    t0 = time.perf_counter()
    bath_l, bath_r, h, state = prepare_run(config)
    t_bath = time.perf_counter() - t0
    meta = {"name": config.name, "seed": config.seed, "omega0_eV": config.omega0_eV,
            "baths": [{"n_modes": b.n_modes, "beta": b.beta,
                       "certification_error": b.certification_error} for b in (bath_l, bath_r)]}
    status = 0
    aborted = None
    try:
        traj = propagate(h, state, dt=config.dt, t_final=config.t_final,
                         output_stride=config.output_stride,
                         sigma2_stride=config.sigma2_stride, metadata=meta)
    except TrajectoryAborted as exc:
        traj, aborted, status = exc.trajectory, str(exc), 3
    t_dyn = time.perf_counter() - t0 - t_bath
    traj.save(out / f"{config.name}.traj")
    _write_columns(out / f"{config.name}_sigma_z.dat", "t sigma_z", traj.times, traj.sigma_z)
    fin = np.isfinite(traj.sigma2)
    _write_columns(out / f"{config.name}_sigma2.dat", "t sigma2", traj.times[fin], traj.sigma2[fin])
    max_s2 = traj.max_sigma2
    summary = {
        "name": config.name,
        "regime": classify_regime(0.5 * (config.alpha_left + config.alpha_right),
                                  0.5 * (config.omega_c_left + config.omega_c_right),
                                  config.T_mean, config.alpha_c0),
        "certification_error": max(bath_l.certification_error, bath_r.certification_error),
        "certification_error_left": bath_l.certification_error,
        "certification_error_right": bath_r.certification_error,
        "max_sigma2": max_s2,
        "converged": bool(aborted is None and max_s2 < 1e-2),
        "aborted": aborted,
        "M": config.M,
        "n_modes": [bath_l.n_modes, bath_r.n_modes],
        "omega0_eV": config.omega0_eV,
        "regularization_events": len(traj.metadata.get("regularization_events", [])),
        "timings": {"bath": t_bath, "dynamics": t_dyn},
    }
    if with_oracle or config.oracle is not None:
        from .oracle import FockConfig, exact_propagate
        spec = config.oracle or OracleSpec()
        t1 = time.perf_counter()
        fc = FockConfig.from_hamiltonian(h, spec.n_max, qubit_init=config.qubit_init,
                                         dt=config.dt, t_final=config.t_final,
                                         dim_cap=spec.dim_cap, certify_tol=spec.certify_tol)
        exact = exact_propagate(fc)
        exact.save(out / f"{config.name}.oracle.traj")
        cmp = compare_trajectories(traj, exact)
        summary["oracle"] = {"max_abs": cmp.max_abs, "rms": cmp.rms,
                             "certified": exact.metadata["certified"],
                             "n_max": exact.metadata["n_max"]}
        summary["timings"]["oracle"] = time.perf_counter() - t1
    (out / f"{config.name}.summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return status, summary


def _config_from(args):
    if getattr(args, "preset", None):
        cfg = load_preset(args.preset)
    elif getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        raise ConfigError("give --config FILE or --preset NAME")
    over = {}
    for key in ("M", "seed", "t_final", "dt"):
        v = getattr(args, key, None)
        if v is not None:
            over[key] = v
    return replace(cfg, **over) if over else cfg


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _cmd_bath(args):
    from .bath import SpectralDensity, discretize_id, discretize_log, save_bath
    sd = SpectralDensity(args.alpha, args.omega_c)
    wmax = args.omega_max_factor * args.omega_c
    if args.scheme == "id":
        bath = discretize_id(sd, args.beta, omega_max=wmax, horizon=args.horizon,
                             tolerance=args.tol, max_modes=args.modes or None)
    else:
        bath = discretize_log(sd, args.beta, omega_max=wmax, n_modes=args.modes or 60,
                              horizon=args.horizon)
    if args.out:
        save_bath(bath, args.out)
    print(f"{bath.n_modes} modes, certification error {bath.certification_error:.3e}")
    return 0


def _cmd_run(args):
    cfg = _config_from(args)
    status, summary = run(cfg, args.out, with_oracle=args.oracle)
    print(json.dumps({k: summary[k] for k in ("name", "regime", "certification_error",
                                              "max_sigma2", "converged")}))
    if status:
        print(f"aborted: {summary['aborted']}", file=sys.stderr)
    return status


def _cmd_sweep(args):
    from .dynamics import convergence_sweep
    cfg = _config_from(args)
    workers = args.workers or int(os.environ.get(WORKERS_ENV, "1"))
    report = convergence_sweep(cfg, _ints(args.M_list), _ints(args.N) if args.N else None,
                               tol_conv=args.tol_conv, workers=workers)
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_oracle(args):
    from .dynamics import prepare_run
    from .oracle import FockConfig, exact_propagate
    cfg = _config_from(args)
    spec = cfg.oracle or OracleSpec()
    _, _, h, _ = prepare_run(cfg)
    fc = FockConfig.from_hamiltonian(h, args.n_max or spec.n_max, qubit_init=cfg.qubit_init,
                                     dt=cfg.dt, t_final=cfg.t_final, dim_cap=spec.dim_cap,
                                     certify_tol=spec.certify_tol)
    traj = exact_propagate(fc)
    traj.save(args.out)
    print(json.dumps(traj.metadata))
    return 0 if traj.metadata["certified"] else 4


def _cmd_compare(args):
    from .dynamics import Trajectory
    m = compare_trajectories(Trajectory.load(args.a), Trajectory.load(args.b), args.threshold)
    print(json.dumps(asdict(m)))
    return 0


def _cmd_spectrum(args):
    from .ansatz import trajectory_spectrum
    from .dynamics import Trajectory
    spec = trajectory_spectrum(Trajectory.load(args.trajectory))
    if args.out:
        _write_columns(args.out, f"omega amplitude  (dt={spec.dt!r} n={spec.n_samples})",
                       spec.omega, spec.amplitude)
    k = int(np.argmax(spec.amplitude[1:])) + 1
    print(f"dominant frequency {spec.omega[k]:.6g} (amplitude {spec.amplitude[k]:.3e})")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="md2tfd", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bath", help="discretize one bath")
    b.add_argument("--alpha", type=float, required=True)
    b.add_argument("--omega-c", type=float, required=True)
    b.add_argument("--beta", type=float, required=True)
    b.add_argument("--tol", type=float, default=1e-4)
    b.add_argument("--scheme", choices=("id", "log"), default="id")
    b.add_argument("--modes", type=int, default=0)
    b.add_argument("--omega-max-factor", type=float, default=10.0)
    b.add_argument("--horizon", type=float, default=10.0)
    b.add_argument("--out")
    b.set_defaults(func=_cmd_bath)

    def add_cfg(sp, with_M=True):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--config")
        g.add_argument("--preset", help="one of: " + ", ".join(list_presets()))
        if with_M:
            sp.add_argument("--M", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--t-final", dest="t_final", type=float)
        sp.add_argument("--dt", type=float)

    r = sub.add_parser("run", help="propagate one configuration")
    add_cfg(r)
    r.add_argument("--out", default="results")
    r.add_argument("--oracle", action="store_true", help="also run the Fock oracle")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("sweep", help="two-stage convergence sweep")
    add_cfg(s, with_M=False)
    s.add_argument("--M", dest="M_list", required=True, help="comma separated, nondecreasing")
    s.add_argument("--N", help="bath mode counts, comma separated")
    s.add_argument("--tol-conv", type=float)
    s.add_argument("--workers", type=int, help=f"default from ${WORKERS_ENV} or 1")
    s.add_argument("--out")
    s.set_defaults(func=_cmd_sweep)

    o = sub.add_parser("oracle", help="exact Fock-space propagation")
    add_cfg(o)
    o.add_argument("--n-max", type=int)
    o.add_argument("--out", required=True)
    o.set_defaults(func=_cmd_oracle)

    c = sub.add_parser("compare", help="sigma_z metrics between two trajectory files")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--threshold", type=float, default=1e-2)
    c.set_defaults(func=_cmd_compare)

    f = sub.add_parser("spectrum", help="Fourier amplitude of a sigma_z series")
    f.add_argument("trajectory")
    f.add_argument("--out")
    f.set_defaults(func=_cmd_spectrum)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
