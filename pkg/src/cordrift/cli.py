"""Command-line front end: simulate, reconstruct, sweep-sigma, metrics, bench.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O error.
Every CSV this tool writes starts with comment lines echoing the exact
flags, so runs are reproducible from the file alone.
"""

import argparse
import os
import sys
import time

import numpy as np

from . import io as cio
from .baselines import AlternatingConfig, alternating_reproject, mirror_align
from .geometry import (DriftModel, Sinogram, build_geometry, make_single_drift,
                       make_walk_drift)
from .metrics import SsimConstants, rel_misfit, ssim
from .noise import NoiseSpec, add_noise
from .objective import (ExplicitProblem, ImplicitProblem, L2Problem,
                        StandardProblem, TVProblem)
from .phantoms import make_disk, make_shepp_logan
from .projector import build_system_matrix, forward, simulate_shifted
from .shift import align_sinogram, default_sigma, drift_shifts, shift_amount
from .solver import SolverConfig, tn_minimize


def _apply_thread_cap():
    cap = os.environ.get("TOMO_THREADS")
    if cap and cap != "0":
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def _flag_echo(args):
    items = [f"{k}={v}" for k, v in sorted(vars(args).items()) if k != "func"]
    return "cordrift " + " ".join(items)


def _write_csv(path, header_cols, rows, comments):
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(",".join(header_cols) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args):
    if args.phantom == "disk":
        truth = make_disk(args.n, args.disk_radius)
    elif args.phantom == "shepp-logan":
        truth = make_shepp_logan(args.n)
    else:
        if not args.phantom_file:
            raise SystemExit2("--phantom file requires --phantom-file")
        truth = cio.read_image(args.phantom_file)
        if truth.n != args.n:
            raise SystemExit2(
                f"--n {args.n} does not match phantom file grid {truth.n}"
            )
    geom = build_geometry(args.n, args.angles)
    if args.drift == "none":
        drift = DriftModel.none()
    elif args.drift == "single":
        drift = make_single_drift(args.n, args.drift_scale, args.seed)
    else:
        drift = make_walk_drift(args.n, args.angles, args.drift_scale, args.seed)

    measured = simulate_shifted(geom, truth, drift, oversample=args.oversample)
    if args.noise > 0:
        measured = add_noise(measured, NoiseSpec(level=args.noise, seed=args.noise_seed))

    os.makedirs(args.out, exist_ok=True)
    cio.write_image(os.path.join(args.out, "truth.cti"), truth)
    cio.write_drift(os.path.join(args.out, "drift.ctd"), drift)
    cio.write_sinogram(os.path.join(args.out, "measured.cts"), measured)
    print(f"wrote truth.cti drift.ctd measured.cts to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# reconstruct
# ---------------------------------------------------------------------------


def _solve(problem, x0, cfg, log_path, echo, truth=None):
    n = problem.geom.n if hasattr(problem, "geom") else None
    consts = None
    if truth is not None:
        consts = SsimConstants.from_range(truth.values.max() - truth.values.min())

    def callback(rec, x):
        if log_path is None:
            return
        score = None
        if truth is not None:
            score = ssim(np.maximum(x[: truth.n * truth.n], 0.0), truth.values, consts)
        cio.append_log_row(
            log_path,
            cio.LogRecord(
                iter=rec.iteration, phi=rec.value, grad_inf_norm=rec.grad_inf_norm,
                inner_iters=rec.inner_iterations, step=rec.step_length,
                fg_evals=rec.fg_evals, wall_ms=rec.wall_ms, ssim=score,
            ),
            comments=[echo],
        )

    return tn_minimize(problem, x0, problem.lower_bounds(), cfg,
                       preconditioner=problem.preconditioner(), callback=callback)


def cmd_reconstruct(args):
    if args.reg_lambda is not None and args.mode not in ("l2", "tv"):
        raise SystemExit2(f"--lambda is only valid for l2/tv modes, not {args.mode}")
    if args.mode in ("l2", "tv") and args.reg_lambda is None:
        raise SystemExit2(f"mode {args.mode} requires --lambda")
    if args.known_cor is not None and args.mode != "explicit":
        raise SystemExit2("--known-cor is only valid with --mode explicit")

    measured = cio.read_sinogram(args.sino)
    n = args.n
    geom = build_geometry(n, measured.n_angles)
    if geom.n_beamlets != measured.n_beamlets:
        raise SystemExit2(
            f"sinogram has {measured.n_beamlets} beamlets; geometry for n={n} "
            f"expects {geom.n_beamlets}"
        )
    L = build_system_matrix(geom)
    sigma = args.sigma
    truth = cio.read_image(args.truth) if args.truth else None
    echo = _flag_echo(args)
    cfg = SolverConfig(
        grad_tol=args.grad_tol, max_outer=args.max_outer, max_inner=args.max_inner,
        cg_forcing=args.cg_forcing,
    )
    os.makedirs(args.out, exist_ok=True)
    log = args.log
    if log and os.path.exists(log):
        os.remove(log)

    shifts_out = None
    drift_out = None
    aligned = None

    if args.mode == "standard":
        problem = StandardProblem(L, measured, geom)
        report = _solve(problem, problem.initial(), cfg, log, echo, truth)
        recon = problem.image_of(report.x)
    elif args.mode == "l2":
        problem = L2Problem(L, measured, geom, args.reg_lambda)
        report = _solve(problem, problem.initial(), cfg, log, echo, truth)
        recon = problem.image_of(report.x)
    elif args.mode == "tv":
        problem = TVProblem(L, measured, geom, args.reg_lambda, args.tv_eps)
        report = _solve(problem, problem.initial(), cfg, log, echo, truth)
        recon = problem.image_of(report.x)
    elif args.mode == "explicit" and args.known_cor is not None:
        x_star, y_star = args.known_cor
        shifts = shift_amount(geom.angles, x_star, y_star)
        aligned = align_sinogram(measured, -shifts, sigma, geom)
        problem = StandardProblem(L, aligned, geom)
        report = _solve(problem, problem.initial(), cfg, log, echo, truth)
        recon = problem.image_of(report.x)
        drift_out = DriftModel.single(x_star, y_star)
        shifts_out = shifts
    elif args.mode == "explicit":
        problem = ExplicitProblem(L, measured, geom, sigma, per_angle=args.per_angle_cor)
        report = _solve(problem, problem.initial(args.init_shift, args.init_shift),
                        cfg, log, echo, truth)
        recon = problem.image_of(report.x)
        _, xs, ys = problem.split(report.x)
        drift_out = (DriftModel.per_angle(np.column_stack([xs, ys]))
                     if args.per_angle_cor else DriftModel.single(xs[0], ys[0]))
        shifts_out = problem.shifts_of(report.x)
        aligned = align_sinogram(measured, -shifts_out, sigma, geom)
    elif args.mode == "implicit":
        problem = ImplicitProblem(L, measured, geom, sigma)
        report = _solve(problem, problem.initial(args.init_shift), cfg, log, echo, truth)
        recon = problem.image_of(report.x)
        shifts_out = problem.shifts_of(report.x)
        aligned = align_sinogram(measured, -shifts_out, sigma, geom)
    elif args.mode == "mirror":
        offset, aligned = mirror_align(measured, geom, sigma)
        problem = StandardProblem(L, aligned, geom)
        report = _solve(problem, problem.initial(), cfg, log, echo, truth)
        recon = problem.image_of(report.x)
        shifts_out = np.full(geom.n_angles, offset)
    elif args.mode == "alternating":
        alt_cfg = AlternatingConfig(
            outer_rounds=args.alt_rounds,
            recon_iterations_per_round=args.alt_recon_iters,
            upsample_factor=args.alt_upsample,
        )
        recon, params, alt_report = alternating_reproject(measured, geom, L, alt_cfg, sigma)
        shifts_out = params.p
        aligned = align_sinogram(measured, -shifts_out, sigma, geom)
        report = None
    else:  # pragma: no cover
        raise SystemExit2(f"unknown mode {args.mode}")

    cio.write_image(os.path.join(args.out, "recon.cti"), recon)
    cio.export_pgm(recon, os.path.join(args.out, "recon.pgm"), normalize=True)
    if drift_out is not None:
        cio.write_drift(os.path.join(args.out, "recovered_drift.ctd"), drift_out)
    if shifts_out is not None:
        cio.write_shifts(os.path.join(args.out, "recovered_shifts.ctd"), shifts_out)
    if aligned is not None:
        cio.write_sinogram(os.path.join(args.out, "aligned.cts"), aligned)

    if report is not None:
        print(f"mode={args.mode} termination={report.termination} "
              f"outers={report.n_outer} phi={report.value:.6g} "
              f"grad_inf={report.grad_inf_norm:.3g}")
        if report.termination == "non-finite-objective":
            return 3
    if truth is not None:
        consts = SsimConstants.from_range(truth.values.max() - truth.values.min())
        print(f"ssim={ssim(recon, truth, consts):.4f}")
    return 0


# ---------------------------------------------------------------------------
# sweep-sigma
# ---------------------------------------------------------------------------


def _profile_row(kind, taus, span):
    """Analytic smooth projection profile and its exact translate."""
    if kind == "disk":
        r = 0.35 * span / 2.0

        def profile(t):
            t = np.asarray(t, dtype=float)
            inside = np.abs(t) < r
            out = np.zeros_like(t)
            out[inside] = 2.0 * np.sqrt(r * r - t[inside] ** 2)
            return out

    else:  # gaussian bump
        s = 0.12 * span / 2.0

        def profile(t):
            t = np.asarray(t, dtype=float)
            return np.exp(-0.5 * (t / s) ** 2)

    return profile


def translation_error(n_taus, sigma, kind="gaussian", shifts=(1.37, 2.71, -3.41)):
    """Max relative error of the FFT translation against the analytic shift.

    The row is an analytic projection profile sampled on an ``n_taus``
    beamlet grid; each requested subpixel shift is applied with
    ``translate_row`` and compared against the exact shifted profile.
    """
    from .geometry import Geometry

    n_equiv = max(2, int(np.ceil(n_taus / np.sqrt(2.0))))
    h = np.sqrt(2.0) * n_equiv / n_taus
    taus = (np.arange(n_taus) - (n_taus - 1) / 2.0) * h
    geom = Geometry(n=n_equiv, angles=np.zeros(1), taus=taus, spacing=h)
    profile = _profile_row(kind, taus, n_taus * h)
    row = profile(taus)
    scale = np.abs(row).max()
    errs = []
    from .shift import translate_row

    for p in shifts:
        shifted = translate_row(row, p * h, sigma, geom)
        exact = profile(taus - p * h)
        errs.append(np.abs(shifted - exact).max() / scale)
    return float(np.mean(errs))


def cmd_sweep_sigma(args):
    ntaus = [int(v) for v in args.ntau_list.split(",") if v]
    if not ntaus or args.sigma_steps < 2:
        raise SystemExit2("need a nonempty --ntau-list and at least two sigma steps")
    sigmas = np.geomspace(args.sigma_min, args.sigma_max, args.sigma_steps)
    rows = []
    for nt in ntaus:
        for s in sigmas:
            rows.append((nt, f"{s:.6g}",
                         f"{translation_error(nt, s, args.profile):.8e}"))
    _write_csv(args.out, ("n_tau", "sigma", "error"), rows, [_flag_echo(args)])
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def cmd_metrics(args):
    ref = cio.read_image(args.ref)
    test = cio.read_image(args.test)
    consts = SsimConstants.from_range(ref.values.max() - ref.values.min())
    s = ssim(test, ref, consts)
    m = rel_misfit(test.as_array(), ref.as_array())
    print(f"ssim={s:.6f}")
    print(f"rel_misfit={m:.6f}")
    if args.csv:
        fresh = not os.path.exists(args.csv) or os.path.getsize(args.csv) == 0
        with open(args.csv, "a", newline="") as fh:
            if fresh:
                fh.write(f"# {_flag_echo(args)}\n")
                fh.write("ref,test,ssim,rel_misfit\n")
            fh.write(f"{args.ref},{args.test},{s:.6f},{m:.6f}\n")
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def evaluation_time_ms(n, reps=5, seed=0):
    """Median wall time of one implicit (value, gradient) evaluation."""
    geom = build_geometry(n, 1)
    L = build_system_matrix(geom)
    rng = np.random.default_rng(seed)
    d = Sinogram(values=rng.uniform(0.0, 1.0, (1, geom.n_beamlets)))
    problem = ImplicitProblem(L, d, geom, default_sigma())
    x = problem.initial()
    x[: n * n] = rng.uniform(0.0, 1.0, n * n)
    x[n * n :] = rng.uniform(-0.5, 0.5, geom.n_angles)
    for _ in range(3):
        problem(x)
    times = []
    for _ in range(reps):
        k = 0
        t0 = time.perf_counter()
        elapsed = 0.0
        while elapsed < 0.05 or k < 5:
            problem(x)
            k += 1
            elapsed = time.perf_counter() - t0
        times.append(1e3 * elapsed / k)
    return float(np.median(times))


def cmd_bench(args):
    ns = [int(v) for v in args.n_list.split(",") if v]
    rows = []
    for n in ns:
        ms = evaluation_time_ms(n, reps=args.reps)
        rows.append((n, f"{ms:.6f}"))
        print(f"n={n}: {ms:.4f} ms per (value, gradient) evaluation")
    if args.out:
        _write_csv(args.out, ("n", "ms"), rows, [_flag_echo(args)])
    if len(ns) >= 2:
        logn = np.log([r[0] for r in rows])
        logt = np.log([float(r[1]) for r in rows])
        slope = float(np.polyfit(logn, logt, 1)[0])
        print(f"log-log slope: {slope:.3f}")
    return 0


# ---------------------------------------------------------------------------
# parser plumbing
# ---------------------------------------------------------------------------


class SystemExit2(Exception):
    """Usage error discovered after argparse validation."""


def build_parser():
    p = argparse.ArgumentParser(
        prog="cordrift",
        description="Parallel-beam tomography with center-of-rotation drift recovery",
    )
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="generate truth, drift, and measured sinogram")
    ps.add_argument("--phantom", choices=("disk", "shepp-logan", "file"), default="disk")
    ps.add_argument("--phantom-file", default=None)
    ps.add_argument("--disk-radius", type=float, default=0.3,
                    help="disk radius as a fraction of the half-width")
    ps.add_argument("--n", type=int, default=128)
    ps.add_argument("--angles", type=int, default=30)
    ps.add_argument("--drift", choices=("none", "single", "walk"), default="none")
    ps.add_argument("--drift-scale", type=float, default=0.02,
                    help="CoR displacement (single) or max step (walk), fraction of n")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--noise", type=float, default=0.0,
                    help="Gaussian noise level as a fraction of data RMS")
    ps.add_argument("--noise-seed", type=int, default=0)
    ps.add_argument("--oversample", type=int, default=1)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_simulate)

    pr = sub.add_parser("reconstruct", help="reconstruct from a measured sinogram")
    pr.add_argument("--sino", required=True)
    pr.add_argument("--n", type=int, required=True, help="reconstruction grid side")
    pr.add_argument("--mode", required=True,
                    choices=("standard", "explicit", "implicit", "l2", "tv",
                             "mirror", "alternating"))
    pr.add_argument("--sigma", type=float, default=default_sigma())
    pr.add_argument("--lambda", dest="reg_lambda", type=float, default=None)
    pr.add_argument("--tv-eps", type=float, default=1e-6)
    pr.add_argument("--per-angle-cor", action="store_true",
                    help="explicit mode: one CoR per angle instead of one shared")
    pr.add_argument("--known-cor", type=lambda s: tuple(float(v) for v in s.split(",")),
                    default=None, metavar="X,Y",
                    help="explicit mode: skip CoR optimization, use this CoR")
    pr.add_argument("--init-shift", type=float, default=0.0)
    pr.add_argument("--grad-tol", type=float, default=1e-5)
    pr.add_argument("--max-outer", type=int, default=500)
    pr.add_argument("--max-inner", type=int, default=50)
    pr.add_argument("--cg-forcing", type=float, default=None)
    pr.add_argument("--alt-rounds", type=int, default=8)
    pr.add_argument("--alt-recon-iters", type=int, default=15)
    pr.add_argument("--alt-upsample", type=int, default=8)
    pr.add_argument("--truth", default=None, help="truth image for SSIM logging")
    pr.add_argument("--out", required=True)
    pr.add_argument("--log", default=None)
    pr.set_defaults(func=cmd_reconstruct)

    pw = sub.add_parser("sweep-sigma", help="translation error vs sigma and N_tau")
    pw.add_argument("--ntau-list", default="91,181,362")
    pw.add_argument("--sigma-min", type=float, default=0.05)
    pw.add_argument("--sigma-max", type=float, default=2.0)
    pw.add_argument("--sigma-steps", type=int, default=25)
    pw.add_argument("--profile", choices=("gaussian", "disk"), default="gaussian")
    pw.add_argument("--out", required=True)
    pw.set_defaults(func=cmd_sweep_sigma)

    pm = sub.add_parser("metrics", help="SSIM and relative misfit of two images")
    pm.add_argument("--ref", required=True)
    pm.add_argument("--test", required=True)
    pm.add_argument("--csv", default=None)
    pm.set_defaults(func=cmd_metrics)

    pb = sub.add_parser("bench", help="evaluation cost vs grid size")
    pb.add_argument("--n-list", default="64,128,256,512")
    pb.add_argument("--reps", type=int, default=5)
    pb.add_argument("--out", default=None)
    pb.set_defaults(func=cmd_bench)

    return p


def main(argv=None):
    _apply_thread_cap()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        return args.func(args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except cio.FileFormatError as exc:
        print(f"file format error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
