# Purpose: command line front end of the monodromy lab. Every subcommand
# reads its section of config.yaml, runs its sweep, prints a report and
# writes CSV / JSON results plus a manifest into <out>/<command>/.
#
# Exit codes: 0 pass, 1 numeric failure, 2 classification ambiguous,
# 3 configuration error.
#

import csv
import json
import logging
import math
import os
import platform
import sys
import time
from argparse import ArgumentParser, HelpFormatter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from uuid import uuid4

import numpy as np
import scipy
from scipy import linalg
from termcolor import colored

from escape import diagonal_normal_form, verify_positivity
from geodesic_lab import (base_orbit, find_critical_point, hessian_signature, integrate, poincare_linearization,
                          transverse_normal_form)
from lab_config import load_config
from lab_errors import (ClassificationAmbiguousError, ConfigError, ContractionFailure, IntegrationError,
                        LabError, NumericalFailure, UnsupportedSpectrumError)
from monodromy_model import (RESULT_HEADER, ModelParams, build_elliptic_monodromy, conjugated_contraction,
                             fit_spectral_gap)
from quasimode import borel_resum, counting_slope, exact_model_ladder, hermite_mode, residual_certify
from symplectic_core import (SymplecticMatrix, build_quadratic_hamiltonian, classify_spectrum, matrix_from_json,
                             random_symplectic, scaled_tolerance)
from weyl import PhaseGrid

logger = logging.getLogger()
logging.basicConfig(level=logging.INFO,
                    format='%(message)s')

formatter = lambda prog: HelpFormatter(prog, max_help_position=52)

EXPECTED_VERDICTS = {0.0: "semi-hyperbolic", 0.5: "hyperbolic", -0.5: "hyperbolic"}
EXPECTED_SIGNATURES = {0.0: ("-", "+"), 0.5: ("-", "-"), -0.5: ("-", "-")}
BOREL_ENVELOPES = {
    "geometric": [0.5 ** j for j in range(12)],
    "factorial": [float(math.factorial(j)) for j in range(12)],
}
SEPARATOR = "-" * 72


def verdict(ok, ambiguous=False):
    if ambiguous:
        return colored("AMBIGUOUS", "yellow")
    return colored("PASS", "green") if ok else colored("FAIL", "red")


def fmt(value):
    if isinstance(value, (float, np.floating)):
        return f"{value:.17g}"
    if isinstance(value, (tuple, list)):
        return ";".join(fmt(v) for v in value)
    return str(value)


def write_table(directory, name, header, rows, out_format):
    """One result table as CSV (17 significant digits, LF endings) or JSON."""
    if out_format == "json":
        path = os.path.join(directory, f"{name}.json")
        records = [{k: (fmt(v) if isinstance(v, (tuple, list)) else v) for k, v in zip(header, row)} for row in rows]
        with open(path, "w", newline="\n") as f:
            json.dump(records, f, indent=2, default=float)
            f.write("\n")
    else:
        path = os.path.join(directory, f"{name}.csv")
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(v) for v in row])
    return path


def write_json(directory, name, doc):
    path = os.path.join(directory, f"{name}.json")
    with open(path, "w", newline="\n") as f:
        json.dump(doc, f, indent=2, sort_keys=True, default=float)
        f.write("\n")
    return path


def write_manifest(directory, command, config, files, started):
    manifest = {
        "run_id": str(uuid4()),
        "command": command,
        "config_sha256": config.digest(),
        "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time": time.time() - started,
        "files": sorted(os.path.basename(f) for f in files),
    }
    return write_json(directory, "manifest", manifest)


def run_cells(fn, cells, jobs):
    """Map fn over the sweep cells; results come back in submission order."""
    if jobs <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, c) for c in cells]
        return [f.result() for f in futures]


def get_output_dir(config, command):
    directory = os.path.join(config.out, command)
    os.makedirs(directory, exist_ok=True)
    return directory


# ----------------------------------------------------------------------------
# classify
# ----------------------------------------------------------------------------

def describe_classification(cls):
    doc = cls.summary()
    doc["B"] = cls.B.tolist()
    doc["F"] = cls.F.tolist()
    doc["basis"] = cls.basis.entries.tolist()
    return doc


def self_check_cell(cell):
    seed, dim, index, tol_unit, tol_factor = cell
    ds = random_symplectic(dim, np.random.default_rng([seed, dim, index]))
    try:
        cls = classify_spectrum(ds, tol_unit=tol_unit, tol_factor=tol_factor)
    except (ClassificationAmbiguousError, UnsupportedSpectrumError) as e:
        logger.debug("self-check matrix %d in dimension %d skipped: %s", index, dim, e)
        return (dim, index, 0, 0, 0, 0, float("nan"), "skipped")
    except NumericalFailure as e:
        logger.warning("self-check matrix %d in dimension %d failed: %s", index, dim, e)
        return (dim, index, 0, 0, 0, 0, float("nan"), "fail")
    return (dim, index, cls.n_hc, cls.n_hr_plus, cls.n_hr_minus, cls.n_e, cls.reconstruction_error, "pass")


def load_matrix(path, tol_symp):
    """The {dim, rows} document at path as a SymplecticMatrix; unreadable input is a configuration error."""
    try:
        with open(path) as f:
            a = matrix_from_json(f.read())
        return SymplecticMatrix.from_array(a, tol=scaled_tolerance(a, tol_symp))
    except OSError as e:
        raise ConfigError("matrix", f"cannot read {path}: {e.strerror}")
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError("matrix", f"{path} is not a {{dim, rows}} matrix document: {e}")


def cmd_classify(config, args, directory, files):
    cfg = config.classify
    print ("\nC L A S S I F I C A T I O N   R E P O R T\n")
    if args.matrix:
        ds = load_matrix(args.matrix, cfg.tol_symp)
        try:
            cls = classify_spectrum(ds, tol_unit=cfg.tol_unit, tol_factor=cfg.tol_factor)
        except ClassificationAmbiguousError:
            print (f"Matrix {args.matrix}  {verdict(False, ambiguous=True)}")
            raise
        print (f"Matrix {args.matrix}, dimension {cls.dim}, symplectic defect {ds.defect:.3e}")
        print (SEPARATOR)
        for count, block in enumerate(cls.blocks, start=1):
            print (f"{count:4} - {block.kind:20} mu = {block.eigenvalue:.10g}   log = {block.log:.10g}   "
                   f"size {block.multiplicity}")
        print (SEPARATOR)
        print (f"n_hc = {cls.n_hc}, n_hr+ = {cls.n_hr_plus}, n_hr- = {cls.n_hr_minus}, n_e = {cls.n_e}")
        print (f"Reconstruction error {cls.reconstruction_error:.3e}  "
               f"{verdict(cls.reconstruction_error <= cfg.tol_factor)}")
        files.append(write_json(directory, "classification", describe_classification(cls)))

    failed = 0
    if args.self_check or not args.matrix:
        cells = [(config.seed, dim, i, cfg.tol_unit, cfg.tol_factor)
                 for dim in cfg.self_check_dims for i in range(cfg.self_check_count)]
        rows = run_cells(self_check_cell, cells, config.jobs)
        print (f"\nSelf-check on {len(rows)} random symplectic matrices.")
        print (SEPARATOR)
        for count, dim in enumerate(cfg.self_check_dims, start=1):
            mine = [r for r in rows if r[0] == dim]
            passed = [r for r in mine if r[7] == "pass"]
            skipped = sum(1 for r in mine if r[7] == "skipped")
            worst = max((r[6] for r in passed), default=0.0)
            bad = len(mine) - len(passed) - skipped
            failed += bad
            print (f"{count:4} - dim {dim}: {len(passed)} passed, {skipped} skipped, worst error {worst:.3e}  "
                   f"{verdict(bad == 0)}")
        files.append(write_table(directory, "self_check",
                                 ("dim", "index", "n_hc", "n_hr_plus", "n_hr_minus", "n_e",
                                  "reconstruction_error", "status"), rows, config.format))
    print ("\nEnd of report.")
    if failed:
        raise NumericalFailure(f"{failed} random symplectic matrices failed the factorization check")


# ----------------------------------------------------------------------------
# contract
# ----------------------------------------------------------------------------

def get_model_params(cfg, N=None):
    grid = PhaseGrid(L=cfg.L, N=N or cfg.N, hbar=cfg.hbar_tilde)
    return ModelParams(lam=cfg.lam, h=cfg.h_values[0], hbar_tilde=cfg.hbar_tilde, s=cfg.s, grid=grid,
                       width=cfg.width)


def contraction_cell(p):
    return conjugated_contraction(p)


def gap_cell(cell):
    p, h_values, gap_width = cell
    return fit_spectral_gap(p, h_values, gap_width)


def cmd_contract(config, args, directory, files):
    cfg = config.contract
    p = get_model_params(cfg)
    cells = [p.with_h(h) for h in cfg.h_values]
    cells += [p.with_s(s) for s in cfg.s_values]
    results = run_cells(contraction_cell, cells, config.jobs)

    gap_cells = [(p, cfg.h_values, cfg.gap_width)]
    if cfg.refine:
        gap_cells.append((get_model_params(cfg, 2 * cfg.N), cfg.h_values, cfg.gap_width))
    fits = run_cells(gap_cell, gap_cells, config.jobs)
    results = [replace(r, gap_constant=fits[0][0], gap_exponent=fits[0][1]) for r in results]

    print ("\nC O N T R A C T I O N   R E P O R T\n")
    print (f"lambda = {cfg.lam}, hbar_tilde = {cfg.hbar_tilde}, grid L = {cfg.L}, N = {cfg.N}")
    print (SEPARATOR)
    for count, res in enumerate(results, start=1):
        ok = res.norm_conjugated < 1 if res.s != 0 else abs(res.norm_conjugated - 1) <= 1e-9
        print (f"{count:4} - h = {res.h:<10.6g} s = {res.s:<5.3g} r = {res.norm_conjugated:.12f}  "
               f"reversed {res.norm_reversed:.6f}  gap {res.gap_conjugated:.3e}  "
               f"unitarity defect {res.unitarity_defect:.2e}  {verdict(ok)}")
    swept = [r.norm_conjugated for r in results[:len(cfg.h_values)]]
    print (SEPARATOR)
    print (f"r_max over the h sweep {max(swept):.12f}, spread {max(swept) - min(swept):.3e}")
    for (c, n, gaps), grid_n in zip(fits, (cfg.N, 2 * cfg.N)):
        print (f"Spectral gap on N = {grid_n}: C = {c:.6g}, N_exp = {n:.6f}")
    if len(fits) == 2:
        change = abs(fits[1][1] - fits[0][1])
        print (f"Exponent change under refinement {change:.4f}  {verdict(change <= 0.3)}")
    print ("\nEnd of report.")

    files.append(write_table(directory, "contraction", RESULT_HEADER, [r.row() for r in results], config.format))
    gap_rows = []
    for (c, n, gaps), grid_n in zip(fits, (cfg.N, 2 * cfg.N)):
        gap_rows += [(grid_n, h, g, c, n) for h, g in zip(cfg.h_values, gaps)]
    files.append(write_table(directory, "spectral_gap", ("N", "h", "gap", "constant", "exponent"),
                             gap_rows, config.format))
    if any(r.unitarity_defect > 1e-9 for r in results):
        raise NumericalFailure("model monodromy unitarity defect above 1e-9")
    for r in results:
        if r.s > 0 and r.norm_conjugated >= 1:
            raise ContractionFailure(r.norm_conjugated, r.h, r.hbar_tilde, r.s)


# ----------------------------------------------------------------------------
# ladder
# ----------------------------------------------------------------------------

def certify_entry(cell):
    entry, alpha, h, grid, nt = cell
    pde = residual_certify(entry.k, entry.beta, entry.z, alpha, h, grid, nt)
    monodromy = float("nan")
    if len(entry.beta) == 1:
        v = hermite_mode(entry.beta, h, grid).vector
        p = ModelParams(alpha=alpha, h=h, hbar_tilde=h, s=0.0, grid=grid)
        m = build_elliptic_monodromy(p, entry.z, grid=grid)
        monodromy = float(np.linalg.norm(m @ v - v) / np.linalg.norm(v))
    return pde, monodromy


def cmd_ladder(config, args, directory, files):
    cfg = config.ladder
    counts, slope = counting_slope(cfg.alpha, cfg.h_values, cfg.m_exponent, cfg.c0, cfg.n)
    lower = cfg.n * (1 - 1 / cfg.m_exponent) - 0.25
    upper = cfg.n + 0.25

    ladder = exact_model_ladder(cfg.alpha, cfg.certify_h, cfg.m_exponent, cfg.c0, cfg.n)
    grid = PhaseGrid(L=cfg.L, N=cfg.N, hbar=cfg.certify_h)
    chosen = sorted(ladder.entries, key=lambda e: (sum(e.beta), abs(e.z), e.k))
    if cfg.certify_count is not None:
        chosen = chosen[:cfg.certify_count]
    residuals = run_cells(certify_entry, [(e, cfg.alpha, cfg.certify_h, grid, cfg.nt) for e in chosen], config.jobs)
    certified = {(e.k, e.beta): res for e, res in zip(chosen, residuals)}

    h_grid = np.logspace(-4, -1, 61)
    borel = {name: borel_resum(env, h_grid, cfg.m_exponent) for name, env in BOREL_ENVELOPES.items()}

    print ("\nL A D D E R   R E P O R T\n")
    print (f"alpha = {cfg.alpha}, m = {cfg.m_exponent}, c0 = {cfg.c0}, n = {cfg.n}")
    print (SEPARATOR)
    for count, (h, c) in enumerate(zip(cfg.h_values, counts), start=1):
        print (f"{count:4} - h = {h:<10.6g} N(h) = {c}")
    ok_slope = lower <= slope <= upper
    print (f"Counting slope {slope:.4f} in [{lower:.2f}, {upper:.2f}]  {verdict(ok_slope)}")
    print (SEPARATOR)
    worst = 0.0
    for count, (entry, (pde, mono)) in enumerate(zip(chosen, residuals), start=1):
        worst = max(worst, pde, 0.0 if math.isnan(mono) else mono)
        print (f"{count:4} - k = {entry.k:<4} beta = {entry.beta}  z = {entry.z:.15g}  "
               f"residual {pde:.2e}  monodromy {mono:.2e}")
    print (f"Worst certification residual {worst:.3e}  {verdict(worst <= 1e-8)}")
    print (SEPARATOR)
    for count, (name, res) in enumerate(borel.items(), start=1):
        print (f"{count:4} - {name:10} truncation certificates for N = 1, 2, 3  {verdict(res.holds)}")
    print ("\nEnd of report.")

    files += [
        write_table(directory, "counting", ("h", "count", "window"),
                    [(h, int(c), cfg.c0 * h ** (1 / cfg.m_exponent)) for h, c in zip(cfg.h_values, counts)],
                    config.format),
        write_table(directory, "ladder", ("k", "beta", "z", "residual", "monodromy_residual", "multiplicity"),
                    [(e.k, e.beta, e.z, *certified.get((e.k, e.beta), (math.nan, math.nan)), e.multiplicity)
                     for e in ladder.entries], config.format),
        write_table(directory, "borel", ("envelope", "order", "h", "error", "bound"),
                    [(name, n, h, err, res.certificates[n] * h ** n)
                     for name, res in borel.items() for n in res.certificates
                     for h, err in zip(res.h_grid, res.errors[n])], config.format),
        write_json(directory, "ladder_summary", {
            "h": cfg.certify_h, "m": cfg.m_exponent, "c0": cfg.c0, "N": ladder.count,
            "slope_diagnostics": {"slope": slope, "bracket": [lower, upper], "h_values": list(cfg.h_values),
                                  "counts": [int(c) for c in counts]},
        }),
    ]
    if not ok_slope or worst > 1e-8 or not all(r.holds for r in borel.values()):
        raise NumericalFailure(f"ladder checks failed: slope {slope:.4f}, worst residual {worst:.3e}")


# ----------------------------------------------------------------------------
# geodesic
# ----------------------------------------------------------------------------

def geodesic_cell(cell):
    z0, step = cell
    report = poincare_linearization(z0, step=step)
    point = find_critical_point((0.0, z0))
    return report, tuple(float(v) for v in point), hessian_signature(point)


def cmd_geodesic(config, args, directory, files):
    cfg = config.geodesic
    results = run_cells(geodesic_cell, [(z0, cfg.step) for z0 in cfg.z0_values], config.jobs)

    state0, period = base_orbit(0.0)
    state0[2] += cfg.perturbation
    trajectory = integrate(state0, cfg.periods * period, cfg.step, cfg.stride, cfg.bound)

    print ("\nG E O D E S I C   R E P O R T\n")
    print (SEPARATOR)
    failed = 0
    for count, (report, point, signature) in enumerate(results, start=1):
        z0 = report.base_orbit
        ok = (report.verdict == EXPECTED_VERDICTS[z0] and signature == EXPECTED_SIGNATURES[z0]
              and report.symplectic_defect <= 1e-6)
        failed += not ok
        mults = ", ".join(f"{m:.8g}" for m in report.multipliers)
        print (f"{count:4} - z0 = {z0:<5g} {report.verdict:16} signature ({', '.join(signature)})  {verdict(ok)}")
        print (f"       multipliers {mults}")
        print (f"       closure {report.closure_residual:.2e}, symplectic defect {report.symplectic_defect:.2e}, "
               f"energy drift {report.energy_drift:.2e}")
    print (SEPARATOR)
    print (f"Perturbed orbit dz = {cfg.perturbation}: {len(trajectory.t)} samples, "
           f"energy drift {trajectory.energy_drift:.2e}")
    print ("\nEnd of report.")

    docs = []
    for report, point, signature in results:
        doc = report.to_dict()
        doc["critical_point"] = list(point)
        doc["signature"] = list(signature)
        qh = transverse_normal_form(report)
        doc["normal_form"] = {"hyperbolic": qh.hyp_coeffs.tolist(), "elliptic": qh.ell_coeffs.tolist()}
        docs.append(doc)
    files += [
        write_json(directory, "poincare", {"orbits": docs}),
        write_table(directory, "trajectory", ("t", "x", "y", "z", "vx", "vy", "vz", "energy"),
                    list(trajectory.rows()), config.format),
    ]
    if trajectory.blown_up:
        raise IntegrationError(f"perturbed orbit left the domain bound {cfg.bound} at t = {trajectory.t[-1]:.6f}")
    if failed:
        raise NumericalFailure(f"{failed} closed geodesics disagree with the expected stability")


# ----------------------------------------------------------------------------
# positivity
# ----------------------------------------------------------------------------

def get_case_matrix(name):
    """dS for each positivity case, as exp(B) with B = diag(X, -X^T) unless stated."""
    if name == "negative":
        return np.diag([-2.0, -0.5])
    x = {
        "model": np.array([[1.0]]),
        "diagonal": np.diag([2.0, 3.0]),
        "complex": np.array([[1.0, -5.0], [5.0, 1.0]]),
        "jordan": np.array([[1.0, 1.0], [0.0, 1.0]]),
    }[name]
    m = x.shape[0]
    b = np.block([[x, np.zeros((m, m))], [np.zeros((m, m)), -x.T]])
    return linalg.expm(b)


def positivity_cell(cell):
    name, index, seed, samples, radius, sweep_max = cell
    a = get_case_matrix(name)
    cls = classify_spectrum(SymplecticMatrix.from_array(a, tol=scaled_tolerance(a)))
    qh = build_quadratic_hamiltonian(cls)
    report = verify_positivity(qh, samples=samples, radius=radius, rng=np.random.default_rng([seed, index]),
                               sweep_max=sweep_max)
    normal = None
    if name in ("model", "diagonal"):
        normal = diagonal_normal_form(qh, rng=np.random.default_rng([seed, index, 1])).r.tolist()
    return name, report, normal


def cmd_positivity(config, args, directory, files):
    cfg = config.positivity
    cells = [(name, i, config.seed, cfg.samples, cfg.radius, cfg.sweep_max) for i, name in enumerate(cfg.cases)]
    results = run_cells(positivity_cell, cells, config.jobs)

    print ("\nP O S I T I V I T Y   R E P O R T\n")
    print (f"{cfg.samples} samples in the ball of radius {cfg.radius}, radial sweep to {cfg.sweep_max}")
    print (SEPARATOR)
    for count, (name, report, normal) in enumerate(results, start=1):
        extra = f"  r = {normal}" if normal else ""
        print (f"{count:4} - {name:10} min ratio {report.min_ratio:.12f}{extra}  {verdict(report.min_ratio > 0)}")
    print ("\nEnd of report.")
    header = ("case", "min_ratio", "argmin_point", "samples", "radius")
    docs = [dict(case=name, **report.to_dict()) for name, report, _ in results]
    files.append(write_table(directory, "positivity", header, [[d[k] for k in header] for d in docs],
                             config.format))


# ----------------------------------------------------------------------------
# compare
# ----------------------------------------------------------------------------

def read_table(path, role):
    try:
        with open(path, newline="") as f:
            return list(csv.reader(f))
    except OSError as e:
        raise ConfigError(role, f"cannot read {path}: {e.strerror}")
    except (csv.Error, UnicodeDecodeError) as e:
        raise ConfigError(role, f"{path} is not a CSV table: {e}")


def is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def cmd_compare(config, args, directory, files):
    baseline, candidate = read_table(args.baseline, "baseline"), read_table(args.candidate, "candidate")
    print ("\nC O M P A R E   R E P O R T\n")
    print (f"{args.baseline} against {args.candidate}, rtol = {args.rtol}")
    print (SEPARATOR)
    if len(baseline) != len(candidate):
        raise NumericalFailure(f"row counts differ: {len(baseline)} against {len(candidate)}")
    count = 0
    for i, (a_row, b_row) in enumerate(zip(baseline, candidate)):
        if len(a_row) != len(b_row):
            raise NumericalFailure(f"row {i} has {len(a_row)} cells against {len(b_row)}")
        for j, (a, b) in enumerate(zip(a_row, b_row)):
            if is_number(a) and is_number(b):
                same = bool(np.isclose(float(a), float(b), rtol=args.rtol, atol=0.0, equal_nan=True))
            else:
                same = a == b
            if not same:
                count += 1
                print (f"{count:4} - row {i}, column {j}: {a} != {b}")
    print (f"{count} differing cells  {verdict(count == 0)}")
    print ("\nEnd of report.")
    if count:
        raise NumericalFailure(f"{count} cells differ beyond rtol {args.rtol}")


COMMANDS = {
    "classify": cmd_classify,
    "contract": cmd_contract,
    "ladder": cmd_ladder,
    "geodesic": cmd_geodesic,
    "positivity": cmd_positivity,
    "compare": cmd_compare,
}


def process_cli_arguments(argv):
    parser = ArgumentParser(prog="cli.py", formatter_class=formatter,
                            description="Numerical experiments on semiclassical monodromy near closed orbits")
    parser.add_argument("-c", "--config", default=None, help="Configuration file (YAML or JSON)")
    parser.add_argument("-o", "--out", default=None, help="Output directory")
    parser.add_argument("-f", "--format", choices=("csv", "json"), default=None, help="Result table format")
    parser.add_argument("-s", "--seed", type=int, default=None, help="Random seed (unsigned 64-bit)")
    parser.add_argument("-j", "--jobs", type=int, default=None, help="Worker processes for sweeps")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    classify = sub.add_parser("classify", formatter_class=formatter, help="Classify a symplectic matrix")
    classify.add_argument("-m", "--matrix", default=None, help="Matrix JSON file {dim, rows}")
    classify.add_argument("--self-check", action="store_true", help="Also classify random symplectic matrices")
    sub.add_parser("contract", formatter_class=formatter, help="Contraction of the conjugated model monodromy")
    sub.add_parser("ladder", formatter_class=formatter, help="Elliptic quasimode ladder and counting law")
    sub.add_parser("geodesic", formatter_class=formatter, help="Closed geodesics of the warped metric")
    sub.add_parser("positivity", formatter_class=formatter, help="Positivity of H_q G on sampled points")
    compare = sub.add_parser("compare", formatter_class=formatter, help="Compare two result CSV files")
    compare.add_argument("-b", "--baseline", required=True, help="Baseline CSV")
    compare.add_argument("-n", "--candidate", required=True, help="Candidate CSV")
    compare.add_argument("-r", "--rtol", type=float, default=1e-12, help="Relative tolerance")
    return parser.parse_args(argv)


def main(argv=None):
    args = process_cli_arguments(argv)
    if args.verbose:
        logger.setLevel(logging.DEBUG)
    started = time.time()
    directory, files = None, []
    try:
        config = load_config(args.config, {"out": args.out, "format": args.format, "seed": args.seed,
                                           "jobs": args.jobs})
        if args.command != "compare":
            directory = get_output_dir(config, args.command)
        COMMANDS[args.command](config, args, directory, files)
    except LabError as e:
        logger.error(e)
        sys.exit(e.exit_code)
    finally:
        if directory is not None:
            write_manifest(directory, args.command, config, files, started)


if __name__ == '__main__':
    main(sys.argv[1:])
