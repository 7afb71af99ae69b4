"""Command line: config ingestion, experiment orchestration, CSV/JSON output.

Subcommands: simulate | analyze | validate | sweep, each taking
--config/--seed/--out.  Every run writes a manifest last (atomic
completion marker) listing all files it produced; CSVs start with a
#schema: comment line and are byte-identical across reruns with the same
config and seed.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import itertools
import json
import math
import os
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__, analytics, channel, protocol, validation
from .errors import ConfigError
from .params import Experiment, GammaAbsorption, validate_config

ENV_PARALLEL = "THZRA_MAX_PARALLEL"


# ---------------------------------------------------------------------------
# config ingestion
# ---------------------------------------------------------------------------

def read_config(path) -> Dict[str, str]:
    """Read an INI-style config into the flat 'section.key' string map."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(p.read_text())
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    raw = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            raw[f"{section}.{key}"] = value.strip()
    return raw


def parse_int_list(text: str) -> List[int]:
    """Comma list with optional a:b inclusive ranges: '2,5,10' or '1:10'."""
    out: List[int] = []
    for tok in str(text).split(","):
        tok = tok.strip()
        if not tok:
            continue
        if ":" in tok:
            a, b = tok.split(":", 1)
            out.extend(range(int(float(a)), int(float(b)) + 1))
        else:
            out.append(int(float(tok)))
    return out


def parse_float_list(text: str) -> List[float]:
    return [float(t) for t in str(text).split(",") if t.strip()]


def parse_str_list(text: str) -> List[str]:
    return [t.strip().lower() for t in str(text).split(",") if t.strip()]


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(float(v))   # plain-float repr even for numpy scalars
    return str(v)


def write_csv_atomic(path: Path, schema: str, header: Sequence[str],
                     rows: Sequence[Sequence]) -> None:
    """Write-temp-then-rename CSV with a #schema: first line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(f"#schema: {schema}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    os.replace(tmp, path)


def _version_string() -> str:
    try:
        desc = subprocess.run(["git", "describe", "--always", "--dirty"],
                              capture_output=True, text=True, timeout=5,
                              cwd=Path(__file__).parent)
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+g{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


class Manifest:
    """Run manifest: written last, lists every output file of the run."""

    def __init__(self, command: str, config_path, seed: int, out_dir: Path):
        self.data = {
            "command": command,
            "config": str(config_path),
            "seed": int(seed),
            "version": _version_string(),
            "out_dir": str(out_dir),
            "outputs": [],
            "timings_s": {},
            "partial_run": False,
        }
        self._t0 = time.monotonic()
        self.out_dir = out_dir

    def add(self, path: Path):
        rel = os.path.relpath(path, self.out_dir)
        if rel not in self.data["outputs"]:
            self.data["outputs"].append(rel)

    def mark_partial(self, note: str):
        self.data["partial_run"] = True
        self.data.setdefault("partial_notes", []).append(note)

    def write(self) -> Path:
        self.data["timings_s"]["total"] = round(time.monotonic() - self._t0, 3)
        path = self.out_dir / "run_manifest.json"
        tmp = path.with_suffix(".json.tmp")
        with open(tmp, "w") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
        return path


def _row_seed(seed: int, *parts) -> int:
    """Stable per-row seed derived from the run seed and row identity."""
    text = "|".join([str(seed)] + [str(p) for p in parts])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

SIM_HEADER = ["K", "scheme", "mean_delay", "stderr_delay",
              "mean_energy_units", "stderr_energy_units",
              "mean_energy_uj", "stderr_energy_uj",
              "mean_transmissions", "stderr_transmissions",
              "mean_k_admitted", "n_trials"]


def cmd_simulate(exp: Experiment, raw: Dict[str, str], out_dir: Path,
                 manifest: Manifest, dump_trials: bool = False) -> int:
    schemes = parse_str_list(raw.get("protocol.scheme", exp.protocol.scheme))
    k_values = parse_int_list(raw.get("protocol.n_users",
                                      str(exp.protocol.n_total)))
    rows = []
    trial_rows = []
    for scheme in schemes:
        for k in k_values:
            e = exp.with_protocol(scheme=scheme, n_total=k,
                                  seed=_row_seed(exp.protocol.seed, scheme, k))
            stats, trows = protocol.run_batch(e, collect_rows=dump_trials)
            rows.append([k, scheme, stats.mean_delay, stats.se_delay,
                         stats.mean_energy_units, stats.se_energy_units,
                         stats.mean_energy_uj, stats.se_energy_uj,
                         stats.mean_transmissions, stats.se_transmissions,
                         stats.mean_k_admitted, stats.n_trials])
            for tr in trows:
                trial_rows.append([tr.trial, tr.scheme, tr.k_admitted,
                                   tr.total_slots, tr.total_transmissions,
                                   tr.energy_units, tr.energy_uj, k])
    agg_path = out_dir / "simulate_aggregate.csv"
    write_csv_atomic(agg_path, "thzra.simulate.v1", SIM_HEADER, rows)
    manifest.add(agg_path)
    if dump_trials:
        tpath = out_dir / "simulate_trials.csv"
        write_csv_atomic(tpath, "thzra.trials.v1",
                         ["trial_id", "scheme", "K_admitted", "total_slots",
                          "total_transmissions", "energy_units", "energy_uJ",
                          "K_provisioned"],
                         trial_rows)
        manifest.add(tpath)
    return 0


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

ANALYZE_HEADER = ["K", "d_ftp", "d_ftp_lo", "d_ftp_hi",
                  "d_atp", "d_atp_lo", "d_atp_hi",
                  "e_ftp", "e_ftp_lo", "e_ftp_hi",
                  "e_atp", "e_atp_lo", "e_atp_hi"]


def cmd_analyze(exp: Experiment, raw: Dict[str, str], out_dir: Path,
                manifest: Manifest) -> int:
    k_values = parse_int_list(raw.get("analyze.k_users",
                                      raw.get("protocol.n_users", "2,5,10,20,40")))
    rows = []
    nan = float("nan")
    for k in sorted(set(k_values)):
        d_ftp = analytics.delay_ftp(k)
        d_atp = analytics.delay_atp(k)
        e_ftp = analytics.energy_ftp(k)
        e_atp = analytics.energy_atp(k)
        dfl, dfh = analytics.delay_bounds_ftp(k) if k >= 3 else (nan, nan)
        dal, dah = analytics.delay_bounds_atp(k) if k >= 2 else (nan, nan)
        efl, efh = analytics.energy_bounds_ftp(k) if k >= 3 else (nan, nan)
        eal, eah = analytics.energy_bounds_atp(k) if k >= 2 else (nan, nan)
        rows.append([k, d_ftp, dfl, dfh, d_atp, dal, dah,
                     e_ftp, efl, efh, e_atp, eal, eah])
    de_path = out_dir / "analyze_delay_energy.csv"
    write_csv_atomic(de_path, "thzra.analyze.delay_energy.v1", ANALYZE_HEADER, rows)
    manifest.add(de_path)

    # closed-form outage grid (no-fading law)
    if isinstance(exp.absorption, GammaAbsorption):
        grid = parse_float_list(raw.get("outage.gamma_bar_db",
                                        "25,27,29,31,33,35,37,39,41,43"))
        gamma_th = 10.0 ** (float(raw.get("outage.gamma_th_db", "5")) / 10.0)
        out_rows = []
        for db in grid:
            q = analytics.OutageQuery(gamma_th=gamma_th,
                                      gamma_bar=10.0 ** (db / 10.0),
                                      k_h=exp.link.k_h)
            p = analytics.outage_probability(q, exp.absorption,
                                             exp.misalignment.rho, exp.link)
            out_rows.append([db, p])
        o_path = out_dir / "analyze_outage.csv"
        write_csv_atomic(o_path, "thzra.analyze.outage.v1",
                         ["gamma_bar_db", "p_out"], out_rows)
        manifest.add(o_path)

        z = exp.absorption.z_for(exp.link)
        do = analytics.diversity_order(exp.fading.alpha, exp.fading.mu,
                                       exp.misalignment.rho, z)
        d_path = out_dir / "analyze_diversity.csv"
        write_csv_atomic(d_path, "thzra.analyze.diversity.v1",
                         ["exp_fading", "exp_misalignment", "exp_pathloss",
                          "effective"],
                         [[do.exponents[0], do.exponents[1], do.exponents[2],
                           do.effective]])
        manifest.add(d_path)
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def _suite_results(exp: Experiment, raw: Dict[str, str], seed: int) -> List[dict]:
    n_gof = int(float(raw.get("validation.n_samples", "100000")))
    trials = int(float(raw.get("validation.trials", "5000")))
    k_sim = parse_int_list(raw.get("validation.k_users", "2,5,10,20,40"))
    rho_scale = float(raw.get("validation.rho_sample_scale", "1.0"))
    results: List[dict] = []

    def record(suite, passed, detail):
        results.append({"suite": suite, "passed": bool(passed), "detail": detail})

    from . import streams as st
    rho = exp.misalignment.rho
    rng = st.substream(seed, 901)
    hp = channel.sample_misalignment(rho * rho_scale, rng, n_gof)
    rep = validation.ks_compare(hp, lambda x: channel.misalignment_cdf(x, rho))
    record("misalignment_ks", rep.passed,
           {"statistic": rep.statistic, "threshold": rep.threshold})

    if isinstance(exp.absorption, GammaAbsorption):
        model = exp.absorption
        zeta = channel.sample_absorption_db(model, st.substream(seed, 902), n_gof)
        gcdf = lambda x: np.array(
            [analytics.gamma_lower_regularized(model.k, xx / model.beta)
             for xx in np.atleast_1d(x)])
        rep = validation.ks_compare(zeta, gcdf)
        record("absorption_gamma_ks", rep.passed,
               {"statistic": rep.statistic, "threshold": rep.threshold})

        hl = channel.sample_path_gain(model, exp.link, st.substream(seed, 903),
                                      n_gof)
        rep = validation.chi_square_compare(
            hl, lambda x: channel.path_gain_cdf(float(x), model, exp.link),
            support=(0.0, exp.link.a_l))
        record("path_gain_chi2", rep.passed,
               {"statistic": rep.statistic, "threshold": rep.threshold,
                "p_value": rep.p_value})

    fp = replace(exp.fading, eta=1.0, kappa=0.0, enabled=True)
    hf = channel.sample_fading(fp, st.substream(seed, 904), n_gof)
    y = np.power(hf / fp.r_hat, fp.alpha) * fp.mu
    gcdf_mu = lambda x: np.array(
        [analytics.gamma_lower_regularized(fp.mu, xx) for xx in np.atleast_1d(x)])
    rep = validation.ks_compare(y, gcdf_mu)
    record("fading_alpha_mu_ks", rep.passed,
           {"statistic": rep.statistic, "threshold": rep.threshold})

    if isinstance(exp.absorption, GammaAbsorption):
        exp_nf = replace(exp, fading=replace(exp.fading, enabled=False))
        grid = parse_float_list(raw.get("validation.gamma_bar_db",
                                        "25,29,33,37,41"))
        gamma_th = 10.0 ** (float(raw.get("outage.gamma_th_db", "5")) / 10.0)
        n_mc = int(float(raw.get("validation.outage_draws", "200000")))
        curve = validation.outage_mc(exp_nf, gamma_th, grid, n_mc,
                                     seed=_row_seed(seed, "no_fading_outage"))
        ok = True
        pts = []
        for db, phat in zip(curve.gamma_bar_db, curve.p_out):
            q = analytics.OutageQuery(gamma_th=gamma_th,
                                      gamma_bar=10.0 ** (db / 10.0),
                                      k_h=exp.link.k_h)
            p = analytics.cdf_snr_no_fading(q, exp.absorption,
                                            exp.misalignment.rho, exp.link)
            se = math.sqrt(max(p * (1 - p), 1e-12) / n_mc)
            pt_ok = abs(phat - p) <= 3.0 * se
            ok &= pt_ok
            pts.append({"gamma_bar_db": db, "mc": phat, "closed_form": p,
                        "ok": pt_ok})
        record("no_fading_outage", ok, {"points": pts})

    k_sweep = [3, 10, 40, 100, 1000, 10000]
    rows = validation.bound_sweep(k_sweep)
    record("bound_sweep", validation.sweep_all_pass(rows),
           {"K": k_sweep, "failures": [r.metric for r in rows if not r.passed]})

    agree = validation.simulator_agreement(exp, ["ftp", "atp"], k_sim, trials)
    record("simulator_vs_series", all(r.passed for r in agree),
           {"worst_rel_err": max(r.rel_err for r in agree), "tol": 0.02})
    return results


def cmd_validate(exp: Experiment, raw: Dict[str, str], out_dir: Path,
                 manifest: Manifest, seed: int) -> int:
    results = _suite_results(exp, raw, seed)
    report_path = out_dir / "validation_report.json"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = report_path.with_suffix(".json.tmp")
    with open(tmp, "w") as fh:
        json.dump({"suites": results,
                   "all_passed": all(r["passed"] for r in results)},
                  fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    os.replace(tmp, report_path)
    manifest.add(report_path)
    width = max(len(r["suite"]) for r in results)
    for r in results:
        print(f"{r['suite']:<{width}}  {'PASS' if r['passed'] else 'FAIL'}")
    return 0 if all(r["passed"] for r in results) else 1


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

SWEEP_AXES = {
    "k_users": parse_int_list,
    "gamma_bar_db": parse_float_list,
    "kbeta_db_per_km": parse_float_list,
    "rho": parse_float_list,
    "alpha": parse_float_list,
    "mu": parse_float_list,
    "k_h": parse_float_list,
}


def _apply_cell(exp: Experiment, cell: Dict[str, float]) -> Experiment:
    link = exp.link
    fading = exp.fading
    mis = exp.misalignment
    absorption = exp.absorption
    prot = exp.protocol
    if "gamma_bar_db" in cell:
        link = replace(link, avg_snr=10.0 ** (cell["gamma_bar_db"] / 10.0))
    if "k_h" in cell:
        kh = cell["k_h"]
        link = replace(link, k_t=kh / math.sqrt(2.0), k_r=kh / math.sqrt(2.0))
    if "kbeta_db_per_km" in cell:
        if not isinstance(absorption, GammaAbsorption):
            raise ConfigError("kbeta sweep axis needs the gamma absorption model")
        absorption = replace(absorption, beta=cell["kbeta_db_per_km"] / absorption.k)
    if "rho" in cell:
        mis = replace(mis, rho=cell["rho"])
    if "alpha" in cell:
        fading = replace(fading, alpha=cell["alpha"])
    if "mu" in cell:
        fading = replace(fading, mu=cell["mu"])
    if "k_users" in cell:
        prot = replace(prot, n_total=int(cell["k_users"]))
    return Experiment(link=link, absorption=absorption, fading=fading,
                      misalignment=mis, protocol=prot)


def _cell_slug(cell: Dict[str, float]) -> str:
    parts = [f"{k}={_fmt(v)}" for k, v in sorted(cell.items())]
    return "_".join(parts).replace("/", "-")


def _run_cell(args):
    exp, raw, cell, seed, out_dir = args
    metrics = parse_str_list(raw.get("sweep.metrics", "protocol"))
    e = _apply_cell(exp, cell)
    path = Path(out_dir) / f"cell_{_cell_slug(cell)}.csv"
    header = sorted(cell.keys())
    row = [cell[k] for k in header]
    cols = list(header)
    if "protocol" in metrics:
        schemes = parse_str_list(raw.get("protocol.scheme", e.protocol.scheme))
        for scheme in schemes:
            ee = e.with_protocol(scheme=scheme,
                                 seed=_row_seed(seed, _cell_slug(cell), scheme))
            stats, _ = protocol.run_batch(ee)
            cols += [f"{scheme}_mean_delay", f"{scheme}_mean_energy_units",
                     f"{scheme}_mean_energy_uj"]
            row += [stats.mean_delay, stats.mean_energy_units,
                    stats.mean_energy_uj]
    if "outage" in metrics:
        gamma_th = 10.0 ** (float(raw.get("outage.gamma_th_db", "5")) / 10.0)
        n_mc = int(float(raw.get("sweep.outage_draws", "200000")))
        gbar_db = 10.0 * math.log10(e.link.avg_snr)
        curve = validation.outage_mc(e, gamma_th, [gbar_db], n_mc,
                                     seed=_row_seed(seed, _cell_slug(cell), "outage"))
        cols += ["p_out", "p_out_ci_lo", "p_out_ci_hi", "outage_draws"]
        row += [float(curve.p_out[0]), float(curve.ci_lo[0]),
                float(curve.ci_hi[0]), n_mc]
    write_csv_atomic(path, "thzra.sweep.cell.v1", cols, [row])
    return path


def cmd_sweep(exp: Experiment, raw: Dict[str, str], out_dir: Path,
              manifest: Manifest, seed: int, parallel: int) -> int:
    axes = {}
    for name, parser in SWEEP_AXES.items():
        key = f"sweep.{name}"
        if key in raw and raw[key].strip():
            axes[name] = parser(raw[key])
    if not axes:
        raise ConfigError("sweep requires at least one [sweep] axis")
    names = sorted(axes.keys())
    cells = [dict(zip(names, combo))
             for combo in itertools.product(*(axes[n] for n in names))]
    cell_dir = out_dir / "sweep"
    cell_dir.mkdir(parents=True, exist_ok=True)

    todo = []
    for cell in cells:
        path = cell_dir / f"cell_{_cell_slug(cell)}.csv"
        if path.exists():
            manifest.add(path)          # completed in an earlier run
        else:
            todo.append((exp, raw, cell, seed, cell_dir))

    failures = 0
    if todo:
        if parallel > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(max_workers=parallel) as pool:
                futures = {pool.submit(_run_cell, args): args for args in todo}
                for fut, args in futures.items():
                    try:
                        manifest.add(fut.result())
                    except Exception as exc:
                        failures += 1
                        manifest.mark_partial(f"cell {args[2]} failed: {exc}")
        else:
            for args in todo:
                try:
                    manifest.add(_run_cell(args))
                except Exception as exc:   # cell failures flag a partial run
                    failures += 1
                    manifest.mark_partial(f"cell {args[2]} failed: {exc}")
    if failures:
        return 1
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="thzra",
        description="THz multiuser random-access lab: simulate, analyze, "
                    "validate, sweep")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("simulate", "run protocol Monte Carlo and write aggregate CSV"),
            ("analyze", "evaluate closed-form delay/energy/outage curves"),
            ("validate", "run the statistical validation suites"),
            ("sweep", "cartesian parameter sweep with resumable cells")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="INI config path")
        p.add_argument("--seed", type=int, default=None,
                       help="override protocol.seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--trials", type=int, default=None,
                       help="override protocol.trials")
        p.add_argument("--parallel", type=int, default=1,
                       help="worker processes for sweep cells")
        p.add_argument("--dump-trials", action="store_true",
                       help="also write per-trial rows (simulate)")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = read_config(args.config)
        if args.seed is not None:
            raw["protocol.seed"] = str(args.seed)
        if args.trials is not None:
            raw["protocol.trials"] = str(args.trials)
        exp = validate_config(raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = exp.protocol.seed
    parallel = max(1, args.parallel)
    cap = os.environ.get(ENV_PARALLEL)
    if cap:
        parallel = min(parallel, max(1, int(cap)))

    manifest = Manifest(args.command, args.config, seed, out_dir)
    try:
        if args.command == "simulate":
            code = cmd_simulate(exp, raw, out_dir, manifest,
                                dump_trials=args.dump_trials)
        elif args.command == "analyze":
            code = cmd_analyze(exp, raw, out_dir, manifest)
        elif args.command == "validate":
            code = cmd_validate(exp, raw, out_dir, manifest, seed)
        else:
            code = cmd_sweep(exp, raw, out_dir, manifest, seed, parallel)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    manifest.write()
    return code


if __name__ == "__main__":
    sys.exit(main())
