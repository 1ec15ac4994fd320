"""Experiment driver: every operation as a subcommand.

Conventions shared by all subcommands:
  exit 0  success
  exit 1  a checked bound failed (verdict failure)
  exit 2  usage, parse, or resource errors
JSON reports go to stdout with sorted keys; series go to --out as CSV
with repr-formatted floats, so outputs are byte-identical across runs
and thread counts.  Grids are "lo:hi:n" (n log-spaced points) or
"dyadic:lo:hi" (lo, 2 lo, 4 lo, ... up to hi).
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from math import inf

import click
import numpy as np

from . import annulus as annulus_mod
from . import harmonics, lattice, spectra, weyl
from .errors import ResourceLimitError, SpecParseError
from .exponents import EpsSchedule, QExponent, alpha, q_crit
from .fitting import envelope_exponent
from .spectra import GEOMETRIC, SHIFTED, Product, SpectralConvention, Window, parse_spec

__all__ = ["main", "ExperimentConfig"]


def _convention(name: str) -> SpectralConvention:
    if name == "shifted":
        return SHIFTED
    if name == "geometric":
        return GEOMETRIC
    raise ValueError(f"unknown convention {name!r}")


def _parse_grid(text: str) -> list[float]:
    if text.startswith("dyadic:"):
        _, lo, hi = text.split(":")
        lo_f, hi_f = float(lo), float(hi)
        if not 0 < lo_f <= hi_f:
            raise ValueError(f"bad dyadic grid {text!r}")
        out = []
        x = lo_f
        while x <= hi_f * (1 + 1e-12):
            out.append(x)
            x *= 2.0
        return out
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be lo:hi:n or dyadic:lo:hi, got {text!r}")
    lo_f, hi_f, n = float(parts[0]), float(parts[1]), int(parts[2])
    if not 0 < lo_f < hi_f or n < 2:
        raise ValueError(f"bad grid {text!r}")
    return sorted(set(np.geomspace(lo_f, hi_f, n).tolist()))


def _parse_q(text: str):
    if text in ("inf", "oo"):
        return inf
    return Fraction(text)


def _pmap(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _emit_json(payload: dict) -> None:
    click.echo(json.dumps(payload, sort_keys=True, indent=2))


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([x if isinstance(x, (int, str)) else repr(float(x)) for x in row])


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, SpecParseError, ResourceLimitError, OSError) as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(2)

    return wrapper


@click.group()
def main():
    """Spectral counting, cluster windows, and growth-exponent experiments."""


# ---------------------------------------------------------------------------
# spectrum / count / window / gaps

@main.command()
@click.option("--spec", required=True)
@click.option("--convention", default="shifted", show_default=True)
@click.option("--lambda-max", "lam_max", required=True)
@click.option("--out", default=None, help="CSV q4,mult (stdout JSON summary always)")
@click.option("--cache", default=None, help="line-table cache directory")
@_guarded
def spectrum(spec, convention, lam_max, out, cache):
    """Enumerate spectral lines up to --lambda-max."""
    s = parse_spec(spec)
    conv = _convention(convention)
    lam = Fraction(lam_max)
    if cache:
        lines = spectra.cached_lines(s, conv, lam, cache)
    else:
        lines = spectra.enumerate_lines(s, conv, lam)
    if out:
        spectra.write_lines_csv(out, lines)
    _emit_json(
        {
            "spec": spectra.format_spec(s),
            "convention": conv.kind,
            "lambda_max": str(lam),
            "lines": len(lines),
            "total_multiplicity": sum(l.mult for l in lines),
        }
    )


@main.command()
@click.option("--spec", required=True)
@click.option("--convention", default="shifted", show_default=True)
@click.option("--lambda-max", "lam_max", required=True)
@_guarded
def count(spec, convention, lam_max):
    """Eigenvalue count N(lambda) with multiplicity."""
    s = parse_spec(spec)
    conv = _convention(convention)
    lam = Fraction(lam_max)
    _emit_json(
        {
            "spec": spectra.format_spec(s),
            "convention": conv.kind,
            "lambda": str(lam),
            "count": spectra.count(s, conv, lam),
        }
    )


@main.command()
@click.option("--spec", required=True)
@click.option("--convention", default="shifted", show_default=True)
@click.option("--center", default=None, help="rational window center")
@click.option("--width", default=None, help="rational window half-width")
@click.option("--sqrt-center", "sqrt_center", type=int, default=None, help="center sqrt(m), width 1/sqrt(m)")
@click.option("--m-range", "m_range", default=None, help="lo:hi sweep of sqrt-centers")
@click.option("--out", default=None)
@click.option("--threads", default=1, show_default=True)
@_guarded
def window(spec, convention, center, width, sqrt_center, m_range, out, threads):
    """Multiplicity in [center-width, center+width], single or swept."""
    s = parse_spec(spec)
    conv = _convention(convention)
    if m_range is not None:
        lo, hi = (int(x) for x in m_range.split(":"))
        if not 1 <= lo <= hi:
            raise ValueError(f"bad m-range {m_range!r}")
        ms = list(range(lo, hi + 1))
        if isinstance(s, Product):
            spectra._table(s, conv, hi + 3)
        counts = _pmap(
            lambda m: spectra.window_count(s, conv, Window.sqrt_center(m)), ms, threads
        )
        rows = [(m, float(np.sqrt(m)), c) for m, c in zip(ms, counts)]
        if out:
            _write_csv(out, ["m", "lambda", "count"], rows)
        payload = {
            "spec": spectra.format_spec(s),
            "m_range": [lo, hi],
            "total": int(sum(counts)),
        }
        try:
            fit = envelope_exponent(
                np.sqrt(np.array(ms, dtype=float)), np.array(counts, dtype=float)
            )
            payload.update({"envelope_slope": fit.slope, "blocks": fit.n_blocks})
        except ValueError:
            payload["envelope_slope"] = None
        _emit_json(payload)
        return
    if sqrt_center is not None:
        w = Window.sqrt_center(sqrt_center)
    elif center is not None and width is not None:
        w = Window.around(Fraction(center), Fraction(width))
    else:
        raise ValueError("need --sqrt-center, --m-range, or --center/--width")
    _emit_json(
        {
            "spec": spectra.format_spec(s),
            "convention": conv.kind,
            "q4_bounds": [str(w.q4_lo), str(w.q4_hi)],
            "count": spectra.window_count(s, conv, w),
        }
    )


@main.command()
@click.option("--spec", required=True)
@click.option("--convention", default="shifted", show_default=True)
@click.option("--lambda-min", "lam_min", default="1", show_default=True)
@click.option("--lambda-max", "lam_max", required=True)
@_guarded
def gaps(spec, convention, lam_min, lam_max):
    """Minimum normalized gap (next - cur) * cur between distinct lines."""
    s = parse_spec(spec)
    conv = _convention(convention)
    scan = spectra.distinct_gap_scan(s, conv, Fraction(lam_min), Fraction(lam_max))
    _emit_json(
        {
            "spec": spectra.format_spec(s),
            "lambda_range": [lam_min, lam_max],
            "lines": scan.n_lines,
            "min_normalized_gap": scan.min_normalized_gap,
            "argmin_pair": [scan.lam, scan.lam_next],
        }
    )


# ---------------------------------------------------------------------------
# lattice

@main.command("lattice")
@click.option("--n", required=True, type=int)
@click.option("--m-max", "m_max", required=True, type=int)
@click.option("--out", default=None)
@click.option("--verify", is_flag=True, help="cross-check against an independent route")
@_guarded
def lattice_cmd(n, m_max, out, verify):
    """Sum-of-n-squares representation counts r_n(m) for m <= m-max."""
    table = lattice.rn_table(n, m_max)
    if out:
        _write_csv(out, ["m", "r"], [(m, int(table[m])) for m in range(m_max + 1)])
    payload = {"n": n, "m_max": m_max, "total": int(table.sum())}
    if verify:
        if n == 2:
            bad = int(table[0] != 1) + sum(
                1 for m in range(1, m_max + 1) if lattice.r2_divisor(m) != int(table[m])
            )
        else:
            cap = min(m_max, 2000)
            bad = sum(
                1
                for m in range(cap + 1)
                if lattice.rn_bruteforce(n, m) != int(table[m])
            )
        payload["mismatches"] = bad
        _emit_json(payload)
        if bad:
            sys.exit(1)
        return
    _emit_json(payload)


# ---------------------------------------------------------------------------
# weyl / riesz / beta

@main.command("weyl-fit")
@click.option("--spec", required=True)
@click.option("--convention", default="shifted", show_default=True)
@click.option("--grid", required=True)
@click.option("--schedule", default="unit", show_default=True)
@click.option("--tolerance", default=weyl.SLOPE_TOLERANCE, show_default=True)
@click.option("--out", default=None)
@_guarded
def weyl_fit(spec, convention, grid, schedule, tolerance, out):
    """Fit the counting remainder envelope against d-1-sigma."""
    s = parse_spec(spec)
    conv = _convention(convention)
    sched = EpsSchedule.parse(schedule)
    series = weyl.remainder_series(s, conv, _parse_grid(grid))
    if out:
        _write_csv(
            out,
            ["lambda", "N", "main", "R"],
            [(x.lam, x.N, x.main, x.R) for x in series],
        )
    rep = weyl.fit_remainder(series, sched, spectra.dimension(s), float(tolerance))
    _emit_json(
        {
            "spec": spectra.format_spec(s),
            "schedule": str(sched),
            "slope": rep.fit.slope,
            "threshold": rep.threshold,
            "sign_changes": weyl.sign_changes(series),
            "verdict": rep.verdict,
        }
    )
    if not rep.verdict:
        sys.exit(1)


@main.command()
@click.option("--spec", required=True)
@click.option("--convention", default="shifted", show_default=True)
@click.option("--delta", default="1")
@click.option("--grid", required=True)
@click.option("--tolerance", default=0.3, show_default=True)
@click.option("--out", default=None)
@click.option("--threads", default=1, show_default=True)
@_guarded
def riesz(spec, convention, delta, grid, tolerance, out, threads):
    """Riesz-mean diagonal deviation envelope versus d-2."""
    s = parse_spec(spec)
    conv = _convention(convention)
    d = spectra.dimension(s)
    dlt = Fraction(delta)
    lams = [Fraction(round(x * 64), 64) for x in _parse_grid(grid)]

    def one(lam):
        val = weyl.riesz_diagonal(s, conv, dlt, lam)
        main = weyl.riesz_main_term(d, dlt, float(lam))
        return float(lam), val, main, abs(val - main)

    rows = _pmap(one, lams, threads)
    if out:
        _write_csv(out, ["lambda", "riesz", "main", "dev"], rows)
    fit = envelope_exponent(
        np.array([r[0] for r in rows]), np.array([r[3] for r in rows])
    )
    threshold = d - 2 + float(tolerance)
    ok = bool(fit.slope <= threshold)
    _emit_json(
        {
            "spec": spectra.format_spec(s),
            "delta": str(dlt),
            "slope": fit.slope,
            "threshold": threshold,
            "verdict": ok,
        }
    )
    if not ok:
        sys.exit(1)


@main.command("beta-check")
@click.option("--dmax", default=12, show_default=True)
@_guarded
def beta_check(dmax):
    """Volume identity residual over all factor-dimension pairs."""
    worst = max(
        weyl.beta_identity_residual(dx, dy)
        for dx in range(1, dmax + 1)
        for dy in range(1, dmax + 1)
    )
    ok = worst < 1e-12
    _emit_json({"dmax": dmax, "worst_residual": worst, "verdict": ok})
    if not ok:
        sys.exit(1)


# ---------------------------------------------------------------------------
# annulus

@main.command("annulus")
@click.option("--spec-x", "spec_x", required=True)
@click.option("--spec-y", "spec_y", required=True)
@click.option("--convention", default="shifted", show_default=True)
@click.option("--lam", "--lambda", "lam", required=True)
@click.option("--eps", required=True)
@click.option("--out", default=None)
@click.option("--threads", default=1, show_default=True)
@_guarded
def annulus_cmd(spec_x, spec_y, convention, lam, eps, out, threads):
    """Decompose the joint-spectrum annulus and report region stats."""
    sx, sy = parse_spec(spec_x), parse_spec(spec_y)
    conv = _convention(convention)
    d = annulus_mod.decompose(sx, sy, conv, Fraction(lam), Fraction(eps), threads)
    if out:
        annulus_mod.write_decomposition_csv(d, out)
    st = annulus_mod.region_stats(d)
    _emit_json(
        {
            "spec_x": spectra.format_spec(sx),
            "spec_y": spectra.format_spec(sy),
            "lambda": str(d.lam),
            "eps": str(d.eps),
            "points": st.points,
            "mult_sums": st.mult_sums,
            "total_mult": st.total_mult,
        }
    )


@main.command("annulus-verify")
@click.option("--spec-x", "spec_x", required=True)
@click.option("--spec-y", "spec_y", required=True)
@click.option("--convention", default="shifted", show_default=True)
@click.option("--seeds", default=50, show_default=True)
@click.option("--lambda-lo", "lam_lo", default=100.0, show_default=True)
@click.option("--lambda-hi", "lam_hi", default=2000.0, show_default=True)
@click.option("--schedule", "schedules", multiple=True, default=("pow:1",), show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--threshold", default=8.0, show_default=True)
@click.option("--threads", default=1, show_default=True)
@_guarded
def annulus_verify(
    spec_x, spec_y, convention, seeds, lam_lo, lam_hi, schedules, seed, threshold, threads
):
    """Verify the annulus partition and geometric constants over seeded draws."""
    sx, sy = parse_spec(spec_x), parse_spec(spec_y)
    conv = _convention(convention)
    scheds = [EpsSchedule.parse(s) for s in schedules]
    rng = np.random.Generator(np.random.Philox(int(seed)))
    lams = [
        Fraction(round(float(x) * 64), 64)
        for x in rng.uniform(float(lam_lo), float(lam_hi), int(seeds))
    ]
    worst = 0.0
    partition_all = True
    for sched in scheds:
        for lam in lams:
            eps = annulus_mod.schedule_epsilon(sched, lam)
            dec = annulus_mod.decompose(sx, sy, conv, lam, eps, threads)
            rep = annulus_mod.verify_partition(dec)
            partition_all &= rep.partition_ok
            worst = max(
                worst, rep.c_high, rep.c_ell_max, rep.interval_ratio_max, rep.c_small_max
            )
    ok = partition_all and worst <= float(threshold)
    _emit_json(
        {
            "spec_x": spectra.format_spec(sx),
            "spec_y": spectra.format_spec(sy),
            "seeds": int(seeds),
            "schedules": [str(s) for s in scheds],
            "worst_constant": worst,
            "partition_ok": partition_all,
            "verdict": ok,
        }
    )
    if not ok:
        sys.exit(1)


# ---------------------------------------------------------------------------
# harmonics

def _k_grid(text: str) -> list[int]:
    lo, hi, n = text.split(":")
    ks = sorted(set(int(round(x)) for x in np.geomspace(int(lo), int(hi), int(n))))
    return ks


@main.command()
@click.option("--family", required=True, type=click.Choice(["zonal", "highest"]))
@click.option("--d", default=2, show_default=True)
@click.option("--q", required=True)
@click.option("--k-range", "k_range", required=True, help="lo:hi:n log-spaced degrees")
@click.option("--out", default=None)
@click.option("--threads", default=1, show_default=True)
@_guarded
def norms(family, d, q, k_range, out, threads):
    """L^q norms of one extremal family over a degree sweep."""
    qv = _parse_q(q)
    ks = _k_grid(k_range)
    vals = _pmap(
        lambda k: harmonics.lq_norm(harmonics.HarmonicFamily(family, d, k), qv),
        ks,
        threads,
    )
    rows = [
        (k, k + 0.5 * (d - 1), v) for k, v in zip(ks, vals)
    ]
    if out:
        _write_csv(out, ["k", "lambda", "norm"], rows)
    _emit_json(
        {
            "family": family,
            "d": d,
            "q": q,
            "k_count": len(ks),
            "max_norm": max(vals),
        }
    )


@main.command("norms-fit")
@click.option("--family", required=True, type=click.Choice(["zonal", "highest", "tensor"]))
@click.option("--d", default=2, show_default=True)
@click.option("--dims", default=None, help="comma list for tensor families")
@click.option("--kinds", default=None, help="comma list for tensor families")
@click.option("--q", required=True)
@click.option("--k-range", "k_range", required=True)
@click.option("--target", default=None, type=float)
@click.option("--tolerance", default=0.05, show_default=True)
@_guarded
def norms_fit(family, d, dims, kinds, q, k_range, target, tolerance):
    """Growth exponent of a norm sweep, optionally checked against a target."""
    qv = _parse_q(q)
    ks = _k_grid(k_range)
    if family == "tensor":
        if not dims or not kinds:
            raise ValueError("tensor families need --dims and --kinds")
        dim_list = [int(x) for x in dims.split(",")]
        kind_list = kinds.split(",")
        fit = harmonics.tensor_growth(dim_list, kind_list, qv, ks)
    else:
        fit = harmonics.fit_growth(family, d, qv, ks)
    payload = {
        "family": family,
        "q": q,
        "slope": fit.slope,
        "points": len(ks),
    }
    if target is not None:
        ok = abs(fit.slope - target) <= float(tolerance)
        payload.update({"target": target, "tolerance": tolerance, "verdict": ok})
        _emit_json(payload)
        if not ok:
            sys.exit(1)
        return
    _emit_json(payload)


@main.command()
@click.option("--q", required=True, help="rational or inf")
@click.option("--d", required=True, type=int)
@_guarded
def exponent(q, d):
    """Cluster exponent alpha(q, d) and the critical index."""
    qe = QExponent.from_q(_parse_q(q))
    a = alpha(qe, d)
    qc = q_crit(d)
    upper = d * (Fraction(1, 2) - qe.inv_q) - Fraction(1, 2)
    lower = Fraction(d - 1, 2) * (Fraction(1, 2) - qe.inv_q)
    _emit_json(
        {
            "q": q,
            "d": d,
            "alpha": [str(a), float(a)],
            "q_crit": [str(qc) if qc != inf else "inf", float(qc)],
            "branch": "upper" if upper >= lower else "lower",
        }
    )


@main.command("multiplier-decay")
@click.option("--delta", default="1", show_default=True)
@click.option("--grid", default="10:10000:300", show_default=True)
@click.option("--tolerance", default=0.1, show_default=True)
@click.option("--out", default=None)
@_guarded
def multiplier_decay(delta, grid, tolerance, out):
    """Envelope decay of the Riesz multiplier transform."""
    dlt = float(Fraction(delta))
    rep = harmonics.multiplier_decay(dlt, _parse_grid(grid))
    if out:
        _write_csv(out, ["t", "value"], list(zip(rep.t.tolist(), rep.values.tolist())))
    threshold = -1.0 - dlt + float(tolerance)
    ok = bool(rep.fit.slope <= threshold)
    _emit_json(
        {
            "delta": dlt,
            "slope": rep.fit.slope,
            "threshold": threshold,
            "quad_fail": rep.quad_fail,
            "verdict": ok,
        }
    )
    if rep.quad_fail:
        sys.exit(2)
    if not ok:
        sys.exit(1)


# ---------------------------------------------------------------------------
# config-driven runs

_CONFIG_FIELDS = {
    "operation",
    "spec",
    "spec_x",
    "spec_y",
    "convention",
    "schedule",
    "schedules",
    "grid",
    "lambda_max",
    "lam",
    "eps",
    "q",
    "delta",
    "d",
    "dims",
    "kinds",
    "family",
    "k_range",
    "m_range",
    "target",
    "tolerance",
    "out",
    "cache",
    "threads",
    "seed",
    "seeds",
    "lambda_lo",
    "lambda_hi",
    "threshold",
    "n",
    "m_max",
    "dmax",
    "verify",
    "center",
    "width",
    "sqrt_center",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One JSON-described run; unknown keys are rejected."""

    operation: str
    options: dict

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        raw = json.loads(text)
        if not isinstance(raw, dict) or "operation" not in raw:
            raise ValueError("config must be an object with an 'operation' key")
        unknown = set(raw) - _CONFIG_FIELDS
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        op = raw.pop("operation")
        return cls(op, raw)

    def to_json(self) -> str:
        return json.dumps({"operation": self.operation, **self.options}, sort_keys=True)


@main.command("run")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def run_config(ctx, config_path):
    """Execute one subcommand described by a JSON config file."""
    try:
        with open(config_path) as fh:
            cfg = ExperimentConfig.from_json(fh.read())
        cmd = main.commands.get(cfg.operation)
        if cmd is None:
            raise ValueError(f"unknown operation {cfg.operation!r}")
        args = []
        for key, val in sorted(cfg.options.items()):
            flag = "--" + key.replace("_", "-")
            if isinstance(val, bool):
                if val:
                    args.append(flag)
            elif isinstance(val, (list, tuple)):
                for item in val:
                    args.extend([flag, str(item)])
            else:
                args.extend([flag, str(val)])
    except (ValueError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    try:
        ctx.exit(cmd.main(args=args, prog_name=cfg.operation, standalone_mode=False) or 0)
    except click.UsageError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
