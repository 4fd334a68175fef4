"""Command-line front end: simulate, field, converge, scale-check, render.

Configuration resolves in three layers: built-in defaults (plus preset
values when --preset is given), then a flat key=value --config file, then
explicit command-line flags.  The effective configuration is echoed into
every output file header, so a result can always be traced back to the run
that made it.  All files are written atomically and all numeric output
uses '.' as the decimal separator regardless of locale.

Exit codes: 0 success, 2 invalid configuration or input schema, 3 compute
failure, 4 I/O failure.  Errors print a single line to stderr of the form
``error: <category>: <detail>``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, fields

import numpy as np

from .analysis import (
    convergence_study,
    estimate_scale,
    mc_x1_samples,
    mc_x2_samples,
    truncated_scale_hf,
    truncated_scale_lf,
    x1_theoretical_scale,
    x2_theoretical_scale,
)
from .errors import ConfigError, HaarLmsmError
from .lmsm import hurst_preset, read_path_csv, synthesize_path, write_path_csv
from .series import EvalDomain, WHICH, evaluate_field
from .stable_rng import MODES, generate_coefficients, prefix_sums

COMMANDS = ("simulate", "field", "converge", "scale-check", "render")

# Fig. 1 style demonstration setups: exponent profile, stability index,
# and the boundary flag for profiles that graze the admissible band
PRESETS = {
    "fig1-row1": {"alpha": 1.4, "hurst": "linear:0.9,-0.2",
                  "allow_boundary": True},
    "fig1-row2": {"alpha": 1.7, "hurst": "sine:0.2,0.8",
                  "allow_boundary": True},
    "fig1-row3": {"alpha": 1.6, "hurst": "logistic:0.65,0.25",
                  "allow_boundary": False},
}

SCALE_CHECK_PAIRS = ((0.25, 0.7), (0.25, 0.8), (0.5, 0.7),
                     (0.5, 0.8), (1.0, 0.7), (1.0, 0.8))

SLOPE_TOLERANCE = 0.15


@dataclass
class RunConfig:
    command: str
    alpha: float = 1.5
    hurst: str = "constant:0.75"
    J_hf: int = 12
    J_lf: int = 6
    seed: int = 0
    mode: str = "consistent"
    method: str = "abel"
    n_points: int = None
    allow_boundary: bool = False
    preset: str = None
    # field
    which: str = None
    J: int = None
    u_points: int = 65
    v_values: str = "0.7,0.75,0.8"
    # converge
    v: float = 0.75
    Jmin: int = 6
    Jmax: int = 14
    replicates: int = 16
    # scale-check
    n_samples: int = 20000
    # render
    input: str = None
    out: str = None


# output paths stay out of the echo so identical runs aimed at different
# destinations still produce byte-identical files
_ECHO_FIELDS = {
    "simulate": ("alpha", "hurst", "J_hf", "J_lf", "seed", "mode", "method",
                 "n_points", "allow_boundary", "preset"),
    "field": ("alpha", "which", "J", "J_hf", "J_lf", "u_points", "v_values",
              "seed", "mode", "method"),
    "converge": ("alpha", "which", "v", "Jmin", "Jmax", "replicates", "seed"),
    "scale-check": ("alpha", "which", "J", "n_samples", "seed", "mode"),
    "render": (),
}


def _config_echo(config: RunConfig) -> dict:
    d = asdict(config)
    keep = ("command",) + _ECHO_FIELDS[config.command]
    return {k: d[k] for k in keep if d[k] is not None}


def _write_text_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def parse_hurst_spec(spec: str):
    """Build an exponent profile from a 'kind:params' string.

    constant:V | linear:START,SLOPE | sine:AMPLITUDE,OFFSET[,CYCLES]
    | logistic:LOW,HEIGHT[,RATE,CENTER] | table:t0,h0,t1,h1,...
    """
    kind, _, rest = spec.partition(":")
    kind = kind.strip()
    try:
        vals = [float(x) for x in rest.split(",")] if rest.strip() else []
    except ValueError:
        raise ConfigError(f"bad numeric value in hurst spec {spec!r}")
    if kind == "constant":
        _need_n(spec, vals, 1, 1)
        return hurst_preset("constant", {"value": vals[0]})
    if kind == "linear":
        _need_n(spec, vals, 2, 2)
        return hurst_preset("linear", {"start": vals[0], "slope": vals[1]})
    if kind == "sine":
        _need_n(spec, vals, 2, 3)
        params = {"amplitude": vals[0], "offset": vals[1]}
        if len(vals) == 3:
            params["cycles"] = vals[2]
        return hurst_preset("sine", params)
    if kind == "logistic":
        _need_n(spec, vals, 2, 4)
        params = {"low": vals[0], "height": vals[1]}
        if len(vals) >= 3:
            params["rate"] = vals[2]
        if len(vals) == 4:
            params["center"] = vals[3]
        return hurst_preset("logistic", params)
    if kind in ("table", "custom-table"):
        if len(vals) < 4 or len(vals) % 2:
            raise ConfigError(
                f"table hurst spec needs t,h pairs, got {spec!r}")
        knots = list(zip(vals[0::2], vals[1::2]))
        return hurst_preset("custom-table", {"knots": knots})
    raise ConfigError(f"unknown hurst kind {kind!r} in {spec!r}")


def _need_n(spec, vals, lo, hi):
    if not lo <= len(vals) <= hi:
        raise ConfigError(
            f"hurst spec {spec!r} takes {lo}..{hi} parameters, "
            f"got {len(vals)}")


def read_config_file(path: str) -> dict:
    """Flat key=value file; blank lines and # comments ignored."""
    out = {}
    field_types = {f.name: f.type for f in fields(RunConfig)}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for i, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key:
            raise ConfigError(
                f"{path}:{i}: expected key=value, got {line!r}")
        if key not in field_types or key in ("command", "preset"):
            raise ConfigError(f"{path}:{i}: unknown config key {key!r}")
        out[key] = _coerce(key, value, i, path)
    return out


def _coerce(key, value, lineno, path):
    int_keys = {"J_hf", "J_lf", "seed", "n_points", "J", "u_points",
                "Jmin", "Jmax", "replicates", "n_samples"}
    float_keys = {"alpha", "v"}
    if key == "allow_boundary":
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{path}:{lineno}: bad boolean {value!r}")
    try:
        if key in int_keys:
            return int(value)
        if key in float_keys:
            return float(value)
    except ValueError:
        raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}")
    return value


# ------------------------------------------------------------- rendering --

_SERIES_STYLE = (("y1", "#1f77b4"), ("y2", "#d62728"), ("y", "#2ca02c"))


def render_path_svg(sample) -> str:
    """Static self-contained SVG of the three path columns.

    Output is a pure function of the sample, so identical inputs give
    byte-identical files.
    """
    t = np.asarray(sample.t_grid, dtype=float)
    if t.size == 0:
        raise ConfigError("no data rows to render")
    series = [np.asarray(getattr(sample, name), dtype=float)
              for name, _ in _SERIES_STYLE]
    width, height = 920.0, 560.0
    ml, mr, mt, mb = 70.0, 24.0, 44.0, 52.0
    pw, ph = width - ml - mr, height - mt - mb
    t0, t1 = float(t[0]), float(t[-1])
    tspan = t1 - t0 if t1 > t0 else 1.0
    lo = min(float(np.min(s)) for s in series)
    hi = max(float(np.max(s)) for s in series)
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def sx(val):
        return ml + (val - t0) / tspan * pw

    def sy(val):
        return mt + (hi - val) / (hi - lo) * ph

    cfg = dict(sample.config)
    desc = json.dumps(cfg, sort_keys=True)
    desc = desc.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    title_bits = []
    for key in ("alpha", "seed", "J_hf", "J_lf", "mode"):
        if key in cfg:
            title_bits.append(f"{key}={cfg[key]}")
    hcfg = cfg.get("hurst", {})
    if isinstance(hcfg, dict) and "kind" in hcfg:
        title_bits.append(f"hurst={hcfg['kind']}")
    if cfg.get("clamped"):
        title_bits.append("clamped")
    title = " ".join(title_bits)

    parts = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">')
    parts.append(f"<desc>{desc}</desc>")
    parts.append(f'<rect x="0" y="0" width="{width:.0f}" '
                 f'height="{height:.0f}" fill="#ffffff"/>')
    parts.append(
        f'<text x="{ml:.1f}" y="24" font-family="monospace" '
        f'font-size="13" fill="#333333">{title}</text>')
    parts.append(
        f'<rect x="{ml:.1f}" y="{mt:.1f}" width="{pw:.1f}" '
        f'height="{ph:.1f}" fill="none" stroke="#888888"/>')
    for i in range(6):
        frac = i / 5.0
        tx = t0 + frac * tspan
        px = sx(tx)
        parts.append(
            f'<line x1="{px:.3f}" y1="{mt + ph:.3f}" x2="{px:.3f}" '
            f'y2="{mt + ph + 5:.3f}" stroke="#888888"/>')
        parts.append(
            f'<text x="{px:.3f}" y="{mt + ph + 20:.3f}" '
            f'font-family="monospace" font-size="11" fill="#333333" '
            f'text-anchor="middle">{tx:.3g}</text>')
        ty = lo + frac * (hi - lo)
        py = sy(ty)
        parts.append(
            f'<line x1="{ml - 5:.3f}" y1="{py:.3f}" x2="{ml:.3f}" '
            f'y2="{py:.3f}" stroke="#888888"/>')
        parts.append(
            f'<text x="{ml - 9:.3f}" y="{py + 4:.3f}" '
            f'font-family="monospace" font-size="11" fill="#333333" '
            f'text-anchor="end">{ty:.4g}</text>')
    parts.append(
        f'<text x="{ml + pw / 2:.3f}" y="{height - 12:.3f}" '
        f'font-family="monospace" font-size="12" fill="#333333" '
        f'text-anchor="middle">t</text>')
    for idx, ((name, color), vals) in enumerate(zip(_SERIES_STYLE, series)):
        if t.size == 1:
            parts.append(
                f'<circle cx="{sx(t[0]):.3f}" cy="{sy(vals[0]):.3f}" '
                f'r="4" fill="{color}"/>')
        else:
            pts = " ".join(f"{sx(a):.3f},{sy(b):.3f}"
                           for a, b in zip(t, vals))
            parts.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" '
                f'stroke-width="1.2"/>')
        parts.append(
            f'<text x="{ml + pw - 14:.3f}" y="{mt + 18 + 16 * idx:.3f}" '
            f'font-family="monospace" font-size="12" fill="{color}" '
            f'text-anchor="end">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ------------------------------------------------------------- workflows --

def _out_paths(config: RunConfig, fallback: str):
    base = config.out or (config.preset or fallback)
    if base.endswith(".csv") or base.endswith(".svg"):
        base = base[:-4]
    return base + ".csv", base + ".svg"


def _run_simulate(config: RunConfig) -> int:
    H = parse_hurst_spec(config.hurst)
    n = config.n_points or ((1 << config.J_hf) + 1)
    if n < 1:
        raise ConfigError(f"n_points must be positive, got {n}")
    t_grid = np.linspace(0.0, 1.0, n)
    sample = synthesize_path(
        config.alpha, H, t_grid=t_grid, J_hf=config.J_hf, J_lf=config.J_lf,
        seed=config.seed, mode=config.mode, method=config.method,
        allow_boundary=config.allow_boundary)
    sample.config["cli"] = _config_echo(config)
    csv_path, svg_path = _out_paths(config, "path")
    write_path_csv(sample, csv_path)
    _write_text_atomic(svg_path, render_path_svg(sample))
    print(f"wrote {csv_path} and {svg_path} ({n} points)")
    return 0


def _run_field(config: RunConfig) -> int:
    which = config.which or "total"
    if which not in WHICH:
        raise ConfigError(f"which must be one of {WHICH}, got {which!r}")
    try:
        v_values = sorted(float(x) for x in config.v_values.split(","))
    except ValueError:
        raise ConfigError(f"bad v_values list {config.v_values!r}")
    if config.u_points < 2:
        raise ConfigError(f"u_points must be >= 2, got {config.u_points}")
    if config.J is not None:
        J = config.J
    else:
        J = config.J_hf if which == "hf" else config.J_lf
    domain = EvalDomain(
        u_grid=np.linspace(0.0, 1.0, config.u_points),
        v_grid=np.array(v_values), a=v_values[0], b=v_values[-1])
    pyr = generate_coefficients(
        config.alpha, max(J, config.J_hf, 1), max(J, config.J_lf, 2),
        config.mode, config.seed)
    ps = prefix_sums(pyr)
    sample = evaluate_field(domain, pyr, ps, J, which, config.method)
    lines = ["# config: " + json.dumps(_config_echo(config), sort_keys=True)]
    lines.append("u," + ",".join(repr(float(v)) for v in v_values))
    for i, u in enumerate(domain.u_grid):
        row = ",".join(repr(float(x)) for x in sample.values[i])
        lines.append(f"{float(u)!r},{row}")
    csv_path, _ = _out_paths(config, "field")
    _write_text_atomic(csv_path, "\n".join(lines) + "\n")
    print(f"wrote {csv_path} "
          f"({config.u_points}x{len(v_values)} {which} values at J={J})")
    return 0


def _run_converge(config: RunConfig) -> int:
    J_list = list(range(config.Jmin, config.Jmax + 1))
    report = convergence_study(
        config.which or "hf", config.alpha, (config.v, config.v), J_list,
        config.replicates, config.seed)
    gap = None
    verdict = "NO-SLOPE"
    if report.fitted_slope is not None:
        gap = abs(report.fitted_slope - report.theoretical_slope)
        verdict = "PASS" if gap <= SLOPE_TOLERANCE else "FAIL"
    lines = ["# config: " + json.dumps(_config_echo(config), sort_keys=True)]
    lines.append(f"# grid_spec: {report.grid_spec}")
    if report.fitted_slope is not None:
        lines.append(f"# fitted_slope: {report.fitted_slope!r}")
    lines.append(f"# theoretical_slope: {report.theoretical_slope!r}")
    header = "J,median," + ",".join(f"rep{r}" for r in range(report.replicates))
    lines.append(header)
    for p, J in enumerate(report.J_list):
        cells = [str(J), repr(float(report.medians[p]))]
        cells += [repr(float(x)) for x in report.norms[p]]
        lines.append(",".join(cells))
    csv_path, _ = _out_paths(config, "converge")
    _write_text_atomic(csv_path, "\n".join(lines) + "\n")
    print(f"convergence study {report.which}: alpha={config.alpha} "
          f"v={config.v} J={config.Jmin}..{config.Jmax} "
          f"replicates={config.replicates} seed={config.seed}")
    if report.fitted_slope is not None:
        print(f"fitted slope: {report.fitted_slope:+.4f}")
    print(f"theoretical slope: {report.theoretical_slope:+.4f}")
    if gap is not None:
        print(f"|fitted - theoretical| = {gap:.4f} "
              f"(tolerance {SLOPE_TOLERANCE}): {verdict}")
    else:
        print("single depth, no slope fitted")
    print(f"wrote {csv_path}")
    return 0


def _run_scale_check(config: RunConfig) -> int:
    which = config.which or "hf"
    if which not in ("hf", "lf"):
        raise ConfigError(f"which must be 'hf' or 'lf', got {which!r}")
    if config.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {config.mode!r}")
    J = config.J if config.J is not None else (14 if which == "hf" else 9)
    pairs = SCALE_CHECK_PAIRS
    theory = {}
    for (u, v) in pairs:
        theory[u, v] = (x1_theoretical_scale(u, v, config.alpha)
                        if which == "hf"
                        else x2_theoretical_scale(u, v, config.alpha))
    rows = []
    if config.mode == "consistent":
        if which == "hf":
            samples = mc_x1_samples(pairs, config.alpha, J, config.n_samples,
                                    config.seed)
        else:
            samples = mc_x2_samples(pairs, config.alpha, [J],
                                    config.n_samples, config.seed)[J]
        for i, (u, v) in enumerate(pairs):
            est = estimate_scale(samples[:, i], config.alpha)
            rows.append((u, v, est))
        label = f"estimated scale ({config.n_samples} replicates)"
    else:
        # independent mode has a closed-form truncated scale; no sampling
        for (u, v) in pairs:
            fn = truncated_scale_hf if which == "hf" else truncated_scale_lf
            rows.append((u, v, fn(u, v, config.alpha, J, "independent")))
        label = "exact truncated scale"
    lines = ["# config: " + json.dumps(_config_echo(config), sort_keys=True)]
    lines.append("u,v,J,estimate,target,rel_dev")
    print(f"{which} scale check at J={J}, alpha={config.alpha}, "
          f"mode={config.mode} ({label})")
    print(f"{'u':>6} {'v':>6} {'estimate':>12} {'target':>12} {'rel dev':>9}")
    for (u, v, est) in rows:
        tgt = theory[u, v]
        dev = est / tgt - 1.0
        print(f"{u:6.2f} {v:6.2f} {est:12.6f} {tgt:12.6f} {dev:+9.2%}")
        lines.append(f"{float(u)!r},{float(v)!r},{J},{float(est)!r},"
                     f"{float(tgt)!r},{float(dev)!r}")
    csv_path, _ = _out_paths(config, "scale-check")
    _write_text_atomic(csv_path, "\n".join(lines) + "\n")
    print(f"wrote {csv_path}")
    return 0


def _run_render(config: RunConfig) -> int:
    if not config.input:
        raise ConfigError("render needs an input CSV path")
    sample = read_path_csv(config.input)
    if np.asarray(sample.t_grid).size == 0:
        raise ConfigError(f"{config.input} has no data rows")
    stem = config.input[:-4] if config.input.endswith(".csv") \
        else config.input
    svg_path = config.out or (stem + ".svg")
    if not svg_path.endswith(".svg"):
        svg_path += ".svg"
    _write_text_atomic(svg_path, render_path_svg(sample))
    print(f"wrote {svg_path}")
    return 0


def run(config: RunConfig) -> int:
    """Dispatch a validated RunConfig; returns the process exit status."""
    if config.command not in COMMANDS:
        raise ConfigError(f"unknown command {config.command!r}")
    if config.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {config.mode!r}")
    handler = {
        "simulate": _run_simulate,
        "field": _run_field,
        "converge": _run_converge,
        "scale-check": _run_scale_check,
        "render": _run_render,
    }[config.command]
    return handler(config)


# ------------------------------------------------------------ arg parsing --

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="haarlmsm",
        description="Sample-path synthesis and validation for linear "
                    "(multi)fractional stable motion.")
    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--mode", choices=MODES, default=None)
        p.add_argument("--out", default=None)

    p_sim = sub.add_parser("simulate", help="synthesize one path to CSV+SVG")
    add_common(p_sim)
    p_sim.add_argument("--preset", choices=sorted(PRESETS))
    p_sim.add_argument("--hurst", default=None,
                       help="kind:params, e.g. constant:0.75 or "
                            "logistic:0.65,0.25")
    p_sim.add_argument("--J-hf", dest="J_hf", type=int, default=None)
    p_sim.add_argument("--J-lf", dest="J_lf", type=int, default=None)
    p_sim.add_argument("--n-points", dest="n_points", type=int, default=None)
    p_sim.add_argument("--method", choices=("naive", "abel"), default=None)
    p_sim.add_argument("--allow-boundary", dest="allow_boundary",
                       action="store_true", default=None)

    p_field = sub.add_parser("field", help="evaluate a (u, v) field to CSV")
    add_common(p_field)
    p_field.add_argument("--which", choices=WHICH, default=None)
    p_field.add_argument("--J", type=int, default=None)
    p_field.add_argument("--u-points", dest="u_points", type=int,
                         default=None)
    p_field.add_argument("--v-values", dest="v_values", default=None)
    p_field.add_argument("--method", choices=("naive", "abel"), default=None)

    p_conv = sub.add_parser("converge", help="truncation-rate study")
    add_common(p_conv)
    p_conv.add_argument("--which", choices=("hf", "lf"), default=None)
    p_conv.add_argument("--v", type=float, default=None)
    p_conv.add_argument("--Jmin", type=int, default=None)
    p_conv.add_argument("--Jmax", type=int, default=None)
    p_conv.add_argument("--replicates", type=int, default=None)

    p_scale = sub.add_parser("scale-check",
                             help="marginal scale against theory")
    add_common(p_scale)
    p_scale.add_argument("--which", choices=("hf", "lf"), default=None)
    p_scale.add_argument("--J", type=int, default=None)
    p_scale.add_argument("--n-samples", dest="n_samples", type=int,
                         default=None)

    p_render = sub.add_parser("render", help="path CSV to SVG")
    p_render.add_argument("input", nargs="?", default=None)
    p_render.add_argument("--out", default=None)
    p_render.add_argument("--config", help="flat key=value config file")
    return parser


def build_config(argv) -> RunConfig:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if not ns.command:
        parser.print_usage(sys.stderr)
        raise ConfigError("a command is required")
    config = RunConfig(command=ns.command)
    preset = getattr(ns, "preset", None)
    if preset:
        config.preset = preset
        for key, value in PRESETS[preset].items():
            setattr(config, key, value)
    if getattr(ns, "config", None):
        for key, value in read_config_file(ns.config).items():
            setattr(config, key, value)
    for f in fields(RunConfig):
        value = getattr(ns, f.name, None)
        if value is not None and f.name not in ("command", "preset"):
            setattr(config, f.name, value)
    return config


def main(argv=None) -> int:
    try:
        config = build_config(argv if argv is not None else sys.argv[1:])
        return run(config)
    except HaarLmsmError as exc:
        if isinstance(exc, ValueError):
            print(f"error: config: {exc}", file=sys.stderr)
            return 2
        print(f"error: compute: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
