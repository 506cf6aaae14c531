"""Command-line front end: rate curves versus theta, universal rates versus SNR, LDPC thresholds.

Every command writes a CSV whose first line is ``# schema=<id>``.  Options can
come from a JSON file (``--config``); flags given on the command line win.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import re
import sys
import tempfile
from typing import Any, Sequence

from .errors import ConstructionFailed, QuadratureDivergence, WindowNotBracketing
from .f2algebra import decode_function_from_name, enumerate_partitions, iter_decode_functions, xor_function
from .modulation import NoiseModel, qpsk_gray
from .rates import gain_set, gf4_universal_rate, parallel_map, rate_f, theta_grid, universal_rate

log = logging.getLogger("mlcrelay")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

DEFAULTS: dict[str, dict[str, Any]] = {
    "rates": dict(snr_db=7.0, ell=2, theta_steps=128, grid_2d=False, functions="all", jobs=1,
                  out="rates.csv"),
    "universal": dict(snr_range="0:20:1", ell=2, theta_steps=128, grid_2d=False, jobs=1,
                      out="universal.csv"),
    "ldpc-threshold": dict(thetas="0,pi/4,pi/2", ell=2, functions="best", trials=50, block_length=10000,
                           code_seed=0, window=None, jobs=1, seed=None, out="ldpc_threshold.csv"),
}

SCHEMAS = {
    "rates": "mlcrelay.rates_vs_theta.v1",
    "rates-2d": "mlcrelay.rates_vs_theta_2d.v1",
    "universal": "mlcrelay.universal_vs_snr.v1",
    "ldpc-threshold": "mlcrelay.ldpc_threshold.v1",
}


class ConfigError(ValueError):
    pass


# --- parsing helpers ------------------------------------------------------------

def parse_range(text: str) -> list[float]:
    """``a:b:step`` with both ends included."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"range must look like a:b:step, got {text!r}")
    try:
        a, b, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"non-numeric range {text!r}") from None
    if step <= 0 or b < a or not all(map(math.isfinite, (a, b, step))):
        raise ConfigError(f"need a <= b and step > 0, got {text!r}")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return [round(a + i * step, 10) for i in range(count)]


_ANGLE = re.compile(r"^\s*(?:(-?[0-9.]+)\s*\*?\s*)?(-?)pi(?:\s*/\s*([0-9.]+))?\s*$")


def parse_angle(text: str) -> float:
    """A float in radians, or a multiple of pi such as ``pi/4``, ``3pi/2``, ``-pi``."""
    text = str(text).strip()
    try:
        return float(text)
    except ValueError:
        pass
    m = _ANGLE.match(text)
    if not m:
        raise ConfigError(f"cannot read angle {text!r}")
    value = math.pi * float(m.group(1) or 1.0) / float(m.group(3) or 1.0)
    return -value if m.group(2) else value


def parse_angles(value) -> list[float]:
    items = value if isinstance(value, list) else str(value).split(",")
    out = [parse_angle(v) if isinstance(v, str) else float(v) for v in items]
    if not out:
        raise ConfigError("need at least one theta")
    return out


def select_functions(spec, ell: int):
    if spec in (None, "all"):
        return list(iter_decode_functions(ell))
    names = spec if isinstance(spec, list) else [s for s in str(spec).split(",") if s]
    funcs = []
    for name in names:
        try:
            funcs.append(decode_function_from_name(name.strip(), ell))
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"unknown decoding function {name!r}: {exc}") from None
    if not funcs:
        raise ConfigError("function filter selected nothing")
    return funcs


def _positive_int(cfg: dict, key: str, low: int = 1) -> int:
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v or v < low:
        raise ConfigError(f"{key} must be an integer >= {low}, got {v!r}")
    return int(v)


def _check_common(cfg: dict) -> None:
    if cfg.get("ell") != 2:
        raise ConfigError("only ell=2 (Gray-labelled QPSK) is available")
    _positive_int(cfg, "jobs")
    if not cfg.get("out"):
        raise ConfigError("an output path is required")


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def write_csv(path: str, schema: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    """Write to a sibling temp file and rename, so readers never see partial output."""
    buf = io.StringIO()
    buf.write(f"# schema={schema}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- commands -------------------------------------------------------------------

def _rates_for_gain(args):
    c, h, funcs, noise = args
    return [rate_f(c, h, f, noise) for f in funcs]


def cmd_rates_vs_theta(cfg: dict) -> int:
    _check_common(cfg)
    steps = _positive_int(cfg, "theta_steps")
    snr = float(cfg["snr_db"])
    c = qpsk_gray()
    funcs = select_functions(cfg["functions"], c.ell)
    gains = gain_set(steps, bool(cfg["grid_2d"]))
    noise = NoiseModel.from_snr_db(snr)
    specs = enumerate_partitions(c.ell)
    log.info("rates: %d gains x %d functions at %.3g dB", len(gains), len(funcs), snr)
    reports = parallel_map(_rates_for_gain, [(c, h, tuple(funcs), noise) for h in gains], cfg["jobs"])

    two_d = bool(cfg["grid_2d"])
    header = ["theta_rad"] + (["theta_b_rad"] if two_d else []) + ["f_id"]
    header += [f"term_{s.label}" for s in specs]
    header += ["rate_bits_per_binary_symbol", "sum_rate_bits_per_symbol"]
    rows = []
    grid = [float(t) for t in theta_grid(steps)]
    phases = [[ta, tb] for ta in grid for tb in grid] if two_d else [[t] for t in grid]
    for th, per_f in zip(phases, reports):
        for rep in per_f:
            rows.append(th + [rep.f_id] + [float(rep.terms[s]) for s in specs]
                        + [float(rep.rate), float(rep.sum_rate)])
    universal = min(max(rep.rate for rep in per_f) for per_f in reports)
    rows.append(["universal"] + ([""] if two_d else []) + ["best"] + [None] * len(specs)
                + [float(universal), float(c.ell * universal)])
    write_csv(cfg["out"], SCHEMAS["rates-2d" if two_d else "rates"], header, rows)
    return 0


def cmd_universal_vs_snr(cfg: dict) -> int:
    _check_common(cfg)
    steps = _positive_int(cfg, "theta_steps")
    snrs = parse_range(cfg["snr_range"])
    c = qpsk_gray()
    funcs = list(iter_decode_functions(c.ell))
    xor = xor_function(c.ell)
    gains = gain_set(steps, bool(cfg["grid_2d"]))
    rows = []
    for snr in snrs:
        noise = NoiseModel.from_snr_db(snr)
        mlc, table = universal_rate(c, gains, funcs, noise, cfg["jobs"])
        gf4 = gf4_universal_rate(c, gains, noise, cfg["jobs"])
        fixed = min(parallel_map(_xor_rate, [(c, h, xor, noise) for h in gains], cfg["jobs"]))
        log.info("universal: %.3g dB mlc=%.4f gf4=%.4f xor=%.4f", snr, c.ell * mlc, gf4, fixed)
        rows.append([float(snr), float(c.ell * mlc), float(gf4), float(fixed)])
    write_csv(cfg["out"], SCHEMAS["universal"],
              ["snr_db", "mlc_universal", "gf4_universal", "fixed_xor_baseline"], rows)
    return 0


def _xor_rate(args) -> float:
    c, h, f, noise = args
    return rate_f(c, h, f, noise).sum_rate


def cmd_ldpc_threshold(cfg: dict) -> int:
    from .ldpc import cached_code, required_snr

    _check_common(cfg)
    if cfg.get("seed") is None:
        raise ConfigError("ldpc-threshold needs --seed")
    seed = _positive_int(cfg, "seed", 0)
    trials = _positive_int(cfg, "trials")
    n = _positive_int(cfg, "block_length", 96)
    if n % 2:
        raise ConfigError("block length must be even")
    code_seed = _positive_int(cfg, "code_seed", 0)
    thetas = parse_angles(cfg["thetas"])
    policy = cfg["functions"]
    if policy != "best":
        select_functions(policy, 2)
    window = None
    if cfg.get("window"):
        lo, hi = (float(v) for v in str(cfg["window"]).split(":"))
        if hi <= lo:
            raise ConfigError("window must be lo:hi with lo < hi")
        window = (lo, hi)
    code = cached_code(n, code_seed)
    rows = []
    for th in thetas:
        res = required_snr(th, code, policy, trials, window, seed=seed, jobs=cfg["jobs"])
        log.info("ldpc: theta=%.4f f=%s thr=%.3f sim=%.1f", th, res["f"], res["theoretical_snr_db"],
                 res["simulated_snr_db"])
        label = f"best:{res['f']}" if policy == "best" else res["f"]
        rows.append([float(th), float(res["theoretical_snr_db"]), float(res["simulated_snr_db"]),
                     float(round(res["gap_db"], 10)), label])
    write_csv(cfg["out"], SCHEMAS["ldpc-threshold"],
              ["theta_rad", "theoretical_snr_db", "simulated_snr_db", "gap_db", "f_policy"], rows)
    return 0


COMMANDS = {
    "rates": cmd_rates_vs_theta,
    "universal": cmd_universal_vs_snr,
    "ldpc-threshold": cmd_ldpc_threshold,
}


# --- argument handling ------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mlcrelay", description="Rate bounds and LDPC checks for multilevel-coded two-way relaying.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    S = argparse.SUPPRESS

    def common(sp):
        sp.add_argument("--config", default=S, help="JSON file with option values")
        sp.add_argument("--ell", type=int, default=S)
        sp.add_argument("--jobs", type=int, default=S, help="worker processes")
        sp.add_argument("--out", default=S, help="output CSV path")
        sp.add_argument("-v", "--verbose", action="store_true", default=S)

    sp = sub.add_parser("rates", help="per-f rate bounds over the theta grid")
    common(sp)
    sp.add_argument("--snr-db", type=float, default=S)
    sp.add_argument("--theta-steps", type=int, default=S, help="grid points over [0, 2pi)")
    sp.add_argument("--grid-2d", action="store_true", default=S)
    sp.add_argument("--functions", default=S, help="'all' or comma-separated ids, e.g. xor,rxor,6_9")

    sp = sub.add_parser("universal", help="universal MLC, GF(4) and fixed-xor rates over SNR")
    common(sp)
    sp.add_argument("--snr-range", default=S, help="a:b:step in dB, ends included")
    sp.add_argument("--snr-db", type=float, default=S, help="single SNR instead of a range")
    sp.add_argument("--theta-steps", type=int, default=S)
    sp.add_argument("--grid-2d", action="store_true", default=S)

    sp = sub.add_parser("ldpc-threshold", help="required SNR of the (3,6) LDPC relay decoder")
    common(sp)
    sp.add_argument("--seed", type=int, default=S)
    sp.add_argument("--trials", type=int, default=S)
    sp.add_argument("--block-length", type=int, default=S)
    sp.add_argument("--code-seed", type=int, default=S)
    sp.add_argument("--thetas", default=S, help="comma-separated angles, e.g. 0,pi/4,pi/2")
    sp.add_argument("--functions", default=S, help="'best' or a single function id")
    sp.add_argument("--window", default=S, help="absolute search window lo:hi in dB")
    return p


def load_config(argv: Sequence[str] | None = None) -> tuple[str, dict]:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    cfg = dict(DEFAULTS[command])
    cfg["verbose"] = False
    path = args.pop("config", None)
    if path:
        try:
            with open(path) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        loaded = {k.replace("-", "_"): v for k, v in loaded.items()}
        unknown = set(loaded) - set(cfg) - {"snr_db"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    cfg.update(args)
    if command == "universal" and cfg.get("snr_db") is not None:
        if "snr_range" not in args:
            cfg["snr_range"] = f"{cfg['snr_db']}:{cfg['snr_db']}:1"
    return command, cfg


def main(argv: Sequence[str] | None = None) -> int:
    try:
        command, cfg = load_config(argv)
    except ConfigError as exc:
        print(f"mlcrelay: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if cfg.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[command](cfg)
    except ConfigError as exc:
        print(f"mlcrelay: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureDivergence, WindowNotBracketing, ConstructionFailed, ArithmeticError) as exc:
        print(f"mlcrelay: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
