"""Command-line experiments.

Every subcommand takes an optional flat ``key = value`` config file; the
resolved settings (defaults included) go into ``manifest.json`` next to the
CSV output, so a run can be repeated from its manifest alone.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import subprocess
import sys
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import __version__
from ._accel import backend_name

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_MISSING_ASSET = 3


class SchemaError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


def _ints(text):
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options):
    def conv(text):
        if text not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return text

    return conv


RULES = ("F", "xor", "identity", "shift")

SCHEMAS = {
    "simulate": {
        "rule": (_choice(*RULES), "F"),
        "initial": (str, ""),
        "origin": (int, -1),
        "steps": (int, 9),
        "left_fill": (_choice("0", "none"), "0"),
    },
    "lyapunov": {
        "rule": (_choice(*RULES), "F"),
        "side": (_choice("+", "-"), "+"),
        "n_grid": (_ints, [32, 64, 128, 256]),
        "samples": (int, 50),
        "budget": (int, 32),
        "upper_only": (_bool, False),
        "nu": (float, 2 / 3),
        "burn_in_T": (int, 256),
    },
    "period": {
        "lengths": (_ints, [3]),
        "counters": (int, 24),
        "steps": (int, 0),
        "terms": (int, 24),
    },
    "entropy": {
        "source": (_choice("stationary", "bernoulli"), "stationary"),
        "k": (int, 8),
        "samples": (int, 20000),
        "column_rule": (_choice(*RULES, "none"), "none"),
        "column_T": (_ints, [64, 128, 256]),
        "column_w": (int, 1),
        "nu": (float, 2 / 3),
        "burn_in_T": (int, 256),
    },
    "uniformity": {
        "samples": (int, 20000),
        "classes": (_ints, [3, 4]),
        "index": (int, 0),
        "nu": (float, 2 / 3),
        "burn_in_T": (int, 256),
    },
    "sensitivity": {
        "pairs": (int, 100),
        "depth": (int, 1),
        "horizon": (int, 100000),
        "half_width": (int, 30),
        "nu": (float, 2 / 3),
    },
    "expansive": {
        "rule": (_choice(*RULES[1:]), "xor"),
        "cap": (int, 6),
        "t_max": (int, 8),
        "n_max": (int, 64),
    },
}


def read_config(path):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"line {lineno}", "expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = v
    return out


def resolve(command, raw):
    schema = SCHEMAS[command]
    cfg = {k: d for k, (_, d) in schema.items()}
    for k, v in raw.items():
        if k not in schema:
            raise SchemaError(k, f"unknown for '{command}' (allowed: {', '.join(sorted(schema))})")
        conv = schema[k][0]
        try:
            cfg[k] = conv(v) if isinstance(v, str) else v
        except ValueError as exc:
            raise SchemaError(k, str(exc)) from exc
    return cfg


def _describe():
    try:
        here = os.path.dirname(os.path.abspath(__file__))
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"], cwd=here, capture_output=True, text=True, timeout=5
        )
        if res.returncode == 0 and res.stdout.strip():
            return f"{__version__}+g{res.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    version: str = field(default_factory=_describe)
    backend: str = field(default_factory=backend_name)
    wall_time_s: float = 0.0
    outputs: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def digest(self):
        blob = json.dumps({"command": self.command, "config": self.config, "seed": self.seed}, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def write(self, out_dir):
        path = os.path.join(out_dir, "manifest.json")
        data = {
            "command": self.command,
            "config_digest": self.digest,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "backend": self.backend,
            "wall_time_s": round(self.wall_time_s, 3),
            "outputs": self.outputs,
            **self.extra,
        }
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2, default=str)
        return path


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def _rule(name):
    from .automaton import F_RULE
    from .engine import identity_rule, shift_rule, xor_rule

    return {"F": lambda: F_RULE, "xor": xor_rule, "identity": identity_rule, "shift": shift_rule}[name]()


# ---------------------------------------------------------------------------
# fixture check


def _asset_text(name, asset_dir=None):
    if asset_dir is not None:
        path = os.path.join(asset_dir, name)
        if not os.path.exists(path):
            raise FileNotFoundError(path)
        with open(path) as fh:
            return fh.read()
    return resources.files("countca").joinpath("data", name).read_text()


def fixture_check(rule=None, asset_dir=None, stream=sys.stdout):
    """Regenerate the worked example from its first row; exit status."""
    from .automaton import COUNTER_ALPHABET, F_RULE, orbit_F
    from .engine import WindowConfig, parse_diagram
    from .model import phi, run_H

    rule = rule or F_RULE
    try:
        fig1 = parse_diagram(_asset_text("figure1.txt", asset_dir), COUNTER_ALPHABET)
        fig2 = [tuple(int(v) for v in ln.split(":")) for ln in _asset_text("figure2_left.txt", asset_dir).splitlines() if ln.strip() and not ln.startswith("#")]
    except (FileNotFoundError, OSError) as exc:
        print(f"fixture asset missing: {exc}", file=stream)
        return EXIT_MISSING_ASSET
    first = fig1.rows[0]
    x = WindowConfig(first.cells, origin=first.origin, left_fill=0, separated=True)
    sim = orbit_F(x, len(fig1.rows) - 1, rule)
    for k, (want, got) in enumerate(zip(fig1.rows, sim.rows)):
        for j, sym in enumerate(want.cells):
            c = want.origin + j
            try:
                v = got.at(c)
            except Exception:
                print(f"row {k} col {c}: outside the simulated validity", file=stream)
                return EXIT_MISMATCH
            if v != sym:
                a = COUNTER_ALPHABET.chars
                print(f"mismatch at row {k} col {c}: expected {a[sym]} got {a[v]}", file=stream)
                print(f"  expected {COUNTER_ALPHABET.decode(want.cells)}", file=stream)
                print(f"  got      {''.join(a[got.at(want.origin + i)] for i in range(len(want.cells)))}", file=stream)
                return EXIT_MISMATCH
    line = phi(sim.rows[0])
    _, _, (hc, hr) = run_H(line, len(fig2) - 1, record=True)
    for k, want in enumerate(fig2):
        from_ca = phi(sim.rows[k]).counters()[0]
        got_ca = (from_ca.l, from_ca.c, from_ca.r)
        got_h = (int(line.l[0]), int(hc[k, 0]), int(hr[k, 0]))
        if got_ca != want or got_h != want:
            print(f"factor mismatch at row {k}: expected {want}, phi {got_ca}, H {got_h}", file=stream)
            return EXIT_MISMATCH
    print(f"fixture ok: {len(fig1.rows)} rows, {len(fig2)} factor states", file=stream)
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiments


def cmd_simulate(cfg, seed, out, args):
    from .automaton import COUNTER_ALPHABET
    from .engine import BINARY, WindowConfig, format_diagram, orbit

    rule = _rule(cfg["rule"])
    alpha = COUNTER_ALPHABET if cfg["rule"] == "F" else BINARY
    if cfg["initial"]:
        cells = alpha.encode(cfg["initial"])
    elif cfg["rule"] == "F":
        from .automaton import FIGURE1_ROWS

        cells = alpha.encode(FIGURE1_ROWS[0])
    else:
        cells = np.random.default_rng(seed).integers(0, 2, size=4 * cfg["steps"] + 21).astype(np.uint8)
    fill = None if cfg["left_fill"] == "none" else 0
    x = WindowConfig(cells, origin=cfg["origin"], left_fill=fill, separated=cfg["rule"] == "F" and fill == 0)
    text = format_diagram(orbit(x, rule, cfg["steps"]), alpha)
    path = os.path.join(out, "diagram.txt")
    with open(path, "w") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return [path], {}


def _binary_sampler(width):
    from .engine import WindowConfig

    def draw(rng):
        return WindowConfig(rng.integers(0, 2, size=2 * width + 1).astype(np.uint8), origin=-width)

    return draw


def _f_sampler(params, extent):
    from .measures import MeasureParams, cesaro_burnin, sample_stationary

    p = MeasureParams(params.nu, 3, 2, params.burn_in_T, params.seed, extent + 2 * params.burn_in_T)

    def draw(rng):
        return cesaro_burnin(sample_stationary(p, rng), params.burn_in_T, rng)[0]

    return draw


def cmd_lyapunov(cfg, seed, out, args):
    from .lyapunov import average_exponents, reach_bound
    from .measures import MeasureParams

    rule = _rule(cfg["rule"])
    params = MeasureParams(nu=cfg["nu"], burn_in_T=cfg["burn_in_T"], seed=seed)
    nmax = max(cfg["n_grid"])
    extent = reach_bound(rule, nmax, "+") + reach_bound(rule, nmax, "-") + 40
    sampler = _f_sampler(params, extent) if cfg["rule"] == "F" else _binary_sampler(extent)
    est = average_exponents(
        sampler, rule, cfg["n_grid"], cfg["samples"], seed, cfg["side"], cfg["budget"], cfg["upper_only"], params
    )
    path = os.path.join(out, "exponents.csv")
    est.write_csv(path)
    for row in est.rows():
        print(f"n={row['n']:>4} side={row['side']} lower/n={row['lower_mean']:.4f} upper/n={row['upper_mean']:.4f}")
    return [path], {"exponents": est.manifest}


def cmd_period(cfg, seed, out, args):
    from .model import CounterLine, real_period_empirical, real_period_formula

    pattern = cfg["lengths"]
    m = cfg["counters"]
    ls = [pattern[(m - 1 - i) % len(pattern)] for i in range(m)]
    ls = ls[::-1]  # last counter gets pattern[0]
    rng = np.random.default_rng(seed)
    cs = [int(rng.integers(0, 1 << L)) for L in ls]
    line = CounterLine(ls, cs, [0] * m, left="silent")
    steps = cfg["steps"] or 100 * (1 << max(pattern))
    if args.horizon:
        steps = args.horizon
    rows = []
    i = m - 1
    est = real_period_formula(ls[::-1][: cfg["terms"]])
    emp = real_period_empirical(line, i, steps)
    lo, hi = emp.bracket
    rows.append(
        [i, ":".join(map(str, pattern)), str(est.value), f"{float(est.value):.10f}", f"{float(est.truncation_error):.3e}",
         steps, emp.count, f"{emp.frequency:.10f}", f"{lo:.10f}", f"{hi:.10f}", int(emp.in_bracket)]
    )
    path = os.path.join(out, "period.csv")
    _write_csv(
        path,
        ["counter", "pattern", "rate_exact", "rate", "tail_bound", "steps", "overflows", "frequency", "bracket_lo", "bracket_hi", "in_bracket"],
        rows,
    )
    print(f"rate {float(est.value):.6f} (period {float(1 / est.value):.4f}); empirical {emp.frequency:.6f} in [{lo:.6f}, {hi:.6f}]")
    return [path], {}


def cmd_entropy(cfg, seed, out, args):
    from .measures import MeasureParams, block_entropy, column_entropy, renewal_entropy_rate, sample_batch

    rng = np.random.default_rng(seed)
    n, k = cfg["samples"], cfg["k"]
    rows = []
    if cfg["source"] == "bernoulli":
        blocks = rng.integers(0, 2, size=(n, k)).astype(np.uint8)
        oracle = float(np.log(2))
    else:
        params = MeasureParams(nu=cfg["nu"], burn_in_T=cfg["burn_in_T"], seed=seed)
        blocks = sample_batch(params, n, 0, k - 1, rng)
        oracle = renewal_entropy_rate(cfg["nu"])
    est = block_entropy(blocks, k)
    rows.append(["spatial", k, f"{est.block:.6f}", f"{est.difference:.6f}", f"{est.coverage:.4f}", f"{est.stderr:.6f}", n, f"{oracle:.6f}"])
    print(f"spatial k={k}: block {est.block:.4f} difference {est.difference:.4f} +- {est.stderr:.4f} nats (oracle {oracle:.4f})")
    if cfg["column_rule"] != "none":
        rule = _rule(cfg["column_rule"])
        Tmax = max(cfg["column_T"])
        w = cfg["column_w"]
        m = min(n, 4000)
        if cfg["column_rule"] == "F":
            params = MeasureParams(nu=cfg["nu"], burn_in_T=cfg["burn_in_T"], seed=seed)
            left = 2 * (cfg["burn_in_T"] + Tmax) + 2
            cells = sample_batch(params, m, left, w - 1, rng)
            burn = rng.integers(0, cfg["burn_in_T"], size=m)
        else:
            r = rule.radius
            cells = rng.integers(0, 2, size=(m, 2 * r * Tmax + w + 2)).astype(np.uint8)
            burn = None
        for T in sorted(cfg["column_T"]):
            c = column_entropy(cells, rule, T, w, burn=burn, col=(cells.shape[1] - w) if cfg["column_rule"] == "F" else None)
            rows.append(["column", T, f"{c.block:.6f}", f"{c.difference:.6f}", f"{c.coverage:.4f}", f"{c.stderr:.6f}", m, ""])
            print(f"column T={T}: {c.block:.4f} nats/step (coverage {c.coverage:.3f})")
    path = os.path.join(out, "entropy.csv")
    _write_csv(path, ["kind", "k_or_T", "block", "difference", "coverage", "stderr", "samples", "oracle"], rows)
    return [path], {}


def cmd_uniformity(cfg, seed, out, args):
    from .measures import MeasureParams, draw_samples, uniformity_check

    params = MeasureParams(nu=cfg["nu"], burn_in_T=cfg["burn_in_T"], seed=seed, half_width=2, extent=16)
    samples, man = draw_samples(params, cfg["samples"])
    res = uniformity_check(samples, cfg["index"], tuple(cfg["classes"]))
    rows = [[c.length, c.count, "" if c.tv is None else f"{c.tv:.6f}", c.note, cfg["burn_in_T"]] for c in res]
    for c in res:
        print(f"l={c.length}: n={c.count} TV={c.tv if c.tv is None else round(c.tv, 4)} {c.note}")
    path = os.path.join(out, "uniformity.csv")
    _write_csv(path, ["length", "count", "tv", "note", "burn_in_T"], rows)
    return [path], {"burn_in_T": cfg["burn_in_T"]}


def cmd_sensitivity(cfg, seed, out, args):
    from .expansivity import mu_expansiveness_stat, sample_silent_line, sensitivity_divergence, write_divergence_csv
    from .measures import MeasureParams

    params = MeasureParams(nu=cfg["nu"], half_width=cfg["half_width"], seed=seed)
    recs = []
    for i, ss in enumerate(np.random.SeedSequence(seed).spawn(cfg["pairs"])):
        x = sample_silent_line(params, np.random.default_rng(ss))
        recs.append(sensitivity_divergence(x, cfg["depth"], T_max=cfg["horizon"], pair=i))
    path = os.path.join(out, "divergence.csv")
    write_divergence_csv(recs, path)
    div = sum(not r.censored for r in recs)
    pos = sum(r.gap > 0 for r in recs)
    mu = mu_expansiveness_stat(params, cfg["pairs"], cfg["horizon"], cfg["depth"])
    print(f"resize depth {cfg['depth']}: diverged {div}/{len(recs)}, positive period gap {pos}/{len(recs)}")
    print(f"resample depth {cfg['depth']}: diverged fraction {mu.fraction:.3f}")
    return [path], {"diverged": div, "positive_gap": pos, "mu_fraction": mu.fraction}


def cmd_expansive(cfg, seed, out, args):
    from .engine import WindowConfig
    from .expansivity import expansive_growth_check, find_nplus
    from .lyapunov import pointwise_exponents

    rule = _rule(cfg["rule"])
    rep = find_nplus(rule, cfg["cap"])
    print(rep.summary())
    rows = []
    x = WindowConfig(np.random.default_rng(seed).integers(0, 2, size=8 * cfg["n_max"] + 41).astype(np.uint8), origin=-4 * cfg["n_max"] - 20)
    grid = sorted({1, 2, 4, 6, 8, 16, 32, cfg["n_max"]} - {0})
    for side in ("+", "-"):
        for b in pointwise_exponents(x, rule, [n for n in grid if n <= cfg["n_max"]], side, budget=64, seed=seed):
            rows.append([side, b.n, b.lower, b.upper, f"{b.lower / b.n:.4f}", f"{b.upper / b.n:.4f}"])
    growth = expansive_growth_check(rule, rep, x, cfg["t_max"]) if rep.found else None
    path = os.path.join(out, "expansive.csv")
    _write_csv(path, ["side", "n", "lower", "upper", "lower_over_n", "upper_over_n"], rows)
    cert = os.path.join(out, "nplus_certificate.json")
    with open(cert, "w") as fh:
        json.dump(
            {"rule": rule.name, "cap": rep.cap, "n_plus": rep.n_plus, "n_minus": rep.n_minus,
             "lambda_bound": str(rep.lambda_bound), "patterns": rep.patterns,
             "growth": growth.status if growth else "not run"}, fh, indent=2)
    return [path, cert], {}


COMMANDS = {
    "simulate": cmd_simulate,
    "lyapunov": cmd_lyapunov,
    "period": cmd_period,
    "entropy": cmd_entropy,
    "uniformity": cmd_uniformity,
    "sensitivity": cmd_sensitivity,
    "expansive": cmd_expansive,
}


_HELP = {
    "simulate": "space-time diagram of a rule from a given row",
    "lyapunov": "mean perturbation-depth brackets over sampled configurations",
    "period": "exact and empirical overflow rates of counter lines",
    "entropy": "spatial block entropy or temporal column entropy",
    "uniformity": "conditional law of counter states per length class",
    "sensitivity": "divergence after resizing one counter on silent lines",
    "expansive": "exhaustive N+/N- search and growth check on a reference rule",
}


def build_parser():
    p = argparse.ArgumentParser(prog="countca", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    fc = sub.add_parser("fixture-check", help="regenerate the worked example and compare")
    fc.add_argument("--assets", default=None, help="directory holding the fixture files")
    for name in COMMANDS:
        sp = sub.add_parser(name, help=_HELP[name])
        sp.add_argument("--config", default=None)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="out")
        sp.add_argument("--samples", type=int, default=None)
        sp.add_argument("--horizon", type=int, default=None)
    return p


_SAMPLE_KEY = {"lyapunov": "samples", "entropy": "samples", "uniformity": "samples", "sensitivity": "pairs"}
_HORIZON_KEY = {"simulate": "steps", "sensitivity": "horizon", "period": "steps"}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "fixture-check":
        return fixture_check(asset_dir=args.assets)
    try:
        raw = read_config(args.config) if args.config else {}
        cfg = resolve(args.command, raw)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.samples is not None and args.command in _SAMPLE_KEY:
        cfg[_SAMPLE_KEY[args.command]] = args.samples
    if args.horizon is not None and args.command in _HORIZON_KEY:
        cfg[_HORIZON_KEY[args.command]] = args.horizon
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    outputs, extra = COMMANDS[args.command](cfg, args.seed, args.out, args)
    man = RunManifest(args.command, cfg, args.seed, outputs=outputs, extra=extra)
    man.wall_time_s = time.perf_counter() - t0
    man.write(args.out)
    return EXIT_OK


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())