"""Command-line front end, run as ``python -m cmexplore``.

Every subcommand writes its files atomically into ``--out`` and prints a
one-line JSON summary on stdout. Exit codes: 0 success, 1 usage error,
2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .ctmc import BandControl, simulate, write_path
from .degree_ld import DegreeConfigTarget, degree_ld_report, read_target
from .degree_model import build_model, from_distribution, from_sequence, sequence_from_distribution
from .eea import eea_run, write_log
from .errors import InvalidInput, NumericalFailure
from .graph_gen import component_summary, components_of, uniform_matching
from .lln import lln_path
from .mc import EventSpec, is_probability, mc_probability, mc_sweep, write_sweep
from .rate import PathPair, rate_integral

SCHEMA_VERSION = 1
ENV_PREFIX = "CMX_"

# option name -> (type, default); shared by flags, config files and env
OPTIONS = {
    "degrees": (str, None),
    "dist": (str, None),
    "n": (int, None),
    "seed": (int, None),
    "replicas": (int, 1000),
    "threads": (int, 1),
    "grid": (int, 10001),
    "horizon": (float, None),
    "eps": (float, 0.02),
    "out": (str, "."),
    "target": (str, None),
    "path": (str, None),
    "tilt": (float, None),
    "phi": (str, None),
    "weight": (str, "auto"),
    "sizes": (str, "50,100,200,400"),
    "stride": (int, 1),
    "tail_tol": (float, 1e-12),
}
STOCHASTIC = {"generate", "explore", "simulate-ct", "mc", "mc-sweep", "is"}

HELP_EPILOG = f"""\
inputs:
  --degrees FILE   degree sequence, one positive integer per line
  --dist FILE      probability table, one "k probability" record per line
  --target FILE    target configuration, one "k q_k" record per line
                   (an optional "eps value" line sets the half-width)

configuration:
  --config FILE holds "key = value" lines with keys named like the long
  flags (dashes or underscores) and a required "schema_version = {SCHEMA_VERSION}".
  Environment variables {ENV_PREFIX}<KEY> (e.g. {ENV_PREFIX}SEED, {ENV_PREFIX}REPLICAS)
  override the file; command-line flags override both.

exit codes: 0 ok, 1 usage, 2 invalid input, 3 numerical failure
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="key = value configuration file")
    for name in OPTIONS:
        g.add_argument("--" + name.replace("_", "-"), dest=name, default=None)

    parser = _Parser(
        prog="python -m cmexplore",
        description="Configuration-model exploration, limit paths and large-deviation rates.",
        epilog=HELP_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    docs = {
        "degseq": "degree input checks (use: degseq check)",
        "generate": "sample a configuration-model multigraph",
        "explore": "run the edge-exploration algorithm and log its excursions",
        "simulate-ct": "simulate the scaled continuous-time process",
        "lln": "limit path on a uniform grid",
        "rate": "rate of a path (the limit path when --path is absent)",
        "degree-ld": "degree-configuration decay rate of a target",
        "mc": "plain Monte Carlo estimate of the target event",
        "mc-sweep": "plain estimates over several sizes, as CSV",
        "is": "importance-sampling estimate under a band control",
    }
    for name, text in docs.items():
        p = sub.add_parser(
            name, parents=[common], help=text, description=text, epilog=HELP_EPILOG,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        if name == "degseq":
            p.add_argument("action", choices=["check"])
    return parser


def read_config(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInput(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    version = values.pop("schema_version", None)
    if version is None:
        raise InvalidInput("config file lacks schema_version")
    if int(version) != SCHEMA_VERSION:
        raise InvalidInput(f"unsupported config schema_version {version} (expected {SCHEMA_VERSION})")
    unknown = set(values) - set(OPTIONS)
    if unknown:
        raise InvalidInput(f"unknown config keys: {', '.join(sorted(unknown))}")
    return values


def resolve(args: argparse.Namespace, environ=None) -> dict:
    """Merge defaults, config file, environment and flags, then convert types."""
    environ = os.environ if environ is None else environ
    raw = {name: default for name, (_, default) in OPTIONS.items()}
    if args.config:
        raw.update(read_config(args.config))
    for name in OPTIONS:
        env = environ.get(ENV_PREFIX + name.upper())
        if env is not None:
            raw[name] = env
    for name in OPTIONS:
        v = getattr(args, name)
        if v is not None:
            raw[name] = v
    out = {}
    for name, (kind, _) in OPTIONS.items():
        v = raw[name]
        if v is None or isinstance(v, kind):
            out[name] = v
            continue
        try:
            out[name] = kind(v)
        except ValueError:
            raise UsageError(f"--{name.replace('_', '-')}: cannot read {v!r} as {kind.__name__}")
    if out["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    if out["replicas"] < 1:
        raise UsageError("--replicas must be >= 1")
    return out


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True)


def read_table(path) -> dict:
    table = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise InvalidInput(f"{path}:{lineno}: expected 'k probability'")
        table[int(parts[0])] = table.get(int(parts[0]), 0.0) + float(parts[1])
    return table


def read_degrees(path) -> list[int]:
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise InvalidInput(f"{path}:{lineno}: {line!r} is not an integer degree")
    return out


def load_model(opt):
    if opt["degrees"]:
        return from_sequence(read_degrees(opt["degrees"]))
    if opt["dist"]:
        return from_distribution(read_table(opt["dist"]), tail_tol=opt["tail_tol"])
    raise UsageError("give --degrees FILE or --dist FILE")


def load_sequence(opt) -> np.ndarray:
    if opt["degrees"]:
        return np.asarray(read_degrees(opt["degrees"]), dtype=np.int64)
    if opt["dist"]:
        if opt["n"] is None:
            raise UsageError("--dist needs --n to build a degree sequence")
        model = from_distribution(read_table(opt["dist"]), tail_tol=opt["tail_tol"])
        return sequence_from_distribution(model, opt["n"])
    raise UsageError("give --degrees FILE or --dist FILE")


def load_target(opt):
    if not opt["target"]:
        raise UsageError("give --target FILE")
    q, eps = read_target(Path(opt["target"]).read_text())
    return q, (opt["eps"] if eps is None else eps)


def load_control(opt, kmax: int) -> BandControl:
    if opt["phi"]:
        phi = {}
        for item in opt["phi"].split(","):
            k, _, v = item.partition(":")
            phi[int(k)] = float(v)
        return BandControl.per_type(phi)
    if opt["tilt"] is not None:
        return BandControl.constant(opt["tilt"], kmax)
    return BandControl.nominal()


def _csv_text(writer, *args) -> str:
    buf = io.StringIO(newline="")
    writer(*args, buf)
    return buf.getvalue()


def _need_seed(opt, command):
    if command in STOCHASTIC and opt["seed"] is None:
        raise UsageError(f"{command} needs --seed")
    return np.random.default_rng(np.random.SeedSequence(opt["seed"])) if opt["seed"] is not None else None


def cmd_degseq(opt, out):
    model = load_model(opt)
    rep = {
        "n": model.n,
        "m": model.m,
        "mu": model.mu,
        "nu": model.nu,
        "drift": model.drift,
        "regime": "supercritical" if model.drift > 0 else "subcritical-or-critical",
        "L": model.L,
        "p": {k: float(model.p[k]) for k in model.support},
    }
    rep.update(model.assumption_report())
    atomic_write(out / "degseq.json", dumps(rep) + "\n")
    return rep


def cmd_generate(opt, out, rng):
    d = load_sequence(opt)
    g = uniform_matching(d, rng)
    comps = components_of(g)
    atomic_write(out / "edges.txt", "".join(f"{u + 1} {v + 1}\n" for u, v in g.edges.tolist()))
    atomic_write(out / "components.json", dumps([component_summary(c) for c in comps]) + "\n")
    return {"n": g.n, "m": g.m, "components": len(comps), "largest": max(len(c.vertices) for c in comps)}


def cmd_explore(opt, out, rng):
    d = load_sequence(opt)
    g, log, comps = eea_run(d, rng)
    fd, tmp = tempfile.mkstemp(dir=out, suffix=".tmp")
    os.close(fd)
    try:
        write_log(log, tmp)
        os.replace(tmp, out / "excursions.csv")
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    atomic_write(out / "components.json", dumps([component_summary(c) for c in comps]) + "\n")
    return {"n": g.n, "m": g.m, "steps": log.steps, "components": len(comps),
            "largest_edges": max(c.edge_count for c in comps)}


def cmd_simulate_ct(opt, out, rng):
    d = load_sequence(opt)
    control = load_control(opt, int(d.max()))
    T = math.inf if opt["horizon"] is None else opt["horizon"]
    path = simulate(d, T, control, rng)
    atomic_write(out / "ct_path.csv", _csv_text(lambda fh: write_path(path, fh, opt["stride"])))
    largest = max((c.edge_count for c in path.components), default=0)
    return {"n": path.n, "jumps": path.jumps, "stop_time": path.stop_time, "absorbed": path.absorbed,
            "components": len(path.components), "largest_edges": largest, "log_weight": path.log_weight}


def _horizon(opt, model):
    if opt["horizon"] is not None:
        return opt["horizon"]
    from .lln import phase_and_rho

    return phase_and_rho(model).absorption_time(model)


def cmd_lln(opt, out):
    model = load_model(opt)
    T = _horizon(opt, model)
    path = lln_path(model, T, opt["grid"])
    atomic_write(out / "lln.csv", _csv_text(path.to_csv))
    ph = path.phase
    return {"regime": ph.regime, "drift": ph.drift, "rho": ph.rho, "tau": ph.tau,
            "absorption_time": path.absorption_time, "T": T, "grid": opt["grid"]}


def cmd_rate(opt, out):
    p = None
    if opt["path"]:
        with open(opt["path"], newline="") as fh:
            pp = PathPair.from_csv(fh)
        if opt["degrees"] or opt["dist"]:
            p = load_model(opt).p
    else:
        model = load_model(opt)
        pp = PathPair.from_lln(lln_path(model, _horizon(opt, model), opt["grid"]))
        p = model.p
    res = rate_integral(pp, p=p)
    rep = res.summary()
    atomic_write(out / "rate.json", dumps(rep) + "\n")
    return {k: rep[k] for k in ("value", "feasible", "reason", "tau")}


def cmd_degree_ld(opt, out):
    model = load_model(opt)
    q, eps = load_target(opt)
    target = DegreeConfigTarget.build(q, model, eps)
    rep = degree_ld_report(target).as_dict()
    rep["eps"] = eps
    atomic_write(out / "degree_ld.json", dumps(rep) + "\n")
    return rep


def cmd_mc(opt, out, rng, control=None):
    d = load_sequence(opt)
    q, eps = load_target(opt)
    spec = EventSpec(q, eps)
    if control is None:
        rep = mc_probability(d, spec, opt["replicas"], opt["seed"], opt["threads"])
        name = "mc.json"
    else:
        rep = is_probability(d, spec, control, opt["replicas"], opt["seed"], opt["threads"], opt["weight"])
        name = "is.json"
    atomic_write(out / name, dumps(rep.as_dict(timing=False)) + "\n")
    return rep.as_dict()


def cmd_is(opt, out, rng):
    d = load_sequence(opt)
    return cmd_mc(opt, out, rng, control=load_control(opt, int(d.max())))


def cmd_mc_sweep(opt, out, rng):
    if not opt["dist"]:
        raise UsageError("mc-sweep needs --dist FILE")
    model = load_model(opt)
    q, eps = load_target(opt)
    sizes = [int(s) for s in opt["sizes"].split(",")]
    reps = mc_sweep(model, EventSpec(q, eps), sizes, opt["replicas"], opt["seed"], opt["threads"])
    atomic_write(out / "sweep.csv", _csv_text(write_sweep, reps))
    summary = {"sizes": sizes, "rate_hat": [r.rate_hat for r in reps]}
    try:
        summary["I1"] = degree_ld_report(DegreeConfigTarget.build(q, model, eps)).I1
    except InvalidInput:
        summary["I1"] = None
    return summary


COMMANDS = {
    "degseq": cmd_degseq,
    "generate": cmd_generate,
    "explore": cmd_explore,
    "simulate-ct": cmd_simulate_ct,
    "lln": cmd_lln,
    "rate": cmd_rate,
    "degree-ld": cmd_degree_ld,
    "mc": cmd_mc,
    "mc-sweep": cmd_mc_sweep,
    "is": cmd_is,
}


def run(argv=None, environ=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("missing command")
        opt = resolve(args, environ)
        out = Path(opt["out"])
        out.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        fn = COMMANDS[args.command]
        if args.command in STOCHASTIC:
            summary = fn(opt, out, _need_seed(opt, args.command))
        else:
            summary = fn(opt, out)
    except UsageError as e:
        parser.print_usage(stderr)
        print(dumps({"status": "usage-error", "error": str(e)}), file=stderr)
        return 1
    except InvalidInput as e:
        print(dumps({"status": "invalid-input", "error": type(e).__name__, "message": str(e)}), file=stderr)
        return 2
    except NumericalFailure as e:
        print(dumps({"status": "numerical-failure", "error": type(e).__name__, "message": str(e)}), file=stderr)
        return 3
    except OSError as e:
        print(dumps({"status": "invalid-input", "error": "OSError", "message": str(e)}), file=stderr)
        return 2
    summary = dict(summary)
    summary.update({"status": "ok", "command": args.command, "elapsed": time.perf_counter() - start})
    print(dumps(summary), file=stdout)
    return 0


def main() -> None:
    sys.exit(run())
