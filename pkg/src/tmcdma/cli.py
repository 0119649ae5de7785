"""Command line front end.

Commands: ``codes``, ``simulate``, ``sweep``, ``snr-model``, ``calibrate``
and ``figures``. Settings resolve as built-in defaults < ``--config`` JSON
file < command line flags. Exit status is 0 on success, 1 on a domain
error and 2 on a usage error.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, baseband, montecarlo, serialize, snrmodel
from .detect import DETECTOR_IDS, TmParams
from .errors import TmcdmaError

CODE_KIND_ALIASES = {"random": "pseudo-random", "pseudo-random": "pseudo-random",
                     "walsh": "walsh-hadamard", "walsh-hadamard": "walsh-hadamard"}

# settings that never change results; kept out of the metadata echo
EXECUTION_ONLY = {"workers", "out", "format", "config"}

# fig 3 quotes give every profile an anchor at K=22
DEFAULT_ANCHORS = {alg: (montecarlo.FIGURE_K[3], db)
                   for alg, db in montecarlo.FIGURE_ANCHORS[3].items()}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def out(self):
        return self.values.get("out")

    @property
    def format(self):
        return self.values.get("format", "csv")

    @property
    def workers(self):
        return self.values.get("workers", 1)

    def echo(self):
        return {k: _jsonable(v) for k, v in sorted(self.values.items())
                if k not in EXECUTION_ONLY}


# --- value parsers -----------------------------------------------------------

def parse_k(text):
    """``"K"`` or ``"MIN:MAX"`` -> (min, max)."""
    text = str(text)
    try:
        if ":" in text:
            lo, hi = (int(p) for p in text.split(":", 1))
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad K value {text!r}") from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad K range {text!r}")
    return (lo, hi)


def parse_floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def parse_detectors(text):
    items = list(text) if isinstance(text, (list, tuple)) else str(text).split(",")
    items = [i.strip() for i in items if i.strip()]
    bad = [i for i in items if i not in DETECTOR_IDS]
    if bad or not items:
        raise argparse.ArgumentTypeError(
            f"unknown detector(s) {bad}; choose from {','.join(DETECTOR_IDS)}")
    return items


def parse_profiles(text):
    items = list(text) if isinstance(text, (list, tuple)) else str(text).split(",")
    items = [i.strip() for i in items if i.strip()]
    bad = [i for i in items if i not in snrmodel.PROFILE_IDS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"unknown profile(s) {bad}")
    return items


def parse_phi2(text):
    """``fixed:V``, ``sampled`` or ``calibrated[:DB@K]``."""
    text = str(text)
    if text.startswith("fixed:"):
        try:
            v = float(text[6:])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad phi2 value {text!r}") from None
        if v < 0:
            raise argparse.ArgumentTypeError("phi2 must be >= 0")
        return text
    if text == "sampled" or text == "calibrated":
        return text
    if text.startswith("calibrated:"):
        try:
            db, k = text[11:].split("@")
            float(db), int(k)
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"expected calibrated:DB@K, got {text!r}") from None
        return text
    raise argparse.ArgumentTypeError(
        f"phi2 policy must be fixed:V, sampled or calibrated, got {text!r}")


def parse_figs(text):
    items = list(text) if isinstance(text, (list, tuple)) else str(text).split(",")
    try:
        figs = [int(i) for i in items]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad figure list {text!r}") from None
    bad = [f for f in figs if f not in montecarlo.FIGURE_K]
    if bad:
        raise argparse.ArgumentTypeError(f"figures must be within 3..8, got {bad}")
    return figs


def parse_code_kind(text):
    try:
        return CODE_KIND_ALIASES[str(text)]
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown code kind {text!r}") from None


def nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("value must be >= 0")
    return v


def pos_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("value must be >= 1")
    return v


def nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("value must be >= 0")
    return v


# --- parser ------------------------------------------------------------------

# dest -> (flag, converter, default)
_OPTIONS = {
    "seed": ("--seed", nonneg_int, 0),
    "out": ("--out", str, None),
    "format": ("--format", str, "csv"),
    "workers": ("--workers", pos_int, 1),
    "k": ("--k", parse_k, None),
    "n": ("--n", pos_int, 64),
    "codes": ("--codes", parse_code_kind, "pseudo-random"),
    "scenario": ("--scenario", str, "light"),
    "ebn0": ("--ebn0", parse_floats, [6.0]),
    "symbols": ("--symbols", pos_int, 10_000),
    "detectors": ("--detectors", parse_detectors, list(DETECTOR_IDS)),
    "tau": ("--tau", nonneg_float, 1.0),
    "s_max": ("--s-max", nonneg_int, 10),
    "pilot_period": ("--pilot-period", pos_int, None),
    "nd_max_iters": ("--nd-max-iters", nonneg_int, 100),
    "k_max": ("--k-max", pos_int, 20),
    "profile": ("--profile", parse_profiles, None),
    "c": ("--c", float, 1.0),
    "phi2": ("--phi2", parse_phi2, "calibrated"),
    "nd_iters": ("--nd-iters", float, 1.0),
    "target_db": ("--target-db", float, None),
    "fig": ("--fig", parse_figs, [3, 4, 5, 6, 7, 8]),
}

_SIM = ["k", "n", "codes", "ebn0", "symbols", "detectors", "tau", "s_max",
        "pilot_period", "nd_max_iters", "k_max", "seed", "workers", "out",
        "format"]

COMMANDS = {
    "codes": (["k", "n", "codes", "seed", "out", "format"],
              "generate spreading codes and their correlation matrix"),
    "simulate": (_SIM, "Monte Carlo BER / SNR for one or more user counts"),
    "sweep": (["scenario"] + _SIM, "light or heavy scenario sweep (needs --out)"),
    "snr-model": (["profile", "k", "c", "phi2", "nd_iters", "scenario", "seed",
                   "out", "format"], "analytic SNR curves"),
    "calibrate": (["target_db", "profile", "k", "c", "nd_iters", "out", "format"],
                  "phi2 that reproduces a target dB value"),
    "figures": (["fig", "phi2", "c", "nd_iters", "seed", "out", "format"],
                "analytic datasets for the SNR-versus-K figures"),
}

COMMAND_DEFAULTS = {
    "codes": {"k": (8, 8)},
    "simulate": {"k": (1, 1)},
    "snr-model": {"profile": ["tm"], "k": (2, 50)},
    "calibrate": {"profile": ["tm"]},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="tmcdma", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND",
                                parser_class=_Parser)
    sub.required = True
    for name, (opts, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON file with flat keys named like the flags")
        for dest in opts:
            flag, conv, _ = _OPTIONS[dest]
            kw = {"dest": dest, "type": conv}
            if dest == "format":
                kw["choices"] = ("csv", "json")
            if dest == "scenario":
                kw["choices"] = ("light", "heavy")
            p.add_argument(flag, **kw)
        if name == "figures":
            p.add_argument("--policy", dest="phi2", type=parse_phi2,
                           help="alias of --phi2")
    return parser


def _read_config_file(path, command):
    allowed = set(COMMANDS[command][0])
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must contain a JSON object")
    values = {}
    for key, raw in data.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in allowed:
            raise UsageError(f"unknown config key {key!r} for command {command}")
        conv = _OPTIONS[dest][1]
        try:
            if dest == "k" and isinstance(raw, list):
                raw = f"{raw[0]}:{raw[-1]}"
            values[dest] = conv(raw) if conv is not str else str(raw)
        except (argparse.ArgumentTypeError, ValueError, TypeError) as exc:
            raise UsageError(f"bad value for config key {key!r}: {exc}") from None
    return values


def _check_out(path, fmt, command):
    p = Path(path)
    parent = p.parent if str(p.parent) else Path(".")
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise UsageError(f"output path {path} is not writable (key 'out')")
    if p.exists() and p.is_dir():
        raise UsageError(f"output path {path} is a directory (key 'out')")
    suffix = p.suffix.lower()
    if command != "figures" and suffix in (".csv", ".json") and suffix[1:] != fmt:
        raise UsageError(
            f"output path {path} contradicts --format {fmt} (key 'format')")


def parse_config(argv=None):
    """Parse arguments into a fully resolved :class:`RunConfig`.

    Raises
    ------
    UsageError
        Unknown flags or keys, unwritable output, contradictory options.
    """
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    opts = COMMANDS[command][0]
    values = {d: _OPTIONS[d][2] for d in opts}
    values.update(COMMAND_DEFAULTS.get(command, {}))
    cfg_path = ns.pop("config", None)
    if cfg_path is not None:
        values.update(_read_config_file(cfg_path, command))
    values.update(ns)

    if command == "sweep" and values.get("out") is None:
        raise UsageError("sweep requires --out (key 'out')")
    if command == "calibrate":
        if values.get("target_db") is None:
            raise UsageError("calibrate requires --target-db (key 'target_db')")
        if values.get("k") is None:
            raise UsageError("calibrate requires --k (key 'k')")
        if values["k"][0] != values["k"][1]:
            raise UsageError("calibrate takes a single --k value (key 'k')")
        if len(values["profile"]) != 1:
            raise UsageError("calibrate takes a single --profile (key 'profile')")
    if "c" in values and not values["c"] > 0:
        raise UsageError("--c must be > 0 (key 'c')")
    if values.get("codes") == "walsh-hadamard":
        k_hi = (values.get("k") or montecarlo.DEFAULT_K_RANGES[
            values.get("scenario", "light")])[1]
        n = values["n"]
        if n & (n - 1) or k_hi > n:
            raise UsageError(
                f"walsh-hadamard codes need N a power of two and K <= N "
                f"(got N={n}, K up to {k_hi}; key 'codes')")
    if values.get("out") is not None:
        _check_out(values["out"], values.get("format", "csv"), command)
    return RunConfig(command, values)


# --- command implementations ---------------------------------------------------

def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _meta(cfg, **extra):
    meta = {"tool": "tmcdma", "version": __version__, "command": cfg.command,
            "config": cfg.echo()}
    meta.update({k: _jsonable(v) for k, v in extra.items()})
    return meta


def _emit(cfg, rows, meta):
    if cfg.out is None:
        if cfg.format == "json":
            sys.stdout.write(serialize.render_json(rows, meta))
        else:
            sys.stdout.write(serialize.render_csv(rows))
    else:
        serialize.write_rows(rows, cfg.format, cfg.out, meta=meta)


def _scenario(cfg, load_class):
    tm = TmParams(tau=cfg["tau"], s_max=cfg["s_max"])
    return montecarlo.ScenarioSpec(
        load_class=load_class, K_range=cfg.get("k"), N=cfg["n"],
        ebn0_db=tuple(cfg["ebn0"]), symbols_per_point=cfg["symbols"],
        detectors=tuple(cfg["detectors"]), seed=cfg["seed"], tm_params=tm,
        pilot_period=cfg["pilot_period"], code_kind=cfg["codes"],
        k_max=cfg["k_max"], nd_max_iters=cfg["nd_max_iters"])


def _profile(alg, cfg):
    if alg == "nd":
        return snrmodel.ComplexityProfile("nd", {"iters": cfg["nd_iters"]})
    return snrmodel.ComplexityProfile(alg)


def _policy(text, alg=None, load_class="light", seed=0):
    if text.startswith("fixed:"):
        return snrmodel.FixedPhi2(float(text[6:]))
    if text == "sampled":
        return snrmodel.SampledPhi2(load_class, seed)
    if text == "calibrated":
        return snrmodel.CalibratedPhi2(DEFAULT_ANCHORS)
    db, k = text[11:].split("@")
    return snrmodel.CalibratedPhi2({alg: (int(k), float(db))})


def cmd_codes(cfg):
    K = cfg["k"][1]
    system = baseband.SystemConfig(K=K, N=cfg["n"], code_kind=cfg["codes"],
                                   seed=cfg["seed"])
    codes = baseband.generate_codes(system)
    R = baseband.correlation_matrix(codes)
    chips = (codes.codes * math.sqrt(codes.N)).round().astype(int)
    meta = _meta(cfg, scale=f"1/sqrt({codes.N})")
    if cfg.format == "json":
        text = json.dumps({"codes": chips.tolist(),
                           "correlation": [[serialize.round_real(x) for x in row]
                                           for row in R], "meta": meta},
                          indent=2) + "\n"
    else:
        header = "user," + ",".join(f"chip_{i}" for i in range(codes.N))
        lines = [header] + [f"{k}," + ",".join(str(c) for c in row)
                            for k, row in enumerate(chips)]
        text = "\n".join(lines) + "\n"
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        serialize._write_text(cfg.out, text)
    return 0


def cmd_simulate(cfg, load_class="light"):
    spec = _scenario(cfg, load_class)
    rows = montecarlo.sweep_scenario(spec, workers=cfg.workers)
    _emit(cfg, rows, _meta(cfg, scenario=spec.to_dict(),
                           nd_iterations=montecarlo.mean_nd_iterations(rows)))
    return 0


def cmd_sweep(cfg):
    return cmd_simulate(cfg, cfg["scenario"])


def cmd_snr_model(cfg):
    lo, hi = cfg["k"]
    rows, policies = [], {}
    for alg in cfg["profile"]:
        prof = _profile(alg, cfg)
        pol = _policy(cfg["phi2"], alg, cfg["scenario"], cfg["seed"])
        rows.extend(snrmodel.snr_curve(prof, range(lo, hi + 1), cfg["c"], pol))
        info = {"policy": pol.describe(), "profile": prof.describe()}
        if isinstance(pol, snrmodel.CalibratedPhi2):
            info["phi2"] = pol.phi2(prof, lo, cfg["c"])
        policies[alg] = info
    _emit(cfg, rows, _meta(cfg, profiles=policies))
    return 0


def cmd_calibrate(cfg):
    alg = cfg["profile"][0]
    K = cfg["k"][0]
    prof = _profile(alg, cfg)
    aleph = snrmodel.profile_eval(prof, K)
    phi2 = snrmodel.calibrate_variance(cfg["target_db"], aleph, cfg["c"], K)
    print(f"phi2 = {phi2:.10g}  (profile {alg}, K={K}, C={cfg['c']:g}, "
          f"target {cfg['target_db']:g} dB, aleph={aleph:.10g})")
    if cfg.out is not None:
        pt = snrmodel.curve_point(prof, K, cfg["c"], phi2)
        serialize.write_rows([pt], cfg.format, cfg.out,
                             meta=_meta(cfg, phi2=phi2))
    return 0


def figure_meta(datasets):
    return {str(ds.fig_id): ds.meta for ds in datasets}


def cmd_figures(cfg):
    datasets = []
    for fig in cfg["fig"]:
        text = cfg["phi2"]
        if text == "calibrated":
            policy = "calibrated"
        elif text.startswith("calibrated:"):
            raise UsageError("figures take --policy calibrated without a target "
                             "(key 'phi2')")
        else:
            policy = _policy(text, load_class=montecarlo.FIGURE_LOAD[fig],
                             seed=cfg["seed"])
        nd = snrmodel.ComplexityProfile("nd", {"iters": cfg["nd_iters"]})
        datasets.append(montecarlo.reproduce_figure(fig, policy, nd, cfg["c"]))
    meta = _meta(cfg, figures=figure_meta(datasets))
    if cfg.out is None or cfg.format == "json":
        doc = {"figures": [serialize.json_document(ds.points,
                                                   {"figure": ds.fig_id})
                           for ds in datasets], "meta": meta}
        text = json.dumps(doc, indent=2) + "\n"
        if cfg.out is None:
            sys.stdout.write(text)
        else:
            serialize._write_text(cfg.out, text)
        return 0
    out = Path(cfg.out)
    stem = out.with_suffix("") if out.suffix else out
    for ds in datasets:
        serialize.write_rows(ds.points, "csv", f"{stem}_fig{ds.fig_id}.csv")
    serialize._write_text(f"{stem}_meta.json", json.dumps(meta, indent=2) + "\n")
    return 0


HANDLERS = {"codes": cmd_codes, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "snr-model": cmd_snr_model, "calibrate": cmd_calibrate,
            "figures": cmd_figures}


def run(cfg):
    """Dispatch a parsed configuration; returns the exit status."""
    try:
        return HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        print(f"tmcdma: usage error: {exc}", file=sys.stderr)
        return 2
    except TmcdmaError as exc:
        print(f"tmcdma: error: {exc}", file=sys.stderr)
        return 1


def main(argv=None):
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"tmcdma: usage error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
