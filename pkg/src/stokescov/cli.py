"""Command line entry point.

Every command reads an optional INI-style config file (``--config``) and flag
overrides; flags win.  Exit codes: 0 success, 1 infeasible estimation or failed
validation, 2 configuration error.
"""
from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import logging
import math
import os
import sys
from pathlib import Path

from . import bench, fockcheck, moments
from .estimator import (ESTIMATORS, AmbiguousSolution, Infeasible, NegativeEnergy, NoRealSolution,
                        with_standard_errors)
from .sampler import (MODES, SEED_ENV, SeedSpec, empirical_moments, is_shot_dump, read_shots,
                      sample_batch, sample_moment_set, split_budget, write_shots)
from .states import parse_float, parse_record, reference_from_record, state_from_record

log = logging.getLogger("stokescov")


class ConfigError(ValueError):
    pass


# section -> key -> parser; every key is optional and documented in README
SCHEMA = {
    "signal": {k: parse_float for k in ("r", "q", "b", "c", "alpha", "d", "beta")},
    "reference": {k: parse_float for k in ("r", "q", "b", "c", "d", "delta", "gamma")},
    "sampling": {"n": int, "mode": str, "seed": int, "stream": int, "angles": str},
    "bench": {"trials": int, "estimator": str, "axis": str, "values": str, "n_values": str,
              "bootstrap": int, "threads": int},
    "estimate": {"path": str},
    "validate": {"dim": int, "tolerance": float},
    "output": {"path": str, "timestamp": str, "dump": str},
}

DEFAULTS = {
    "signal": "b=237,c=86,alpha=0.7,d=158,beta=0.2",
    "reference": "r=1,delta=10,gamma=1",
    "angles": "0,pi/4,pi/2",
    "n": 100_000,
    "mode": "wigner",
    "seed": 0,
    "stream": 0,
    "trials": 200,
    "estimator": "general",
    "bootstrap": 1000,
    "threads": 1,
    "dim": fockcheck.DEFAULT_DIM,
    "tolerance": 1e-9,
}


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return i
        elif current == section and key is not None and s.split("=", 1)[0].strip() == key:
            return i
    return None


def load_config(path: str | Path) -> dict[str, dict]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out: dict[str, dict] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{path}:{_line_of(text, section, None)}: unknown section [{section}]")
        out[section] = {}
        for key, raw in cp.items(section):
            where = f"{path}:{_line_of(text, section, key)}"
            if key not in SCHEMA[section]:
                raise ConfigError(f"{where}: unknown key '{key}' in [{section}]; "
                                  f"allowed: {', '.join(SCHEMA[section])}")
            try:
                out[section][key] = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"{where}: bad value for '{key}': {exc}") from exc
    return out


def _parse_list(text: str, cast=parse_float) -> list:
    return [cast(x) for x in text.split(",") if x.strip()]


class Settings:
    """Config values overlaid with command-line flags."""

    def __init__(self, args: argparse.Namespace):
        self.cfg = load_config(args.config) if getattr(args, "config", None) else {}
        self.args = args

    def get(self, flag: str, section: str, key: str | None = None, default=None):
        val = getattr(self.args, flag, None)
        if val is not None:
            return val
        key = key or flag
        if key in self.cfg.get(section, {}):
            return self.cfg[section][key]
        return default

    def record(self, flag: str, section: str, default: str):
        if getattr(self.args, flag, None) is not None:
            return parse_record(getattr(self.args, flag))
        if section in self.cfg:
            return dict(self.cfg[section])
        return parse_record(default)

    def signal(self):
        return state_from_record(self.record("signal", "signal", DEFAULTS["signal"]))

    def reference(self):
        return reference_from_record(self.record("ref", "reference", DEFAULTS["reference"]))

    def angles(self) -> list[float]:
        return _parse_list(self.get("angles", "sampling", default=DEFAULTS["angles"]))

    def seed(self) -> SeedSpec:
        env = os.environ.get(SEED_ENV)
        default = int(env) if env is not None else DEFAULTS["seed"]
        return SeedSpec(int(self.get("seed", "sampling", default=default)),
                        int(self.get("stream", "sampling", default=DEFAULTS["stream"])))

    def mode(self) -> str:
        mode = self.get("mode", "sampling", default=DEFAULTS["mode"])
        if mode not in MODES:
            raise ConfigError(f"sampling mode must be one of {MODES}, got {mode!r}")
        return mode


def _emit(settings: Settings, command: str, body: str) -> None:
    args = settings.args
    stamp = not args.no_timestamp
    cfg_stamp = settings.cfg.get("output", {}).get("timestamp")
    if cfg_stamp is not None and not args.no_timestamp:
        stamp = cfg_stamp.strip().lower() in ("1", "true", "yes", "on")
    if stamp:
        now = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
        body = f"# generated by stokescov {command} at {now}\n" + body
    out = settings.get("out", "output", "path")
    if out:
        Path(out).write_text(body)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(body)


def _trial_config(s: Settings, **overrides) -> bench.TrialConfig:
    ref_rec = s.record("ref", "reference", DEFAULTS["reference"])
    kw = dict(
        signal=s.signal(), n_states=int(s.get("n", "sampling", default=DEFAULTS["n"])),
        trials=int(s.get("trials", "bench", default=DEFAULTS["trials"])),
        angles=tuple(s.angles()), mode=s.mode(), seed=s.seed(),
        estimator=s.get("estimator", "bench", default=DEFAULTS["estimator"]),
        bootstrap=int(s.get("bootstrap", "bench", default=DEFAULTS["bootstrap"])),
    )
    if "delta" in ref_rec or "gamma" in ref_rec:
        kw.update(r_ref=ref_rec.get("r", 1.0), delta=ref_rec.get("delta", 0.0),
                  gamma=ref_rec.get("gamma", 1.0))
    else:
        kw["reference"] = reference_from_record(ref_rec)
    kw.update(overrides)
    try:
        return bench.TrialConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_oracle(s: Settings) -> int:
    ms = moments.moment_set(s.signal(), s.reference(), s.angles())
    _emit(s, "oracle", ms.to_csv())
    return 0


def cmd_sample(s: Settings) -> int:
    signal, ref, angles = s.signal(), s.reference(), s.angles()
    n = int(s.get("n", "sampling", default=DEFAULTS["n"]))
    mode, seed = s.mode(), s.seed()
    dump = s.get("dump", "output")
    if dump:
        batches = [sample_batch(signal, ref, phi, k, mode, seed.child(i))
                   for i, (phi, k) in enumerate(zip(angles, split_budget(n, len(angles))))]
        write_shots(batches, dump)
        ms = empirical_moments(batches)
    else:
        # streams shots through accumulators so large budgets stay in bounded memory
        ms = sample_moment_set(signal, ref, angles, n, mode, seed)
    _emit(s, "sample", ms.to_csv([f"mode={mode}"]))
    return 0


def _has_covariances(ms: moments.StokesMomentSet) -> bool:
    return ms.s0_cov is not None and all(e.cov is not None for e in ms.entries)


def cmd_estimate(s: Settings) -> int:
    ref = s.reference()
    mfile, sfile = s.args.moments, s.args.shots
    if bool(mfile) == bool(sfile):
        raise ConfigError("give exactly one of --moments or --shots")
    if mfile and not mfile.endswith(".gz"):
        text = Path(mfile).read_text()
        if is_shot_dump(text):
            ms = empirical_moments(read_shots(mfile, s.mode()))
        else:
            ms = moments.StokesMomentSet.from_csv(text)
    else:
        ms = empirical_moments(read_shots(sfile or mfile, s.mode()))
    path = s.get("path", "estimate", default="general")
    if path not in ESTIMATORS:
        raise ConfigError(f"estimator path must be one of {sorted(ESTIMATORS)}")
    try:
        if path in bench.PATH_PARAMS and _has_covariances(ms):
            est = with_standard_errors(ESTIMATORS[path], ms, ref, bench.PATH_PARAMS[path])
        else:
            est = ESTIMATORS[path](ms, ref)
    except AmbiguousSolution as exc:
        body = "".join(c.to_record() + "---\n" for c in exc.candidates)
        _emit(s, "estimate", f"# ambiguous: {exc}\n" + body)
        return 1
    _emit(s, "estimate", est.to_record())
    return 0


def cmd_bench(s: Settings) -> int:
    cfg = _trial_config(s)
    threads = int(s.get("threads", "bench", default=DEFAULTS["threads"]))
    rep = bench.run_mse(cfg, workers=threads)
    rep.axis, rep.axis_value = "n_states", float(cfg.n_states)
    _emit(s, "bench", bench.sweep_csv([rep]))
    return 0


def cmd_sweep(s: Settings) -> int:
    axis = s.get("axis", "bench")
    values = s.get("values", "bench")
    if not axis or not values:
        raise ConfigError("sweep needs --axis and --values")
    if axis not in bench.SWEEP_AXES:
        raise ConfigError(f"axis must be one of {bench.SWEEP_AXES}")
    cfg = _trial_config(s)
    threads = int(s.get("threads", "bench", default=DEFAULTS["threads"]))
    reports = bench.sweep(cfg, axis, _parse_list(values), workers=threads)
    for rep in reports:
        if rep.error:
            log.warning("%s=%g: %s", axis, rep.axis_value, rep.error)
    _emit(s, "sweep", bench.sweep_csv(reports))
    return 0


def cmd_converge(s: Settings) -> int:
    n_values = s.get("n_values", "bench", default="100,1000,10000,100000")
    cfg = _trial_config(s)
    rep = bench.convergence_study(cfg, _parse_list(n_values, lambda x: int(float(x))))
    _emit(s, "converge", rep.to_csv())
    return 0


def cmd_validate(s: Settings) -> int:
    dim = int(s.get("dim", "validate", default=DEFAULTS["dim"]))
    tol = float(s.get("tolerance", "validate", default=DEFAULTS["tolerance"]))
    report = fockcheck.validate(dim=dim, tolerance=tol)
    _emit(s, "validate", report.render(precise=s.args.precise))
    return 0 if report.passed else 1


def cmd_demo(s: Settings) -> int:
    rep = bench.indistinguishability_demo()
    _emit(s, "demo-indistinguishable", rep.render())
    return 0


COMMANDS = {
    "oracle": cmd_oracle,
    "sample": cmd_sample,
    "estimate": cmd_estimate,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
    "converge": cmd_converge,
    "validate": cmd_validate,
    "demo-indistinguishable": cmd_demo,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file; flags override its values")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--no-timestamp", action="store_true", help="omit the generated-at header line")
    common.add_argument("--threads", type=int, help="worker cap for trials")
    common.add_argument("-v", "--verbose", action="store_true")

    states = argparse.ArgumentParser(add_help=False)
    states.add_argument("--signal", help="state record, e.g. b=237,c=86,alpha=0.7,d=158,beta=0.2")
    states.add_argument("--ref", help="reference record: r,delta,gamma or r,q,d or b,c,d")
    states.add_argument("--angles", help="comma separated radians; pi/4 style accepted")

    sampling = argparse.ArgumentParser(add_help=False)
    sampling.add_argument("--n", type=int, help="total shots, split equally over angles")
    sampling.add_argument("--mode", choices=MODES)
    sampling.add_argument("--seed", type=int, help=f"base seed (default ${SEED_ENV} or 0)")
    sampling.add_argument("--stream", type=int)

    benchp = argparse.ArgumentParser(add_help=False)
    benchp.add_argument("--trials", type=int)
    benchp.add_argument("--estimator", choices=sorted(bench.PATH_ASSUMPTIONS))
    benchp.add_argument("--bootstrap", type=int)

    p = argparse.ArgumentParser(prog="stokescov", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("oracle", parents=[common, states], help="exact moment set as CSV")
    sp = sub.add_parser("sample", parents=[common, states, sampling], help="simulate shots, write moments")
    sp.add_argument("--dump", help="also write every shot (phi,s2,s0); .gz compresses")
    ep = sub.add_parser("estimate", parents=[common, states, sampling], help="reconstruct the signal")
    ep.add_argument("--moments", help="moment-set CSV (or a shot dump)")
    ep.add_argument("--shots", help="shot dump CSV")
    ep.add_argument("--path", choices=sorted(ESTIMATORS), help="estimator (default general)")
    sub.add_parser("bench", parents=[common, states, sampling, benchp], help="MSE over repeated trials")
    swp = sub.add_parser("sweep", parents=[common, states, sampling, benchp], help="MSE along one axis")
    swp.add_argument("--axis", choices=bench.SWEEP_AXES)
    swp.add_argument("--values", help="comma separated axis values")
    cp = sub.add_parser("converge", parents=[common, states, sampling, benchp],
                        help="estimates versus number of shots")
    cp.add_argument("--n-values", dest="n_values")
    vp = sub.add_parser("validate", parents=[common], help="Fock-space calibration of ordering constants")
    vp.add_argument("--dim", type=int)
    vp.add_argument("--tolerance", type=float)
    vp.add_argument("--precise", action="store_true", help="print raw residuals instead of bounds")
    sub.add_parser("demo-indistinguishable", parents=[common],
                   help="two signals a non-displaced reference cannot tell apart")
    return p


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        settings = Settings(args)
        return COMMANDS[args.command](settings)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    except (NegativeEnergy, NoRealSolution) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
