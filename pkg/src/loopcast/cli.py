"""Command-line entry point.

Exit codes: 0 success, 1 user or config error, 2 non-certified or degenerate
computation, 3 internal invariant violation. Every failure prints a single
line ``loopcast: error[<reason>]: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import analytics, harness, homotopy, mcmc, oracle
from .errors import DegenerateGeometry, InvalidInput, LoopcastError, NotCertified
from .geometry import PunctureSet
from .loops import GnParams, PLLoop, check_state, discretize, dump_loop, load_loop
from .ratefn import RadialRate

log = logging.getLogger("loopcast")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


# -- configuration -----------------------------------------------------------

_FIELDS = {
    "punctures": list,
    "reference_loop_path": str,
    "n": int,
    "R": (int, float),
    "seed": int,
    "iterations": int,
    "thin": int,
    "burnin": int,
    "deltas": list,
    "output_dir": str,
}


@dataclass
class ExperimentConfig:
    punctures: list
    reference_loop_path: str
    n: int = 59
    R: float = 20.0
    seed: int = 0
    iterations: int = 1000
    thin: int = 100
    burnin: int = 0
    deltas: list = field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0])
    output_dir: str = "."
    base_dir: Path = field(default=Path("."), repr=False)

    def reference(self) -> PLLoop:
        path = Path(self.reference_loop_path)
        if not path.is_absolute():
            path = self.base_dir / path
        if not path.exists():
            raise InvalidInput(f"reference loop file not found: {path}")
        return load_loop(path)

    def params(self) -> GnParams:
        return GnParams.build(self.punctures, self.reference(), self.n, self.R)

    def sampler(self, params=None, seed=None) -> mcmc.SamplerConfig:
        return mcmc.SamplerConfig(
            params or self.params(), iterations=self.iterations, thin=self.thin,
            burnin=self.burnin, seed=self.seed if seed is None else seed,
        )


def _line_of(text: str, key: str) -> int:
    for i, line in enumerate(text.splitlines(), 1):
        if f'"{key}"' in line:
            return i
    return 1


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidInput(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise InvalidInput(f"{path}:1: config must be a JSON object")
    for key, val in data.items():
        if key not in _FIELDS:
            raise InvalidInput(f"{path}:{_line_of(text, key)}: unknown config key {key!r}")
        typ = _FIELDS[key]
        if not isinstance(val, typ) or isinstance(val, bool):
            raise InvalidInput(f"{path}:{_line_of(text, key)}: {key} has the wrong type")
    for key in ("punctures", "reference_loop_path"):
        if key not in data:
            raise InvalidInput(f"{path}:1: missing required key {key!r}")
    pts = data["punctures"]
    if not all(isinstance(p, list) and len(p) == 2 and all(isinstance(c, (int, float)) for c in p) for p in pts):
        raise InvalidInput(f"{path}:{_line_of(text, 'punctures')}: punctures must be a list of [x, y] pairs")
    return ExperimentConfig(**data, base_dir=path.parent)


def _preset_config(name, outdir) -> ExperimentConfig:
    pr = harness._preset(name)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    ref = out / f"{name}_reference.json"
    dump_loop(pr.reference(), ref)
    return ExperimentConfig([list(z) for z in pr.punctures], str(ref.resolve()), n=pr.n, R=pr.R)


def _resolve_config(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = _preset_config(args.preset, args.out_dir or ".")
    else:
        raise InvalidInput("give --config or --preset")
    for key in ("n", "R", "seed", "iterations", "thin", "burnin"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "out_dir", None):
        cfg.output_dir = args.out_dir
    return cfg


# -- subcommands -------------------------------------------------------------


def cmd_shortest(args) -> int:
    cfg = _resolve_config(args)
    p = cfg.params()
    sl = oracle.shortest_loop(p)
    out = Path(args.out) if args.out else Path(cfg.output_dir) / "shortest.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({
        "vertices": sl.polygon.tolist(), "length": sl.length, "punctures": list(sl.pins),
        "class_word": homotopy.format_word(sl.class_word), "certified": sl.certified,
    }, indent=2) + "\n")
    print(f"lstar {sl.length:.12g}")
    if not sl.certified:
        raise NotCertified(f"shortest loop not certified ({sl.note}); best polygon written to {out}")
    return 0


def _sample_one(job):
    cfg, seed, path = job
    p = cfg.params()
    scfg = cfg.sampler(p, seed)
    initial = discretize(p.cls.reference, p.n)
    t0 = time.perf_counter()
    trace = mcmc.run(scfg, initial)
    mcmc.write_trace(trace, path)
    no_ops = (trace.degenerate[-1] + trace.failed[-1]) if len(trace) else 0
    return str(path), len(trace), no_ops, time.perf_counter() - t0


def cmd_sample(args) -> int:
    cfg = _resolve_config(args)
    cfg.params()  # validate before spawning workers
    out = Path(args.out) if args.out else Path(cfg.output_dir) / "trace.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.chains <= 1:
        jobs = [(cfg, cfg.seed, out)]
    else:
        jobs = [(cfg, cfg.seed + k, out.with_name(f"{out.stem}.chain{k}{out.suffix}")) for k in range(args.chains)]
    if len(jobs) > 1:
        with ProcessPoolExecutor(min(len(jobs), os.cpu_count() or 1)) as ex:
            results = list(ex.map(_sample_one, jobs))
    else:
        results = [_sample_one(jobs[0])]
    for path, saves, no_ops, wall in results:
        print(f"trace {path} saves {saves} no_ops {no_ops} wall {wall:.2f}s")
    return 0


def cmd_analyze(args) -> int:
    cfg = _resolve_config(args)
    trace = mcmc.read_trace(args.trace)
    if len(trace) == 0:
        raise InvalidInput(f"{args.trace}: empty trace")
    p = cfg.params()
    if trace.n != p.n:
        raise InvalidInput(f"trace has n={trace.n} but config has n={p.n}")
    last = trace.tail(args.last) if args.last else trace
    sl = oracle.shortest_loop(p)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    mean = analytics.mean_free_loop(last.loops)
    dump_loop(mean, outdir / "mean_loop.json")
    pts = np.vstack([lp.vertices for lp in last.loops])
    grid = analytics.kde(last.loops, analytics.GridSpec.around(pts, 0.5, args.grid, args.grid), args.bandwidth)
    grid.to_csv(outdir / "density.csv")
    rep = analytics.concentration_report(last, sl, sorted(cfg.deltas))
    (outdir / "concentration.json").write_text(rep.to_json() + "\n")
    print(f"saves {len(last)} lstar {sl.length:.12g} min_excess {rep.excess_over_lstar['min']:.6g} "
          f"fractions {' '.join(f'{d:g}:{f:.3f}' for d, f in zip(rep.deltas, rep.fractions))}")
    return 0


def _load_points(path):
    try:
        return PunctureSet(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def cmd_word(args) -> int:
    Z = _load_points(args.punctures)
    loop = load_loop(args.loop)
    T = homotopy.build_crossing_structure(Z)
    w = homotopy.word_of(loop, T)
    print(f"{homotopy.format_word(homotopy.reduce(w))} / {homotopy.format_word(homotopy.cyclic_reduce(w))}")
    return 0


def cmd_validate(args) -> int:
    cfg = _resolve_config(args)
    p = cfg.params()
    loop = load_loop(args.loop)
    chk = check_state(loop, p)
    print(f"edges {'pass' if not chk.long_edges else 'fail ' + ','.join(map(str, chk.long_edges))}")
    print(f"punctures {'pass' if not chk.on_puncture else 'fail ' + ','.join(map(str, chk.on_puncture))}")
    print(f"class {'pass' if chk.class_ok else 'fail ' + (chk.note or 'class mismatch')}")
    return 0


def cmd_ratefn(args) -> int:
    try:
        rs = [float(x) for x in args.eval.split(",") if x.strip()]
    except ValueError:
        raise InvalidInput(f"--eval expects comma-separated numbers, got {args.eval!r}") from None
    rr = RadialRate(args.R)
    value, _, saturated = rr.dual(np.array(rs))
    print("r,rate,saturated")
    for r, v, s in zip(rs, value, saturated):
        print(f"{r!r},{'inf' if np.isinf(v) else repr(float(v))},{int(s)}")
    return 0


def cmd_harness(args) -> int:
    only = {int(x) for x in args.only.split(",")} if args.only else None
    rep = harness.run_acceptance(args.preset, args.scale, args.seed, only=only, parallel=args.parallel)
    for c in rep["criteria"]:
        print(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['id']:2d} {c['name']}")
    if args.out:
        Path(args.out).write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    return 0 if rep["passed"] else 2


# -- parser ------------------------------------------------------------------


def _config_args(p, sampling=False):
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--preset", choices=sorted(harness.PRESETS), help="use a built-in scenario instead of --config")
    p.add_argument("--out-dir", help="output directory (overrides output_dir)")
    p.add_argument("--n", type=int)
    p.add_argument("--R", type=float)
    if sampling:
        p.add_argument("--seed", type=int)
        p.add_argument("--iterations", type=int)
        p.add_argument("--thin", type=int)
        p.add_argument("--burnin", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loopcast", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("shortest", help="shortest loop of the class and its length")
    _config_args(p)
    p.add_argument("--out", help="output loop JSON")
    p.set_defaults(func=cmd_shortest)

    p = sub.add_parser("sample", help="run the chain and write a JSON-lines trace")
    _config_args(p, sampling=True)
    p.add_argument("--out", help="trace path")
    p.add_argument("--chains", type=int, default=1, help="independent chains with seeds seed..seed+k-1")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("analyze", help="mean loop, density grid, concentration report")
    _config_args(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--last", type=int, default=0, help="use only the last k saves")
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--bandwidth", type=float)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("word", help="reduced and cyclically reduced crossing words")
    p.add_argument("punctures")
    p.add_argument("loop")
    p.set_defaults(func=cmd_word)

    p = sub.add_parser("validate", help="check a loop against G_n")
    _config_args(p)
    p.add_argument("loop")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("ratefn", help="evaluate the radial rate function")
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--eval", required=True, help="comma-separated radii")
    p.set_defaults(func=cmd_ratefn)

    p = sub.add_parser("harness", help="acceptance battery")
    hs = p.add_subparsers(dest="action", required=True)
    h = hs.add_parser("run")
    h.add_argument("--preset", default="square")
    h.add_argument("--scale", choices=sorted(harness.SCALES), default="desk")
    h.add_argument("--seed", type=int, default=7)
    h.add_argument("--out")
    h.add_argument("--only", help="comma-separated criterion ids")
    h.add_argument("--parallel", type=int, default=1)
    h.set_defaults(func=cmd_harness)
    return ap


def main(argv: Optional[list] = None) -> int:
    level = os.environ.get("LOOPCAST_LOG", "warn").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DegenerateGeometry as exc:
        where = f" (vertex {exc.vertex})" if exc.vertex is not None else ""
        print(f"loopcast: error[{exc.reason}]: {exc}{where}", file=sys.stderr)
        return exc.exit_code
    except LoopcastError as exc:
        print(f"loopcast: error[{exc.reason}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"loopcast: error[io]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
