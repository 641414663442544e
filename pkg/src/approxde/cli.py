"""Command-line front end.

Exit codes: 0 on success (verdict true or not applicable), 2 when a
certificate's verdict is false or a validation fails, 1 on errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import BoundCertificate, CertificationError, certify, validate_monte_carlo
from .equivalence import coarsest_partition, coarsest_partition_frozen
from .model import (
    ModelError,
    Partition,
    extend,
    gen_htree,
    instantiate,
    parse_model,
    parse_partition_spec,
    serialize_model,
)
from .reference import EXACT_TOL, build_constraints, quotient_bde, quotient_fde, solve_reference

log = logging.getLogger("approxde")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage


@dataclass
class RunConfig:
    command: str = ""
    model: str | None = None
    mode: str = "bde"
    epsilon: float = 0.0
    tau: float = 7.0
    dt: float = 0.023
    partition: str | None = None
    params: str = "coefficients"
    remainder: str = "auto"
    seed: int = 0
    samples: int = 100
    safety: float = 1.01
    out: str | None = None

    def check(self) -> None:
        for name in ("epsilon", "tau", "dt", "safety"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"--{name} must be finite")
        if self.epsilon < 0:
            raise ValueError("--epsilon must be >= 0")
        if self.tau <= 0 or self.dt <= 0:
            raise ValueError("--tau and --dt must be positive")
        if self.safety < 1:
            raise ValueError("--safety must be >= 1")
        if self.samples < 0:
            raise ValueError("--samples must be >= 0")

    @property
    def chi(self) -> str:
        return "B" if self.mode == "bde" else "F"


def write_certificate(cert: BoundCertificate, path: str | Path | None) -> str:
    text = json.dumps(cert.to_dict(), indent=2) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
    return text


def read_certificate(path: str | Path) -> BoundCertificate:
    return BoundCertificate.from_dict(json.loads(Path(path).read_text()))


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except CertificationError as exc:
        raise StageError(f"{name}/{exc.stage}", exc.cause) from exc
    except (ValueError, ArithmeticError, OSError, RuntimeError, KeyError) as exc:
        raise StageError(name, exc) from exc


def _load(cfg: RunConfig):
    src = cfg.model
    text = sys.stdin.read() if src in (None, "-") else Path(src).read_text()
    m, G = parse_model(text)
    if cfg.partition:
        G = parse_partition_spec(cfg.partition, m.names)
    if G is None:
        G = Partition.single(m.n)
    return text, m, G


def _reduce(cfg: RunConfig, m, G):
    fn = coarsest_partition_frozen if cfg.params == "frozen" else coarsest_partition
    return _stage("reduce", fn, m, G, cfg.epsilon, cfg.chi)


def _pipeline(cfg: RunConfig):
    text, m, G = _stage("parse", _load, cfg)
    H = _reduce(cfg, m, G)
    e = _stage("extend", extend, m, cfg.params)
    cs = _stage("constraints", build_constraints, e, H, cfg.chi)
    sigma_star = _stage("reference", solve_reference, e, cs)
    return text, m, G, H, e, cs, sigma_star


def _partition_json(m, H) -> dict:
    return {"blocks": H.to_names(m.names), "count": len(H)}


def cmd_reduce(cfg: RunConfig, as_json: bool) -> int:
    text, m, G = _stage("parse", _load, cfg)
    H = _reduce(cfg, m, G)
    doc = {"partition": _partition_json(m, H), "run_config": dataclasses.asdict(cfg)}
    if as_json:
        _emit(json.dumps(doc, indent=2) + "\n", cfg.out)
    else:
        lines = [f"# coarsest {cfg.epsilon:g}-{cfg.mode.upper()} refining the initial partition: {len(H)} blocks",
                 "partition " + H.format(m.names), json.dumps(doc["partition"])]
        _emit("\n".join(lines) + "\n", cfg.out)
    return 0


def cmd_reference(cfg: RunConfig, as_json: bool, sigma_out: str | None) -> int:
    _, m, G, H, e, cs, sigma_star = _pipeline(cfg)
    ref = instantiate(e, sigma_star)
    diff = np.asarray(e.sigma0) - sigma_star
    doc = {
        "partition": _partition_json(m, H),
        "constraints": cs.format_rows(),
        "sigma_star": dict(zip(e.names, map(float, sigma_star))),
        "distance_inf": float(np.max(np.abs(diff))) if diff.size else 0.0,
        "distance_2": float(np.linalg.norm(diff)),
        "run_config": dataclasses.asdict(cfg),
    }
    if sigma_out:
        Path(sigma_out).write_text(json.dumps(doc, indent=2) + "\n")
    header = [f"reference model: {cfg.epsilon:g}-{cfg.mode.upper()} made exact, "
              f"distance_inf = {doc['distance_inf']:.6g}"]
    if as_json:
        _emit(json.dumps(doc, indent=2) + "\n", None)
        if cfg.out:
            Path(cfg.out).write_text(serialize_model(ref, H, header))
    else:
        _emit(serialize_model(ref, H, header), cfg.out)
    return 0


def cmd_quotient(cfg: RunConfig) -> int:
    _, m, G, H, e, cs, sigma_star = _pipeline(cfg)
    ref = instantiate(e, sigma_star)
    fn = quotient_bde if cfg.chi == "B" else quotient_fde
    q = _stage("quotient", fn, ref, H)
    _emit(serialize_model(q, header=[f"{cfg.mode.upper()} quotient of the reference model ({len(H)} blocks)"]),
          cfg.out)
    return 0


def _table(cert: BoundCertificate, elapsed: float) -> str:
    head = f"{'time(s)':>10} {'lambda':>10} {'delta':>10} {'||.||':>10} {'lambda*||.||':>13}  verdict"
    delta = "inf" if math.isinf(cert.delta) else f"{cert.delta:.3e}"
    row = (f"{elapsed:>10.2e} {cert.lam:>10.3f} {delta:>10} {cert.distance_inf:>10.3e} "
           f"{cert.lam * cert.distance_inf:>13.3e}  {'true' if cert.verdict else 'false'}")
    return head + "\n" + row + "\n"


def cmd_certify(cfg: RunConfig, as_json: bool) -> int:
    t0 = time.perf_counter()
    text, m, G, H, e, cs, sigma_star = _pipeline(cfg)
    cert = _stage("certify", certify, e, sigma_star, cfg.tau, cfg.dt,
                  safety=cfg.safety, remainder=cfg.remainder)
    elapsed = time.perf_counter() - t0
    moved = []
    if cfg.chi == "B":
        moved = [nm for nm, a, b in zip(m.names, m.init, sigma_star[: m.n])
                 if abs(a - b) > EXACT_TOL * max(1.0, abs(a))]
        if moved:
            cert.warnings.append("reference projection moved initial conditions of: " + " ".join(moved))
    cert.meta.update({
        "run_config": dataclasses.asdict(cfg),
        "seed": cfg.seed,
        "partition": _partition_json(m, H),
        "model_text": text,
        "sigma_star": dict(zip(e.names, map(float, sigma_star))),
        "version": __version__,
    })
    cert.meta["timings"]["total"] = elapsed
    if cfg.out:
        write_certificate(cert, cfg.out)
    if as_json:
        write_certificate(cert, None)
    else:
        sys.stdout.write(f"partition ({len(H)} blocks): {H.format(m.names)}\n")
        sys.stdout.write(_table(cert, elapsed))
        for w in cert.warnings:
            sys.stdout.write(f"warning: {w}\n")
    return 0 if cert.verdict else 2


def cmd_validate(cert_path: str, cfg: RunConfig, as_json: bool) -> int:
    cert = _stage("read certificate", read_certificate, cert_path)
    meta = cert.meta
    if "model_text" not in meta or "sigma_star" not in meta:
        raise StageError("read certificate", ValueError("certificate lacks embedded model/sigma_star"))
    stored = meta.get("run_config", {})
    m, _ = _stage("parse", parse_model, meta["model_text"])
    e = _stage("extend", extend, m, stored.get("params", "coefficients"))
    sigma_star = _stage("read certificate", e.vector, meta["sigma_star"])
    rep = _stage("validate", validate_monte_carlo, e, sigma_star, cert, cfg.samples, cfg.seed)
    doc = rep.to_dict()
    doc["run_config"] = dataclasses.asdict(cfg)
    if as_json:
        _emit(json.dumps(doc, indent=2) + "\n", cfg.out)
    else:
        lines = [f"samples: {rep.samples}  radius: {rep.radius:.3e}",
                 f"max observed ratio: {rep.max_ratio:.6g}  lambda: {rep.lam:.6g}",
                 f"result: {'PASS' if rep.passed else 'FAIL'}"]
        if rep.witness_ratio is not None:
            lines.append(f"linear witness ratio: {rep.witness_ratio:.6g} at t = {rep.witness_time:.4g} "
                         f"(lambda/2 = {rep.lam / 2:.6g})")
        _emit("\n".join(lines) + "\n", cfg.out)
    ok = rep.passed and rep.witness_passed is not False
    return 0 if ok else 2


def cmd_gen_htree(args) -> int:
    m, P = gen_htree(args.depth, args.eta, args.seed, args.vs)
    header = [f"H-tree depth={args.depth} eta={args.eta!r} seed={args.seed} vs={args.vs!r}",
              "R and C use the nominal table values as dimensionless magnitudes"]
    _emit(serialize_model(m, P, header), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="approxde", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        if model:
            sp.add_argument("model", nargs="?", default="-", help="model file ('-' or omitted: stdin)")
        sp.add_argument("--mode", choices=("bde", "fde"), default="bde")
        sp.add_argument("--epsilon", type=float, default=0.0)
        sp.add_argument("--partition", help="initial partition, e.g. '{x1} {x2 x3}'")
        sp.add_argument("--params", choices=("coefficients", "frozen"), default="coefficients",
                        help="parameters of the extended model: one per coefficient, or the "
                             "model's zero-derivative variables")
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--json", action="store_true")

    sp = sub.add_parser("reduce", help="coarsest eps-BDE/FDE refining the initial partition")
    common(sp)
    sp = sub.add_parser("reference", help="nearest exactly reducible model")
    common(sp)
    sp.add_argument("--sigma-out", help="write sigma* and constraints as JSON here")
    sp = sub.add_parser("quotient", help="exact quotient of the reference model")
    common(sp)
    sp = sub.add_parser("certify", help="reduce, build the reference model and certify the error bound")
    common(sp)
    sp.add_argument("--tau", type=float, default=7.0)
    sp.add_argument("--dt", type=float, default=0.023)
    sp.add_argument("--safety", type=float, default=1.01)
    sp.add_argument("--remainder", choices=("auto", "generic", "hessian"), default="auto")
    sp.add_argument("--seed", type=int, default=0)
    sp = sub.add_parser("validate", help="Monte-Carlo check of an existing certificate")
    sp.add_argument("certificate")
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.add_argument("--json", action="store_true")
    sp = sub.add_parser("gen-htree", help="write an H-tree RC benchmark model",
                        description="Nominal R/C table values are used as dimensionless magnitudes "
                                    "(milli-ohm and femto-farad prefixes dropped).")
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--eta", type=float, default=0.0, help="relative component tolerance")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--vs", type=float, default=2.0, help="source voltage")
    sp.add_argument("--out")
    return p


def run_command(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gen-htree":
            return cmd_gen_htree(args)
        cfg = RunConfig(command=args.command, out=args.out)
        for name in ("model", "mode", "epsilon", "partition", "params", "tau", "dt", "safety",
                     "remainder", "seed", "samples"):
            if hasattr(args, name):
                setattr(cfg, name, getattr(args, name))
        cfg.check()
        if args.command == "reduce":
            return cmd_reduce(cfg, args.json)
        if args.command == "reference":
            return cmd_reference(cfg, args.json, args.sigma_out)
        if args.command == "quotient":
            return cmd_quotient(cfg)
        if args.command == "certify":
            return cmd_certify(cfg, args.json)
        if args.command == "validate":
            return cmd_validate(args.certificate, cfg, args.json)
    except StageError as exc:
        print(f"error [{exc.stage}]: {exc.__cause__ or exc}", file=sys.stderr)
        return 1
    except (ModelError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
