"""Command-line front door: configuration, orchestration, manifests.

Subcommands: simulate, propagation, entropy, invariance, norms, checks.
Flags: --config, --seed, --replicas, --quick, --out-dir.  Exit codes:
0 pass, 1 check failure, 2 configuration error.

Every run writes a JSON manifest (full config echo, seed policy, code hash,
output paths) before computing, and a status marker that stays valid if the
run is interrupted.  Re-running an identical manifest reproduces bit-identical
CSV output; all randomness flows through the noise policy and no module
constructs an ad hoc generator.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - version-dependent import
    import tomli as tomllib

from .grid import RealField, TorusGrid, save_snapshot
from .noise import RngPolicy
from . import checks as Checks
from . import dynamics as D
from . import entropy as E
from . import gaussian as G

__all__ = ["main"]


class ConfigError(Exception):
    def __init__(self, problems):
        self.problems = problems
        super().__init__("; ".join(problems))


DEFAULTS = {
    "grid": {"L": float(np.pi), "N": 64},
    "dynamics": {
        "lambda": 1.0,
        "mu": 1.0,
        "dt": 0.005,
        "T": 1.0,
        "scheme": "dpd-exponential",
    },
    "noise": {"seed": 0},
    "output": {"snapshot_every": 5},
    "propagation": {"sub_ls": [1.0, 2.0, 4.0], "replicas": 128, "test_radius": 0.6},
    "entropy": {"t": 1.0, "replicas": 64},
}


def _deep_update(base: dict, extra: dict) -> dict:
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in base.items()}
    for sec, val in extra.items():
        if isinstance(val, dict):
            out.setdefault(sec, {})
            out[sec].update(val)
        else:
            out[sec] = val
    return out


def load_config(path: str | None) -> dict:
    cfg = {}
    if path is not None:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    merged = _deep_update(DEFAULTS, cfg)
    problems = []

    def check(section, key, typ, pred=None, message=None):
        val = merged.get(section, {}).get(key)
        if val is None:
            problems.append(f"{section}.{key}: missing")
            return
        if typ is float and isinstance(val, int):
            val = float(val)
            merged[section][key] = val
        if not isinstance(val, typ):
            problems.append(f"{section}.{key}: expected {typ.__name__}, got {type(val).__name__}")
            return
        if pred is not None and not pred(val):
            problems.append(f"{section}.{key}: {message}")

    check("grid", "L", float, lambda v: v > 0, "L must be positive")
    check("grid", "N", int, lambda v: v == 1 or (v > 0 and v % 2 == 0),
          "N must be a positive even integer")
    check("dynamics", "lambda", float, lambda v: v >= 0, "lambda must be positive")
    check("dynamics", "mu", float)
    check("dynamics", "dt", float, lambda v: v > 0, "dt must be positive")
    check("dynamics", "T", float, lambda v: v > 0, "T must be positive")
    check("dynamics", "scheme", str,
          lambda v: v in ("dpd-exponential", "langevin-euler", "langevin-exponential"),
          "scheme must be one of dpd-exponential, langevin-euler, langevin-exponential")
    check("noise", "seed", int, lambda v: v >= 0, "seed must be nonnegative")
    if problems:
        raise ConfigError(problems)
    return merged


def code_version_hash() -> str:
    pkg = Path(__file__).parent
    digest = hashlib.sha256()
    for path in sorted(pkg.glob("*.py")):
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()[:16]


def write_manifest(out_dir: Path, experiment: str, cfg: dict, outputs: list[str]) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "experiment": experiment,
        "config": cfg,
        "seed_policy": RngPolicy(cfg["noise"]["seed"]).to_manifest(),
        "code_version": code_version_hash(),
        "outputs": outputs,
        "started_unix": time.time(),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    (out_dir / "status.json").write_text(json.dumps({"status": "running"}))
    return path


def finish(out_dir: Path, ok: bool) -> None:
    (out_dir / "status.json").write_text(
        json.dumps({"status": "complete" if ok else "failed"})
    )


def _sim_objects(cfg: dict):
    grid = TorusGrid(cfg["grid"]["L"], cfg["grid"]["N"])
    policy = RngPolicy(cfg["noise"]["seed"])
    dyn = cfg["dynamics"]
    sim = D.SimConfig(
        grid=grid, lam=dyn["lambda"], mu=dyn["mu"], dt=dyn["dt"], T=dyn["T"],
        scheme=dyn["scheme"], policy=policy,
    )
    return grid, policy, sim


def cmd_simulate(cfg: dict, out_dir: Path, args) -> int:
    grid, policy, sim = _sim_objects(cfg)
    cadence = int(cfg["output"]["snapshot_every"])
    n = sim.n_steps()
    outputs = ["observables.csv"] + [
        f"snapshot_{k:06d}.phi4" for k in range(cadence, n + 1, cadence)
    ]
    write_manifest(out_dir, "simulate", cfg, outputs)
    rows = []
    state = D.dpd_init(sim, None, batch=1)
    phi_lang = np.zeros(grid.shape)
    phi = phi_lang
    try:
        for k in range(n):
            slab = D.sample_slab_batch(policy, grid, sim.dt, k, range(1))
            if sim.scheme == "dpd-exponential":
                state = D.dpd_step(state, sim, slab)
                phi, t = state.phi()[0], state.t
            else:
                phi_lang = D.langevin_step(
                    phi_lang, sim, D.NoiseSlab(grid, sim.dt, slab.increments[0], k, 0)
                )
                phi, t = phi_lang, (k + 1) * sim.dt
            mag = float(grid.integrate(phi) / grid.volume)
            chi = float(grid.integrate(phi) ** 2 / grid.volume)
            rows.append((t, mag, chi, float((phi**2).mean())))
            if (k + 1) % cadence == 0:
                save_snapshot(out_dir / f"snapshot_{k + 1:06d}.phi4", RealField(grid, phi))
    except D.BlowUpError as err:
        last = np.asarray(err.state.v if hasattr(err.state, "v") else err.state)
        save_snapshot(out_dir / "blowup_last_good.phi4",
                      RealField(grid, last.reshape(grid.shape[-2:]) if last.ndim == 2 else last[0]))
        finish(out_dir, False)
        print(f"blow-up detected: {err}", file=sys.stderr)
        return 1
    with open(out_dir / "observables.csv", "w") as fh:
        fh.write("t,magnetisation,chi_sample,phi2\n")
        for r in rows:
            fh.write(",".join(repr(x) for x in r) + "\n")
    finish(out_dir, True)
    print(f"simulate: {n} steps, outputs in {out_dir}")
    return 0


def cmd_propagation(cfg: dict, out_dir: Path, args) -> int:
    grid, policy, sim = _sim_objects(cfg)
    prop = cfg["propagation"]
    replicas = int(args.replicas or prop["replicas"])
    if args.quick:
        replicas = max(replicas // 4, 16)
    write_manifest(out_dir, "propagation", cfg, ["propagation.csv"])
    f = {"f": G.ProductBump((0.0, 0.0), float(prop["test_radius"])).values(grid)}
    res = D.coupled_run(sim, [float(x) for x in prop["sub_ls"]], f, range(replicas))
    with open(out_dir / "propagation.csv", "w") as fh:
        fh.write("L,t,delta,delta_err,pathwise,pathwise_err\n")
        for row in res["volumes"]:
            fh.write(
                f"{row['L']!r},{res['T']!r},{row['delta_f']!r},{row['delta_f_err']!r},"
                f"{row['pathwise_f']!r},{row['pathwise_f_err']!r}\n"
            )
    deltas = [row["delta_f"] for row in res["volumes"]]
    monotone = all(deltas[i] >= deltas[i + 1] - 1e-12 for i in range(len(deltas) - 1))
    (out_dir / "verdict.json").write_text(
        json.dumps({"monotone_in_L": bool(monotone), "deltas": deltas})
    )
    finish(out_dir, True)
    print(f"propagation: wrote {out_dir / 'propagation.csv'} (monotone={monotone})")
    return 0


def cmd_entropy(cfg: dict, out_dir: Path, args) -> int:
    grid, policy, sim = _sim_objects(cfg)
    ent = cfg["entropy"]
    replicas = int(args.replicas or ent["replicas"])
    if args.quick:
        replicas = max(replicas // 4, 16)
    write_manifest(out_dir, "entropy", cfg, ["entropy_report.json"])
    report = E.assemble_entropy_report(sim, float(ent["t"]), None, range(replicas))
    report.to_json(out_dir / "entropy_report.json")
    finish(out_dir, True)
    print(f"entropy: total upper bound {report.total:.4f} -> {out_dir / 'entropy_report.json'}")
    return 0


def cmd_invariance(cfg: dict, out_dir: Path, args) -> int:
    write_manifest(out_dir, "invariance", cfg, ["invariance.json"])
    res = Checks.check_invariance(quick=args.quick, seed=cfg["noise"]["seed"] or 105)
    (out_dir / "invariance.json").write_text(json.dumps(res, indent=2, default=float))
    finish(out_dir, res["passed"])
    print(f"invariance: {'PASS' if res['passed'] else 'FAIL'}")
    return 0 if res["passed"] else 1


def cmd_norms(cfg: dict, out_dir: Path, args) -> int:
    from .norms import write_report_csv

    write_manifest(out_dir, "norms", cfg, ["norm_reports.csv"])
    res = Checks.check_norm_suite(quick=args.quick, seed=cfg["noise"]["seed"] or 110)
    write_report_csv(out_dir / "norm_reports.csv", res["reports"])
    finish(out_dir, res["passed"])
    print(f"norms: {'PASS' if res['passed'] else 'FAIL'} -> {out_dir / 'norm_reports.csv'}")
    return 0 if res["passed"] else 1


def cmd_checks(cfg: dict, out_dir: Path, args) -> int:
    suite = args.suite
    if suite not in Checks.SUITES:
        print(f"unknown suite {suite!r}: choose from {sorted(Checks.SUITES)}", file=sys.stderr)
        return 2
    write_manifest(out_dir, f"checks-{suite}", cfg, ["checks.jsonl"])
    results = []
    with open(out_dir / "checks.jsonl", "w") as fh:
        for fn in Checks.SUITES[suite]:
            res = fn(quick=args.quick)
            results.append(res)
            fh.write(json.dumps(res, default=float) + "\n")
            print(f"[{'PASS' if res['passed'] else 'FAIL'}] {res['check']} ({res['seconds']}s)")
    ok = all(r["passed"] for r in results)
    finish(out_dir, ok)
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="phi4lab",
        description="Simulation and verification toolkit for the dynamical "
        "phi^4 model on periodic 2-d tori.",
    )
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("--seed", type=int, help="override noise.seed")
    parser.add_argument("--replicas", type=int, help="override replica count")
    parser.add_argument("--quick", action="store_true", help="reduced replica counts")
    parser.add_argument("--out-dir", default="phi4lab_out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "propagation", "entropy", "invariance", "norms"):
        sub.add_parser(name)
    pc = sub.add_parser("checks")
    pc.add_argument("suite", nargs="?", default="all",
                    help=f"one of {sorted(Checks.SUITES)}")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        for p in err.problems:
            print(f"config error: {p}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["noise"]["seed"] = args.seed

    out_dir = Path(args.out_dir) / args.command
    handler = {
        "simulate": cmd_simulate,
        "propagation": cmd_propagation,
        "entropy": cmd_entropy,
        "invariance": cmd_invariance,
        "norms": cmd_norms,
        "checks": cmd_checks,
    }[args.command]
    return handler(cfg, out_dir, args)


if __name__ == "__main__":
    sys.exit(main())
