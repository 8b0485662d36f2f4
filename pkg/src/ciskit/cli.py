"""Command-line front end.

    cis run <config.toml> [--algorithm A] [--epsilon E] [--n-u K] [--seed S]
                          [--threads N] [--out PATH]
    cis summarize <out.json> [more.json ...]
    cis verify <out.json> --trials T --horizon H [--seed S]

`run` executes the configured algorithm and writes a schema-1 JSON document;
`summarize` prints an aligned comparison table; `verify` replays trajectories
under the stored controller and reports the invariance certificate.
"""
from __future__ import annotations

import argparse
import json
import sys

from .algorithms import (
    ControllerTable,
    accelerated,
    baseline_sampled,
    fixpoint,
    verify_invariance,
)
from .config import RunConfig, config_from_dict, load_config
from .geometry import PolyUnion, Polytope
from .intervals import BoxUnion

SCHEMA_VERSION = 1


def run(cfg: RunConfig, threads: int = 1) -> dict:
    """Execute the configured algorithm; returns the output document."""
    model = cfg.model()
    omega = model.omega0
    if cfg.algorithm == "fixpoint":
        result = fixpoint(omega, model, cfg.epsilon, margin_r=cfg.margin_r, threads=threads)
    elif cfg.algorithm == "accelerated":
        result = accelerated(omega, model, cfg.epsilon, margin_r=cfg.margin_r)
    else:
        result = baseline_sampled(omega, model, cfg.epsilon, cfg.n_u, margin_r=cfg.margin_r)
    stats = result.stats
    return {
        "schema": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "cis": result.cis.to_json(),
        "controller": [
            {"box": e.box.to_json(), "inputs": e.inputs.to_json()} for e in result.controller
        ],
        "excluded": [b.to_json() for b in result.excluded],
        "indeterminate": [b.to_json() for b in result.indeterminate],
        "stats": {
            "pops": stats.pops,
            "sweeps": stats.sweeps,
            "wall_ms": int(round(stats.wall_ms)),
            "volume_fraction": stats.volume_fraction,
            "rho": stats.rho,
            "r": stats.r,
        },
    }


def write_output(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_output(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema {doc.get('schema')!r}")
    return doc


def _method_label(doc: dict) -> str:
    run_cfg = doc["config"]["run"]
    algo = run_cfg["algorithm"]
    if algo == "baseline":
        return f"baseline (n_u = {run_cfg['n_u']})"
    return algo


def summarize(docs) -> str:
    """Aligned comparison table over one or more output documents."""
    header = ["Method", "eps", "Iterations", "Time (s)", "Volume"]
    rows = [header]
    for doc in docs:
        st = doc["stats"]
        rows.append(
            [
                _method_label(doc),
                f"{doc['config']['run']['epsilon']:g}",
                str(st["pops"]),
                f"{st['wall_ms'] / 1000.0:.2f}",
                f"{100.0 * st['volume_fraction']:.1f}%",
            ]
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for k, r in enumerate(rows):
        lines.append(" | ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        if k == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines)


def controller_from_doc(doc: dict) -> ControllerTable:
    table = ControllerTable()
    for entry in doc["controller"]:
        from .intervals import Box

        table.add(
            Box.from_json(entry["box"]),
            PolyUnion([Polytope.from_json(p) for p in entry["inputs"]]),
        )
    return table


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.algorithm:
        cfg.algorithm = args.algorithm
    if args.epsilon is not None:
        cfg.epsilon = args.epsilon
    if args.n_u is not None:
        cfg.n_u = args.n_u
    if args.seed is not None:
        cfg.seed = args.seed
    if cfg.algorithm == "baseline" and cfg.n_u is None:
        print("error: run.n_u is required for the baseline algorithm", file=sys.stderr)
        return 2
    doc = run(cfg, threads=args.threads)
    out_path = args.out or cfg.output_path or "out.json"
    write_output(doc, out_path)
    st = doc["stats"]
    print(
        f"{_method_label(doc)}: {len(doc['cis'])} boxes, "
        f"volume {100.0 * st['volume_fraction']:.1f}% of omega, "
        f"{st['pops']} pops in {st['wall_ms']} ms -> {out_path}"
    )
    return 0


def _cmd_summarize(args) -> int:
    print(summarize([load_output(p) for p in args.outputs]))
    return 0


def _cmd_verify(args) -> int:
    doc = load_output(args.output)
    cfg = config_from_dict(doc["config"])
    model = cfg.model()
    cis = BoxUnion.from_json(doc["cis"])
    table = controller_from_doc(doc)
    seed = args.seed if args.seed is not None else cfg.seed
    rep = verify_invariance(cis, table, model, trials=args.trials, horizon=args.horizon, seed=seed)
    print(
        f"verify: {rep.passes}/{rep.trials} trajectories stayed inside over "
        f"{rep.steps} steps ({rep.failures} failures, worst margin {rep.worst_margin:.3e})"
    )
    return 0 if rep.all_passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cis",
        description="Controlled invariant sets of control-affine systems by interval refinement.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an algorithm from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--algorithm", choices=["fixpoint", "accelerated", "baseline"])
    p_run.add_argument("--epsilon", type=float)
    p_run.add_argument("--n-u", dest="n_u", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--out")
    p_run.set_defaults(fn=_cmd_run)

    p_sum = sub.add_parser("summarize", help="print a comparison table of run outputs")
    p_sum.add_argument("outputs", nargs="+")
    p_sum.set_defaults(fn=_cmd_summarize)

    p_ver = sub.add_parser("verify", help="replay trajectories under the stored controller")
    p_ver.add_argument("output")
    p_ver.add_argument("--trials", type=int, default=1000)
    p_ver.add_argument("--horizon", type=int, default=100)
    p_ver.add_argument("--seed", type=int)
    p_ver.set_defaults(fn=_cmd_verify)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
