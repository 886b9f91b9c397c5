#!/usr/bin/env python3
"""Run the desk-scale experiment battery on a workspace produced by
build_synth_workspace.py: stage ablations on both tasks plus threshold and
top-k sweeps, emitting CSV/JSON reports and aligned tables.

    python scripts/build_synth_workspace.py --out work/
    python scripts/desk_experiments.py --workspace work/ --out work/results/
"""

import argparse
from pathlib import Path

from hiret.cli import assemble_modules, load_run_config
from hiret.harness import SweepSpec, emit_report, render_report, run_ablation, run_sweep
from hiret.queries import load_queries


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--workspace", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    work = Path(args.workspace)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for task in ("hotpot", "fever"):
        config, parser_ini, base = load_run_config(work / f"run_{task}.ini")
        queries = load_queries(work / f"{task}_queries.jsonl", "jsonl")
        modules = assemble_modules(parser_ini, base, queries)

        print(f"== {task}: ablations")
        rows = []
        for mode in ("full", "no_paragraph", "no_sentence"):
            result = run_ablation(mode, config, queries, modules,
                                  retrain_downstream=(mode == "no_paragraph"))
            rows.append(result.report)
            emit_report(result.report, "json", out / f"{task}_ablation_{mode}.json")
            print(render_report(result.report, "table"), end="")

        print(f"== {task}: h_s sweep")
        spec = SweepSpec(
            parameter="h_s",
            values=tuple(round(0.1 * i, 1) for i in range(10)),
            base_config=config,
        )
        sweep_rows = run_sweep(spec, queries, modules, threads=args.threads)
        emit_report(sweep_rows, "csv", out / f"{task}_sweep_h_s.csv")
        emit_report(sweep_rows, "json", out / f"{task}_sweep_h_s.json")
        print(render_report(sweep_rows, "table"), end="")

        if task == "hotpot":
            print("== hotpot: k_p sweep")
            spec = SweepSpec(parameter="k_p", values=tuple(range(1, 13)), base_config=config)
            sweep_rows = run_sweep(spec, queries, modules, threads=args.threads)
            emit_report(sweep_rows, "csv", out / "hotpot_sweep_k_p.csv")
            print(render_report(sweep_rows, "table"), end="")

    print(f"reports written to {out}/")


if __name__ == "__main__":
    main()
