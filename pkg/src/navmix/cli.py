"""Command-line entry points: scenario runner and suite runner."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .gateway import serve_gateway
from .metrics import run_suite
from .simulator import load_scenario, run


def _load_document(path: str, args) -> dict:
    doc = json.loads(Path(path).read_text())
    cfg = doc.setdefault("config", {})
    inf = cfg.setdefault("inference", {})
    if args.seed is not None:
        inf["seed"] = args.seed
    if args.samples is not None:
        inf["samples"] = args.samples
    if args.method is not None:
        inf["method"] = args.method
    if args.ticks is not None:
        cfg["tick_limit"] = args.ticks
    return doc


def run_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="navmix-run",
        description="Run a scenario headless or host it behind the live gateway.")
    parser.add_argument("--scenario", required=True, help="scenario JSON path")
    parser.add_argument("--seed", type=int, default=None, help="override inference seed")
    parser.add_argument("--samples", type=int, default=None,
                        help="override sample count / MH iterations")
    parser.add_argument("--method", choices=["importance", "mh", "brute"], default=None)
    parser.add_argument("--serve", type=int, metavar="PORT", default=None,
                        help="gateway mode: host the scenario on this port")
    parser.add_argument("--headless", action="store_true",
                        help="run without the gateway (default unless --serve)")
    parser.add_argument("--out", default=None, help="write the RunLog (JSON lines) here")
    parser.add_argument("--ticks", type=int, default=None, help="override tick limit")
    args = parser.parse_args(argv)

    doc = _load_document(args.scenario, args)

    if args.serve is not None and not args.headless:
        server = serve_gateway(host="0.0.0.0", port=args.serve, scenario_document=doc)
        print(f"gateway listening on port {server.port}; ctrl-c to stop")
        try:
            server._thread.join()
        except KeyboardInterrupt:
            server.shutdown()
        return 0

    log = run(load_scenario(doc))
    if args.out:
        Path(args.out).write_text(log.to_jsonl())
    summary = dict(log.summary)
    summary["log_sha256"] = log.sha256()
    print(json.dumps(summary, sort_keys=True))
    return 0


def suite_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="navmix-suite",
        description="Execute a scenario x method x seed suite and emit CSV metrics.")
    parser.add_argument("--suite", required=True, help="suite JSON path")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers")
    args = parser.parse_args(argv)

    suite_doc = json.loads(Path(args.suite).read_text())
    suite_doc.setdefault("base_dir", str(Path(args.suite).parent))
    result = run_suite(suite_doc, out_dir=args.out, jobs=args.jobs)
    bad = [r for r in result.rows if str(r.get("status", "")).startswith("error")]
    print(f"{len(result.rows)} runs, {len(bad)} failed; results in {args.out}")
    if result.oracle_rows:
        agrees = [r for r in result.oracle_rows if r.get("agree") == 1]
        print(f"oracle rows: {len(result.oracle_rows)}, agreements: {len(agrees)}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(run_main())
