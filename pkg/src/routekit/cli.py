"""Thin command-line client for the routing service.

Every subcommand builds a JSON request and posts it to the HTTP API. With
--server the request goes to a running instance; without it the app is
mounted in-process, so the CLI works standalone while exercising exactly the
same endpoints.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server.rstrip("/"), timeout=None)
    import warnings

    with warnings.catch_warnings():
        # starlette's TestClient import warns about its httpx pin; harmless here
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(args, path: str, payload: dict) -> int:
    with _client(args.server) as client:
        response = client.post(path, json=payload)
    try:
        doc = response.json()
    except ValueError:
        print(response.text, file=sys.stderr)
        return 1
    if response.status_code >= 400:
        print(json.dumps(doc, indent=2, sort_keys=True), file=sys.stderr)
        return 1
    if isinstance(doc, dict) and "rendered" in doc:
        print(doc["rendered"])
        doc = {k: v for k, v in doc.items() if k != "rendered"}
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _abspath(value: str) -> str:
    return str(Path(value).resolve())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="routekit", description=__doc__)
    parser.add_argument("--server", default=None,
                        help="base URL of a running service; default runs the app in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a tasks/labels corpus")
    p.add_argument("--tasks", required=True)
    p.add_argument("--labels", required=True)

    p = sub.add_parser("gen-synth", help="generate a planted synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--spec", default=None, help="YAML/JSON synthetic spec file (default: stock two-cluster corpus)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-tasks", type=int, default=None)
    p.add_argument("--noise-rate", type=float, default=None)

    def add_training_args(p):
        p.add_argument("--epochs", type=int, default=100)
        p.add_argument("--batch-size", type=int, default=32)
        p.add_argument("--learning-rate", type=float, default=1e-3)
        p.add_argument("--hidden-dim", type=int, default=256)
        p.add_argument("--representation", default="both",
                       choices=["general-only", "task-specific-only", "both"])
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train predictor pairs for strategies")
    p.add_argument("--tasks", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--strategies", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--only", nargs="*", default=None, help="subset of strategy ids")
    add_training_args(p)

    p = sub.add_parser("add-strategy", help="onboard one new strategy into a registry")
    p.add_argument("--tasks", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--strategies", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--strategy-id", required=True)
    add_training_args(p)

    p = sub.add_parser("predict", help="write the prediction matrix for a task file")
    p.add_argument("--registry", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("route", help="assign strategies from a prediction matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--mode", required=True, choices=["sweep", "weighted", "global", "local"])
    p.add_argument("--out", required=True, help="assignment file (directory for sweep)")
    p.add_argument("--w", type=float, default=None)
    p.add_argument("--num-points", type=int, default=21)
    p.add_argument("--budget", type=float, default=None)
    p.add_argument("--resolution", type=int, default=1)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None)

    p = sub.add_parser("evaluate", help="realized accuracy/cost of an assignment")
    p.add_argument("--assignment", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--labels", required=True)

    p = sub.add_parser("report", help="evaluation tables and analyses")
    p.add_argument("--kind", required=True, choices=["table", "transitions", "pareto"])
    p.add_argument("--tasks", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--assignments", nargs="*", default=[], help="assignment files (table)")
    p.add_argument("--baseline", default=None, help="baseline assignment (transitions)")
    p.add_argument("--routed", default=None, help="routed assignment (transitions)")
    p.add_argument("--matrix", default=None, help="prediction matrix (pareto)")
    p.add_argument("--out", default=None, help="output CSV (pareto)")
    p.add_argument("--num-points", type=int, default=21)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True)

    p = sub.add_parser("run", help="run a full experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override the config's output_dir")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        uvicorn.run("routekit.service.app:app", host=args.host, port=args.port)
        return 0

    if args.command == "ingest":
        return _post(args, "/corpus/ingest",
                     {"tasks_path": _abspath(args.tasks), "labels_path": _abspath(args.labels)})

    if args.command == "gen-synth":
        payload = {"out_dir": _abspath(args.out), "seed": args.seed}
        if args.spec:
            import yaml

            with open(args.spec, "r", encoding="utf-8") as fh:
                payload["spec"] = yaml.safe_load(fh)
        if args.n_tasks is not None:
            payload["n_tasks"] = args.n_tasks
        if args.noise_rate is not None:
            payload["noise_rate"] = args.noise_rate
        return _post(args, "/corpus/synthetic", payload)

    def training_payload():
        return {
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "learning_rate": args.learning_rate,
            "hidden_dim": args.hidden_dim,
            "representation": args.representation,
        }

    if args.command == "train":
        payload = {
            "tasks_path": _abspath(args.tasks), "labels_path": _abspath(args.labels),
            "strategies_path": _abspath(args.strategies), "registry_dir": _abspath(args.registry),
            "seed": args.seed, "training": training_payload(),
        }
        if args.only:
            payload["strategy_ids"] = args.only
        return _post(args, "/registry/train", payload)

    if args.command == "add-strategy":
        return _post(args, "/registry/add-strategy", {
            "tasks_path": _abspath(args.tasks), "labels_path": _abspath(args.labels),
            "strategies_path": _abspath(args.strategies), "registry_dir": _abspath(args.registry),
            "strategy_id": args.strategy_id, "seed": args.seed, "training": training_payload(),
        })

    if args.command == "predict":
        return _post(args, "/predict/matrix", {
            "registry_dir": _abspath(args.registry), "tasks_path": _abspath(args.tasks),
            "out_path": _abspath(args.out),
        })

    if args.command == "route":
        payload = {
            "matrix_path": _abspath(args.matrix), "mode": args.mode,
            "out_path": _abspath(args.out), "num_points": args.num_points,
            "resolution": args.resolution,
        }
        if args.w is not None:
            payload["w"] = args.w
        if args.budget is not None:
            payload["budget_per_task"] = args.budget
        if args.normalize is not None:
            payload["normalize"] = args.normalize
        return _post(args, "/route", payload)

    if args.command == "evaluate":
        return _post(args, "/evaluate", {
            "assignment_path": _abspath(args.assignment),
            "tasks_path": _abspath(args.tasks), "labels_path": _abspath(args.labels),
        })

    if args.command == "report":
        if args.kind == "table":
            return _post(args, "/report/table", {
                "assignment_paths": [_abspath(p) for p in args.assignments],
                "tasks_path": _abspath(args.tasks), "labels_path": _abspath(args.labels),
            })
        if args.kind == "transitions":
            if not (args.baseline and args.routed):
                print("transitions report needs --baseline and --routed", file=sys.stderr)
                return 2
            return _post(args, "/report/transitions", {
                "baseline_assignment_path": _abspath(args.baseline),
                "routed_assignment_path": _abspath(args.routed),
                "tasks_path": _abspath(args.tasks), "labels_path": _abspath(args.labels),
            })
        if not (args.matrix and args.out):
            print("pareto report needs --matrix and --out", file=sys.stderr)
            return 2
        return _post(args, "/report/pareto", {
            "matrix_path": _abspath(args.matrix),
            "tasks_path": _abspath(args.tasks), "labels_path": _abspath(args.labels),
            "out_csv": _abspath(args.out), "num_points": args.num_points,
            "normalize": args.normalize,
        })

    if args.command == "run":
        payload = {"config_path": _abspath(args.config)}
        if args.out:
            payload["output_dir"] = _abspath(args.out)
        return _post(args, "/experiment/run", payload)

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    raise SystemExit(main())
