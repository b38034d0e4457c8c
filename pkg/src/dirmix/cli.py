"""Command-line client for the service API.

Every subcommand issues one HTTP request. Without ``--server`` the app is
driven in process, so no daemon is needed; with ``--server URL`` the same
request goes to a running instance (container and output paths are then
resolved on the server's filesystem). The fully-resolved configuration of
each run is echoed to stderr; machine-readable output goes to files or, for
``fit-dirichlet`` and ``inspect``, to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys


def make_client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _call(server: str | None, path: str, payload: dict) -> dict:
    with make_client(server) as client:
        resp = client.post(path, json=payload)
    if resp.status_code == 422:
        print(f"error: invalid arguments for {path}: {resp.text}", file=sys.stderr)
        raise SystemExit(2)
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        print(f"error: {detail}", file=sys.stderr)
        raise SystemExit(1)
    body = resp.json()
    if isinstance(body, dict) and body.get("resolved_config") is not None:
        print(
            "resolved config: " + json.dumps(body["resolved_config"], sort_keys=True),
            file=sys.stderr,
        )
    return body


def _csv_ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _add_common_bench_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tasks", type=int, default=1000, help="number of episodes")
    p.add_argument("--query-size", type=int, default=75)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--lambda-scale",
        type=float,
        default=1.0,
        help="scale on the protocol's proportion-penalty weight (1.0 = protocol value)",
    )
    p.add_argument("--no-barrier", action="store_true", help="drop the entropic barrier (hard assignments)")
    p.add_argument("--no-mdl", action="store_true", help="drop the proportion penalty (lambda = 0)")
    p.add_argument("--workers", type=int, default=1, help="episode-level process parallelism")
    p.add_argument("--out", help="report path prefix; writes <out>.csv and <out>.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dirmix", description=__doc__)
    parser.add_argument("--server", help="base URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic Dirichlet-mixture container")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--alpha", required=True, help="rows 'a,b,c;d,e,f' of positive reals")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--proportions", help="comma-separated mixture weights (default uniform)")
    p.add_argument("--dataset-name", default="synthetic")
    p.add_argument("--dtype", choices=["f32", "f64"], default="f64")
    p.add_argument("--out", required=True)

    p = sub.add_parser("cluster", help="zero-shot benchmark on a labeled container")
    p.add_argument("--in", dest="container", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--min-classes", type=int, default=3)
    p.add_argument("--max-classes", type=int, default=10)
    p.add_argument("--no-matching", action="store_true", help="evaluate with per-cluster argmax instead of matching")
    _add_common_bench_flags(p)

    p = sub.add_parser("fewshot", help="few-shot benchmark on a labeled container")
    p.add_argument("--in", dest="container", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--shots", type=int, default=4)
    p.add_argument("--k-eff", type=int, default=5)
    _add_common_bench_flags(p)

    p = sub.add_parser("fit-dirichlet", help="fit one parameter vector to a container's rows")
    p.add_argument("--in", dest="container", required=True)
    p.add_argument("--algo", choices=["quadratic", "minka"], default="quadratic")
    p.add_argument("--eps", type=float, default=1e-13)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--init", help="comma-separated starting vector (default all ones)")

    p = sub.add_parser("benchmark", help="sweep query size or shot count")
    p.add_argument("--in", dest="container", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--sweep", choices=["query-size", "shots"], required=True)
    p.add_argument("--values", type=_csv_ints, required=True, help="comma-separated sweep values")
    p.add_argument("--min-classes", type=int, default=3)
    p.add_argument("--max-classes", type=int, default=10)
    p.add_argument("--shots", type=int, default=4)
    p.add_argument("--k-eff", type=int, default=5)
    p.add_argument("--no-matching", action="store_true")
    _add_common_bench_flags(p)
    p.set_defaults(tasks=100)

    p = sub.add_parser("inspect", help="print a container summary as JSON")
    p.add_argument("--in", dest="container", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)

    return parser


def _cmd_synth(args) -> int:
    body = _call(
        args.server,
        "/synth",
        {
            "classes": args.classes,
            "alpha": args.alpha,
            "n": args.n,
            "seed": args.seed,
            "proportions": args.proportions,
            "dataset_name": args.dataset_name,
            "dtype": args.dtype,
            "out": args.out,
        },
    )
    print(
        f"wrote {body['out']} ({body['n_samples']} x {body['dim']}), "
        f"labels per class {body['label_histogram']}",
        file=sys.stderr,
    )
    return 0


def _cmd_cluster(args) -> int:
    body = _call(
        args.server,
        "/cluster",
        {
            "container": args.container,
            "method": args.method,
            "n_tasks": args.tasks,
            "query_size": args.query_size,
            "min_classes": args.min_classes,
            "max_classes": args.max_classes,
            "seed": args.seed,
            "lambda_scale": args.lambda_scale,
            "no_barrier": args.no_barrier,
            "no_mdl": args.no_mdl,
            "matching": not args.no_matching,
            "workers": args.workers,
            "out": args.out,
        },
    )
    print(
        f"{body['method']}: mean accuracy {body['mean_accuracy']:.4f} over "
        f"{body['n_tasks']} tasks ({body['mean_task_seconds']:.4f} s/task)",
        file=sys.stderr,
    )
    return 0


def _cmd_fewshot(args) -> int:
    body = _call(
        args.server,
        "/fewshot",
        {
            "container": args.container,
            "method": args.method,
            "shots": args.shots,
            "k_eff": args.k_eff,
            "query_size": args.query_size,
            "n_tasks": args.tasks,
            "seed": args.seed,
            "lambda_scale": args.lambda_scale,
            "no_barrier": args.no_barrier,
            "no_mdl": args.no_mdl,
            "workers": args.workers,
            "out": args.out,
        },
    )
    print(
        f"{body['method']} ({args.shots}-shot): mean accuracy {body['mean_accuracy']:.4f} "
        f"over {body['n_tasks']} tasks ({body['mean_task_seconds']:.4f} s/task)",
        file=sys.stderr,
    )
    return 0


def _cmd_fit(args) -> int:
    body = _call(
        args.server,
        "/fit-dirichlet",
        {
            "container": args.container,
            "algo": args.algo,
            "eps": args.eps,
            "max_iter": args.max_iter,
            "init": args.init,
        },
    )
    print(json.dumps(body, indent=2))
    return 0


def _cmd_benchmark(args) -> int:
    body = _call(
        args.server,
        "/benchmark",
        {
            "container": args.container,
            "method": args.method,
            "sweep": args.sweep,
            "values": args.values,
            "n_tasks": args.tasks,
            "query_size": args.query_size,
            "min_classes": args.min_classes,
            "max_classes": args.max_classes,
            "shots": args.shots,
            "k_eff": args.k_eff,
            "seed": args.seed,
            "lambda_scale": args.lambda_scale,
            "no_barrier": args.no_barrier,
            "no_mdl": args.no_mdl,
            "matching": not args.no_matching,
            "workers": args.workers,
            "out": args.out,
        },
    )
    for point in body["points"]:
        print(
            f"{args.sweep}={point['value']}: accuracy {point['mean_accuracy']:.4f} "
            f"({point['mean_task_seconds']:.4f} s/task)",
            file=sys.stderr,
        )
    return 0


def _cmd_inspect(args) -> int:
    body = _call(args.server, "/inspect", {"container": args.container})
    print(json.dumps(body, indent=2))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_HANDLERS = {
    "synth": _cmd_synth,
    "cluster": _cmd_cluster,
    "fewshot": _cmd_fewshot,
    "fit-dirichlet": _cmd_fit,
    "benchmark": _cmd_benchmark,
    "inspect": _cmd_inspect,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _HANDLERS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
