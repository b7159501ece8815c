"""``pkgsleuth`` command line: a thin client of the detection service.

By default every subcommand talks to an in-process instance of the FastAPI
app over an ASGI transport; pass ``--server http://host:port`` (or set
``PKGSLEUTH_SERVER``) to target a running deployment instead. Exit codes:
0 success, 1 malicious found (scan), 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys

import httpx
import yaml

EXIT_OK = 0
EXIT_MALICIOUS = 1
EXIT_USAGE = 2
EXIT_DATA = 3


def _parse_overrides(pairs: list[str]) -> dict:
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise SystemExit(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        overrides[key] = yaml.safe_load(value)
    return overrides


def _post(server: str | None, path: str, payload: dict) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.post(path, json=payload)

    from .service.app import app

    async def go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, base_url="http://pkgsleuth", timeout=None) as client:
            return await client.post(path, json=payload)

    return asyncio.run(go())


def _finish(response: httpx.Response, json_output: bool) -> int:
    if response.status_code == 422:
        print(f"usage error: {response.json().get('detail', response.text)}", file=sys.stderr)
        return EXIT_USAGE
    if response.status_code == 409:
        print(f"data error: {response.json().get('detail', response.text)}", file=sys.stderr)
        return EXIT_DATA
    if response.status_code != 200:
        print(f"error: {response.text}", file=sys.stderr)
        return EXIT_DATA
    body = response.json()
    if json_output:
        print(json.dumps(body, indent=2))
    else:
        summary = body.get("summary", body)
        if isinstance(summary, dict) and "table" in summary:
            print(summary["table"])
            extra = {k: v for k, v in summary.items() if k not in ("table", "rows")}
            print(json.dumps(extra, indent=2, default=str))
        else:
            print(json.dumps(summary, indent=2, default=str))
    return int(body.get("exit_code", 0))


def _print_scan(body: dict) -> None:
    for result in body["results"]:
        print(f"{result['package']}: score={result['score']:.4f}")
        for verdict in result["verdicts"]:
            print(f"  fpr<={verdict['target_fpr'] * 100:g}%  threshold={verdict['threshold']:.4f}  -> {verdict['verdict']}")
        groups = ", ".join(result["top_groups"]) or "none"
        print(f"  top feature groups: {groups}")
        print(f"  elapsed: {result['elapsed_ms']:.1f} ms")
    print(f"scanned={len(body['results'])} malicious={body['malicious']} mean_ms={body['mean_elapsed_ms']:.1f}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="pkgsleuth", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--server", default=os.environ.get("PKGSLEUTH_SERVER"),
                        help="base URL of a running service (default: in-process)")
    parser.add_argument("--json", action="store_true", help="print raw JSON responses")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--config", required=(name != "serve"), help="run configuration YAML")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (dotted paths allowed)")
        p.add_argument("--jobs", type=int, default=None, help="package-level parallelism")
        return p

    add("ingest", help="build the dataset manifest (synthetic corpus or local tree)")
    add("extract", help="extract feature vectors for every manifest entry")
    add("train", help="grid-search 5-fold CV training")
    p = add("attack", help="attack validation malicious samples against the models")
    p.add_argument("--variant", default="", help="model variant suffix, e.g. -at20")
    p = add("adv-train", help="adversarial training (top-k% selection)")
    p.add_argument("--k", type=float, default=None, help="override at.k_percent")
    p = add("tune", help="tune decision thresholds at the configured FPRs")
    p.add_argument("--variant", default="")
    p = add("report", help="multi-FPR evaluation table, ROC CSV, FP/day budget")
    p.add_argument("--variant", default="")
    p = add("scan", help="score package(s) and print verdicts per FPR profile")
    p.add_argument("paths", nargs="+", help="package directories or archives")
    p.add_argument("--variant", default="")
    p = add("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8411)

    args = parser.parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service.app import app

        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK

    try:
        overrides = _parse_overrides(args.set)
    except SystemExit as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "jobs", None):
        overrides["jobs"] = args.jobs
    payload = {"config_path": args.config, "overrides": overrides}

    variant = getattr(args, "variant", "")
    if variant and not variant.startswith("-"):
        variant = "-" + variant  # accept both "at20" and "-at20" spellings

    try:
        if args.command == "scan":
            payload = {"config_path": args.config, "package_paths": args.paths,
                       "variant": variant, "overrides": overrides}
            response = _post(args.server, "/v1/scan", payload)
            if response.status_code != 200:
                return _finish(response, args.json)
            body = response.json()
            if args.json:
                print(json.dumps(body, indent=2))
            else:
                _print_scan(body)
            return EXIT_MALICIOUS if body["malicious"] else EXIT_OK
        if args.command == "adv-train":
            payload["k_percent"] = args.k
            return _finish(_post(args.server, "/v1/adv-train", payload), args.json)
        if args.command in ("attack", "tune", "report"):
            payload["variant"] = variant
            return _finish(_post(args.server, f"/v1/{args.command}", payload), args.json)
        return _finish(_post(args.server, f"/v1/{args.command}", payload), args.json)
    except httpx.HTTPError as exc:
        print(f"service unreachable: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
