"""Thin command-line client for the lmcflow service.

Subcommands run | solve | check | legendre | refine each read a local
configuration file and submit it to the service; by default the requests
are dispatched in-process against the FastAPI app (no server needed), and
`--server URL` switches to a remote instance.  `serve` starts the service
under uvicorn.

Exit codes: 0 success, 1 run failure, 2 configuration error.  On failure
the last stdout line is machine-parsable: ``ERROR <module> <code>``.
"""

import argparse
import asyncio
import sys

import httpx

__all__ = ["main"]

_ENDPOINTS = {
    "run": "/run",
    "solve": "/solve",
    "check": "/check",
    "legendre": "/legendre",
    "refine": "/refine",
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="lmcflow",
        description="gradient-map flow solver front end (thin client)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
            ("run", "evolve the flow to its translating solution"),
            ("solve", "stationary Newton oracle on the same system"),
            ("check", "evaluate the admissibility (smallness) conditions"),
            ("legendre", "conjugate a saved field and report duality errors"),
            ("refine", "run the grid refinement study (33/65/129)")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("config", help="path to the INI run configuration")
        p.add_argument("--server", default=None,
                       help="base URL of a running service (default: in-process)")
        if name == "legendre":
            p.add_argument("--field", default=None,
                           help="field CSV to conjugate (default: <output>/field.csv)")
    srv = sub.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    return parser


async def _post(server, endpoint, payload):
    if server:
        async with httpx.AsyncClient(base_url=server, timeout=None) as client:
            return await client.post(endpoint, json=payload)
    from .service import app
    transport = httpx.ASGITransport(app=app)
    async with httpx.AsyncClient(transport=transport, base_url="http://lmcflow",
                                 timeout=None) as client:
        return await client.post(endpoint, json=payload)


def _fail(detail):
    if isinstance(detail, dict) and "module" in detail:
        print(detail.get("message", ""))
        print(f"ERROR {detail['module']} {detail['code']}")
        return 2 if detail["module"] == "config" else 1
    print(detail)
    print("ERROR cli request-failed")
    return 1


def _print_summary(summary):
    for key, value in summary.items():
        print(f"{key}={value}")


def main(argv=None):
    args = _build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn
        from .service import app
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            config_text = fh.read()
    except OSError as exc:
        print(f"cannot read config: {exc}")
        print("ERROR config missing-file")
        return 2

    payload = {"config_text": config_text}
    if args.command == "legendre" and args.field:
        payload["field_path"] = args.field

    try:
        resp = asyncio.run(_post(args.server, _ENDPOINTS[args.command], payload))
    except httpx.HTTPError as exc:
        print(f"request failed: {exc}")
        print("ERROR cli request-failed")
        return 1

    body = resp.json()
    if resp.status_code != 200:
        return _fail(body.get("detail", body))

    if args.command in ("check", "legendre"):
        print(body["text"], end="")
    elif args.command == "refine":
        _print_summary(body["summary"])
    else:
        _print_summary(body["summary"])
    for path in body.get("outputs", []):
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
