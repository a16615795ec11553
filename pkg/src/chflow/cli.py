"""Command-line client of the solver service.

Subcommands: simulate, steady, uniqueness, lab, check.  By default requests
are served in-process (the FastAPI app mounted on an ASGI transport, no
socket involved); ``--server URL`` targets a running instance instead, in
which case file outputs land on the server side.

Exit codes: 0 success, 1 validation failure (bad config, unknown keys,
constraint violations), 2 numerical failure (Newton stall, non-convergence,
failed acceptance criteria).
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

from . import __version__

_EXIT_OK = 0
_EXIT_VALIDATION = 1
_EXIT_NUMERICAL = 2


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # in-process transport: the service app mounted behind a sync test portal,
    # so the CLI works standalone with the exact request/response contract
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient
    from .service.app import app  # deferred: keeps --help fast
    return TestClient(app)


def _read_config(path: str, overrides: list[str]) -> str | None:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config {path!r}: {exc}", file=sys.stderr)
        return None
    if not overrides:
        return text
    keys = set()
    for kv in overrides:
        if "=" not in kv:
            print(f"error: --set expects key=value, got {kv!r}", file=sys.stderr)
            return None
        keys.add(kv.split("=", 1)[0].strip())
    # overrides replace the file's entries rather than duplicating them
    lines = []
    for line in text.splitlines():
        body = line.split("#", 1)[0]
        if "=" in body and body.split("=", 1)[0].strip() in keys:
            continue
        lines.append(line)
    lines += [kv.replace("=", " = ", 1) for kv in overrides]
    return "\n".join(lines) + "\n"


def _post(client: httpx.Client, path: str, payload: dict):
    try:
        resp = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        print(f"error: request failed: {exc}", file=sys.stderr)
        return None, _EXIT_NUMERICAL
    if resp.status_code == 200:
        return resp.json(), _EXIT_OK
    try:
        detail = resp.json().get("detail", {})
    except ValueError:
        detail = {}
    kind = detail.get("kind") if isinstance(detail, dict) else None
    if resp.status_code in (400, 422) or kind == "validation":
        for v in (detail.get("violations", [detail]) if isinstance(detail, dict)
                  else [detail]):
            print(f"config error: {v}", file=sys.stderr)
        return None, _EXIT_VALIDATION
    msg = detail.get("message", resp.text) if isinstance(detail, dict) else resp.text
    print(f"numerical failure: {msg}", file=sys.stderr)
    return None, _EXIT_NUMERICAL


def _dump(data: dict, as_json: bool, human) -> None:
    if as_json:
        print(json.dumps(data, sort_keys=True, indent=2))
    else:
        human(data)


def cmd_simulate(args, client) -> int:
    text = _read_config(args.config, args.set)
    if text is None:
        return _EXIT_VALIDATION
    payload = {"config": text, "include_ledger": args.include_ledger,
               "workdir": args.workdir}
    data, code = _post(client, "/simulate", payload)
    if data is None:
        return code

    def human(d):
        s = d["summary"]
        print(f"steps: {s['steps']}   t_end: {s['t_end']:.6g}")
        print(f"mass: {s['mass_initial']:.12g}   max drift: {s['mass_drift_max']:.3e}")
        print(f"energy: {s['energy_initial']:.9g} -> {s['energy_final']:.9g}   "
              f"max rise: {s['max_energy_rise']:.3e}")
        print(f"balance defect: {s['balance_defect']:.3e}   "
              f"separation: {s['separation_final']:.4f}   "
              f"||grad mu||: {s['grad_mu_final']:.3e}")
        for path in s["outputs"]:
            print(f"wrote {path}")

    _dump(data, args.json, human)
    return _EXIT_OK


def cmd_steady(args, client) -> int:
    text = _read_config(args.config, args.set)
    if text is None:
        return _EXIT_VALIDATION
    payload = {"config": text, "tol_residual": args.tol_residual,
               "tol_gradmu": args.tol_gradmu, "max_time": args.max_time,
               "method": args.method, "save_state": args.save,
               "workdir": args.workdir}
    data, code = _post(client, "/steady", payload)
    if data is None:
        return code

    def human(d):
        status = "converged" if d["converged"] else "NOT converged"
        print(f"{status} at t = {d['t_reached']:.6g}")
        print(f"stationarity residual: {d['residual']:.3e}   "
              f"||grad mu||: {d['grad_mu_norm']:.3e}")
        print(f"energy: {d['energy']:.9g}   mean: {d['mean']:.12g}")
        for path in d["outputs"]:
            print(f"wrote {path}")

    _dump(data, args.json, human)
    return _EXIT_OK if data["converged"] else _EXIT_NUMERICAL


def cmd_uniqueness(args, client) -> int:
    text = _read_config(args.config, args.set)
    if text is None:
        return _EXIT_VALIDATION
    payload = {"config": text, "eps": args.eps,
               "perturbation_seed": args.perturbation_seed,
               "perturbation_band_limit": args.band_limit, "T": args.T}
    data, code = _post(client, "/uniqueness", payload)
    if data is None:
        return code

    def human(d):
        print(f"d(0) = {d['d0']:.6e}   d(T) = {d['d_final']:.6e}   "
              f"d(T)/d(0) = {d['ratio']:.6f}")
        print(f"C_emp = {d['c_emp']:.6f}   symmetric-weight C_emp = "
              f"{d['c_emp_symmetric']:.6f}")
        print(f"norm-sandwich worst slack: {d['sandwich_slack']:.3e}")
        for t, dv, hv in zip(d["times"], d["d"], d["hm1"]):
            print(f"  t = {t:<10.6g} d = {dv:.6e}  hm1 = {hv:.6e}")

    _dump(data, args.json, human)
    return _EXIT_OK


def cmd_lab(args, client) -> int:
    payload = {"suite": args.suite, "seed": args.seed, "samples": args.samples}
    data, code = _post(client, "/lab", payload)
    if data is None:
        return code
    # canonical serialization so repeated runs are byte-comparable
    print(json.dumps(data, sort_keys=True, indent=2))
    return _EXIT_OK


def cmd_check(args, client) -> int:
    only = None
    if args.only:
        try:
            only = [int(tok) for tok in args.only.replace(",", " ").split()]
        except ValueError:
            print(f"error: --only expects integers, got {args.only!r}", file=sys.stderr)
            return _EXIT_VALIDATION
    payload = {"only": only, "out_dir": args.out}
    data, code = _post(client, "/check", payload)
    if data is None:
        return code
    if args.json:
        print(json.dumps(data, sort_keys=True, indent=2))
    else:
        print(data["table"])
    return _EXIT_OK if data["all_passed"] else _EXIT_NUMERICAL


def _add_config_args(sp) -> None:
    sp.add_argument("--config", required=True, help="path to a key=value config file")
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config entry (repeatable)")
    sp.add_argument("--workdir", default=None,
                    help="base directory for relative output paths")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="chflow",
        description="phase-field solver and verification harness (service client)")
    ap.add_argument("--server", default=None,
                    help="URL of a running service (default: in-process)")
    ap.add_argument("--json", action="store_true", help="machine-readable output")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run a time evolution")
    _add_config_args(sp)
    sp.add_argument("--include-ledger", action="store_true",
                    help="return the full ledger in the response")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("steady", help="solve the stationary problem")
    _add_config_args(sp)
    sp.add_argument("--tol-residual", type=float, default=1e-9)
    sp.add_argument("--tol-gradmu", type=float, default=1e-8)
    sp.add_argument("--max-time", type=float, default=500.0)
    sp.add_argument("--method", default="long_time_integration",
                    choices=["long_time_integration", "damped_newton"])
    sp.add_argument("--save", default=None, help="write the end state here")
    sp.set_defaults(fn=cmd_steady)

    sp = sub.add_parser("uniqueness", help="two-trajectory continuous dependence")
    _add_config_args(sp)
    sp.add_argument("--eps", type=float, default=1e-4,
                    help="perturbation amplitude")
    sp.add_argument("--perturbation-seed", type=int, default=77)
    sp.add_argument("--band-limit", type=int, default=4)
    sp.add_argument("--T", type=float, default=None, help="override run.T")
    sp.set_defaults(fn=cmd_uniqueness)

    sp = sub.add_parser("lab", help="inequality and ODE-bound suites")
    sp.add_argument("--suite", default="all",
                    choices=["gronwall", "uniform", "blowup", "gn", "elliptic", "all"])
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--samples", type=int, default=50)
    sp.set_defaults(fn=cmd_lab)

    sp = sub.add_parser("check", help="run the acceptance suite")
    sp.add_argument("--only", default=None,
                    help="comma-separated criterion ids (default: all)")
    sp.add_argument("--out", default=None, help="directory for produced ledgers")
    sp.set_defaults(fn=cmd_check)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    with _client(args.server) as client:
        return args.fn(args, client)


if __name__ == "__main__":
    sys.exit(main())
