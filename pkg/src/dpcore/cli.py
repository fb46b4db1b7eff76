"""`dpcore` command line interface.

Subcommands: ingest, session, query, budget, audit, serve.  State (datasets,
sessions, the charge ledger) persists under the config's state_dir so
budgets survive across invocations.  There are, deliberately, no
seed-related flags or environment variables anywhere in this interface.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import socketserver
import subprocess
import sys

import numpy as np

from .accounting import Accountant
from .audit import (
    BUILTIN_TARGETS,
    MechanismUnderTest,
    black_box_battery,
    default_neighbor_suite,
)
from .errors import BudgetExceededError, ContractViolation
from .randomness import RandomSource
from .registry import DatasetRegistry
from .relational import ColumnKind, ColumnMeta, Schema
from .service import QueryRequest, QueryService, ServiceConfig, build_accountant


class CliState:
    """Service wiring plus on-disk persistence for CLI invocations."""

    def __init__(self, config_path: str) -> None:
        self.config = ServiceConfig.from_file(config_path)
        if not self.config.state_dir:
            raise ContractViolation("config must set state_dir for CLI use")
        self.state_dir = self.config.state_dir
        os.makedirs(os.path.join(self.state_dir, "datasets"), exist_ok=True)
        self.accountant = build_accountant(self.config)
        self.registry = DatasetRegistry()
        self._load_datasets()
        self.service = QueryService(self.registry, self.accountant, self.config)
        self._load_sessions()

    # -- persistence -------------------------------------------------------

    def _dataset_dir(self, handle: str) -> str:
        return os.path.join(self.state_dir, "datasets", handle)

    def _load_datasets(self) -> None:
        root = os.path.join(self.state_dir, "datasets")
        for handle in sorted(os.listdir(root)):
            d = self._dataset_dir(handle)
            self.registry.register_as(
                handle,
                os.path.join(d, "data.csv"),
                os.path.join(d, "schema.txt"),
            )

    def _sessions_path(self) -> str:
        return os.path.join(self.state_dir, "sessions.json")

    def _load_sessions(self) -> None:
        try:
            with open(self._sessions_path(), "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            return
        self.service.restore_sessions(raw)

    def save_sessions(self) -> None:
        with open(self._sessions_path(), "w", encoding="utf-8") as fh:
            json.dump(self.service.dump_sessions(), fh)

    def persist_dataset(self, handle: str, csv_path: str, sidecar_path: str) -> None:
        d = self._dataset_dir(handle)
        os.makedirs(d, exist_ok=True)
        shutil.copyfile(csv_path, os.path.join(d, "data.csv"))
        shutil.copyfile(sidecar_path, os.path.join(d, "schema.txt"))


def _cmd_ingest(args) -> int:
    state = CliState(args.config)
    handle = state.registry.ingest_files(args.csv, args.schema)
    state.persist_dataset(handle, args.csv, args.schema)
    # Nothing data-derived is printed: no row count, no ranges.
    print(handle)
    return 0


def _cmd_session(args) -> int:
    state = CliState(args.config)
    session = state.service.open_session(args.dataset, args.scope)
    state.save_sessions()
    print(session.session_id)
    return 0


def _cmd_query(args) -> int:
    state = CliState(args.config)
    session = state.service.session(args.session)
    with open(args.plan, "r", encoding="utf-8") as fh:
        plan_text = fh.read()
    response = state.service.run_query(
        session, QueryRequest(plan_text, args.mechanism, args.eps)
    )
    sys.stdout.buffer.write(response.to_bytes() + b"\n")
    return 0 if response.status == "ok" else 1


def _cmd_budget(args) -> int:
    state = CliState(args.config)
    session = state.service.session(args.session)
    status = state.service.budget_status(session)
    print(
        f"spent={status.spent!r} remaining={status.remaining!r} "
        f"alpha={status.alpha!r} power_bound={status.power_bound!r}"
    )
    return 0


def _external_target(command: str) -> MechanismUnderTest:
    """Wrap an external command as a mechanism under test.

    The command is invoked as: CMD <csv-path> <eps> <n> and must print n
    outcomes, one per line, on stdout.
    """
    import csv as csv_mod
    import tempfile

    def run_many(table, eps, rng, n):
        with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as fh:
            writer = csv_mod.writer(fh)
            writer.writerow(table.schema.names)
            writer.writerows(table.rows)
            path = fh.name
        try:
            out = subprocess.run(
                [*command.split(), path, str(eps), str(n)],
                capture_output=True, text=True, check=True,
            ).stdout
        finally:
            os.unlink(path)
        return np.array([float(line) for line in out.split()])

    def run(table, eps, rng):
        return float(run_many(table, eps, rng, 1)[0])

    return MechanismUnderTest(f"external:{command}", run, run_many)


def _audit_schema() -> Schema:
    return Schema((
        ColumnMeta("c0", ColumnKind.INTEGER, lower=0, upper=100),
        ColumnMeta("c1", ColumnKind.INTEGER, lower=0, upper=1),
    ))


def _cmd_audit(args) -> int:
    if args.target in BUILTIN_TARGETS:
        target = BUILTIN_TARGETS[args.target]()
    elif args.external:
        target = _external_target(args.target)
    else:
        print(f"unknown builtin target {args.target!r}", file=sys.stderr)
        return 1
    suite = default_neighbor_suite(_audit_schema())
    eps_values = [float(x) for x in args.eps_grid.split(",")]
    report = black_box_battery(
        target, suite, eps_values, RandomSource.from_os_entropy(),
        n_search=args.n_search, n_test=args.n_test, repetitions=args.reps,
    )
    text = report.to_text()
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return report.exit_code


class _ServeHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        for raw in self.rfile:
            line = raw.decode("utf-8").strip()
            if not line:
                continue
            try:
                req = json.loads(line)
                out = self.server.dispatch(req)  # type: ignore[attr-defined]
            except Exception:
                out = {"status": "error", "code": "request rejected"}
            self.wfile.write(json.dumps(out, sort_keys=True).encode("utf-8") + b"\n")


class _Server(socketserver.ThreadingUnixStreamServer):
    allow_reuse_address = True

    def __init__(self, path: str, state: CliState):
        super().__init__(path, _ServeHandler)
        self.state = state

    def dispatch(self, req: dict) -> dict:
        cmd = req.get("cmd")
        service = self.state.service
        if cmd == "session":
            session = service.open_session(req["dataset"], req["scope"])
            self.state.save_sessions()
            return {"status": "ok", "session": session.session_id}
        if cmd == "query":
            session = service.session(req["session"])
            response = service.run_query(
                session, QueryRequest(req["plan"], req["mechanism"], float(req["eps"]))
            )
            return json.loads(response.to_bytes())
        if cmd == "budget":
            status = service.budget_status(service.session(req["session"]))
            return {
                "status": "ok", "spent": status.spent,
                "remaining": status.remaining, "power_bound": status.power_bound,
            }
        return {"status": "error", "code": "request rejected"}


def _cmd_serve(args) -> int:
    state = CliState(args.config)
    if os.path.exists(args.socket):
        os.unlink(args.socket)
    with _Server(args.socket, state) as server:
        server.serve_forever()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpcore")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="register a CSV dataset with its schema sidecar")
    p.add_argument("--csv", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("session", help="open a query session against a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--scope", required=True)
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_session)

    p = sub.add_parser("query", help="run a plan through a mechanism")
    p.add_argument("--session", required=True)
    p.add_argument("--plan", required=True, help="plan file, one step per line")
    p.add_argument("--mechanism", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("budget", help="report spent/remaining budget")
    p.add_argument("--session", required=True)
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_budget)

    p = sub.add_parser("audit", help="black-box DP audit of a mechanism")
    p.add_argument("--target", required=True,
                   help="builtin mechanism name or external command (with --external)")
    p.add_argument("--external", action="store_true")
    p.add_argument("--eps-grid", default="0.5,1.0,2.0")
    p.add_argument("--n-search", type=int, default=50_000)
    p.add_argument("--n-test", type=int, default=100_000)
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--report")
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("serve", help="line-delimited JSON protocol over a unix socket")
    p.add_argument("--config", required=True)
    p.add_argument("--socket", required=True)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except ContractViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
