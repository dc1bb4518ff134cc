"""Command-line entry point: evaluation runner, server, and a thin HTTP client."""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from moose.explore import load_corpus
from moose.gateway import Gateway, HttpBackend, ScriptedBackend
from moose.harness.dataset import load_dataset
from moose.harness.pipelines import TABLE_ROWS, pipeline_by_name
from moose.harness.runner import RunConfigs, run_pipeline, aggregate
from moose.harness.scripts import load_script, save_script, synthesize_script
from moose.protocol import LogicalClock, export_session
from moose.service.app import DEFAULT_LISTEN_ADDR, ENV_LISTEN_ADDR, create_app

DEFAULT_SERVER = "http://127.0.0.1:8040"


def _add_server_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--server", default=os.environ.get("MOOSE_SERVER",
                                                           DEFAULT_SERVER),
                        help="base URL of a running service")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moose")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--addr", default=os.environ.get(ENV_LISTEN_ADDR,
                                                        DEFAULT_LISTEN_ADDR))
    serve.add_argument("--data-dir", default=None)
    serve.add_argument("--ui-dir", default=None)

    evaluate = sub.add_parser("eval", help="run the oracle-simulated evaluation")
    evaluate.add_argument("--dataset", required=True)
    evaluate.add_argument("--corpus", required=True)
    evaluate.add_argument("--pipeline", default="all",
                          help="pipeline name or 'all'")
    evaluate.add_argument("--backend", default="scripted:auto",
                          help="live | scripted:<path> | scripted:auto")
    evaluate.add_argument("--out", required=True)
    evaluate.add_argument("--workers", type=int, default=1)
    evaluate.add_argument("--seed", type=int, default=0,
                          help="reserved for stochastic modes; recorded in outputs")

    upload = sub.add_parser("upload-corpus", help="upload a corpus file")
    upload.add_argument("file")
    _add_server_argument(upload)

    create = sub.add_parser("create-session", help="open a session")
    create.add_argument("--question", required=True)
    create.add_argument("--survey", default=None)
    create.add_argument("--blueprint", default=None)
    create.add_argument("--corpus-id", required=True)
    create.add_argument("--script", default=None,
                        help="script file for a scripted-backend session")
    _add_server_argument(create)

    act = sub.add_parser("act", help="feedback and/or next-stage choice on a node")
    act.add_argument("session_id")
    act.add_argument("--node", required=True)
    act.add_argument("--feedback", default=None)
    act.add_argument("--next", required=True, choices=["explore", "refine"])
    _add_server_argument(act)

    for name, help_text in (("tree", "print the session tree"),
                            ("export", "print the full session export")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("session_id")
        _add_server_argument(cmd)

    ranking = sub.add_parser("ranking", help="ranked hypotheses with scores")
    ranking.add_argument("session_id")
    ranking.add_argument("--scope", default="leaves", choices=["leaves", "all"])
    _add_server_argument(ranking)

    watch = sub.add_parser("watch", help="follow a session's progress events")
    watch.add_argument("session_id")
    watch.add_argument("--after", type=int, default=-1)
    _add_server_argument(watch)

    sessions = sub.add_parser("sessions", help="list sessions")
    _add_server_argument(sessions)

    return parser


# --- eval ----------------------------------------------------------------------


def _gateway_factory(backend_spec: str, configs: RunConfigs):
    """Returns fn(spec, entry, corpus) -> (gateway, script or None)."""
    if backend_spec == "live":
        def live(spec, entry, corpus):
            return Gateway(HttpBackend()), None
        return live
    if backend_spec == "scripted:auto":
        def auto(spec, entry, corpus):
            script = synthesize_script(spec, entry, corpus, configs)
            return Gateway(ScriptedBackend(script), retry_base_delay=0.0), script
        return auto
    if backend_spec.startswith("scripted:"):
        path = backend_spec.split(":", 1)[1]
        script = load_script(path)

        def fixed(spec, entry, corpus):
            return Gateway(ScriptedBackend(list(script)), retry_base_delay=0.0), None
        return fixed
    raise SystemExit(f"unknown backend {backend_spec!r} "
                     "(expected live | scripted:<path> | scripted:auto)")


def run_eval(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    corpus = load_corpus(args.corpus)
    if args.pipeline == "all":
        specs = list(TABLE_ROWS)
    else:
        specs = [pipeline_by_name(args.pipeline)]
    configs = RunConfigs()
    make_gateway = _gateway_factory(args.backend, configs)

    out = Path(args.out)
    (out / "sessions").mkdir(parents=True, exist_ok=True)
    (out / "runlogs").mkdir(parents=True, exist_ok=True)
    scripts_dir = out / "scripts"
    if args.backend == "scripted:auto":
        scripts_dir.mkdir(parents=True, exist_ok=True)

    tasks = [(spec, entry) for spec in specs for entry in dataset]

    def execute(task):
        spec, entry = task
        gateway, script = make_gateway(spec, entry, corpus)
        sessions: list = []
        run_log: list[dict] = []
        report = run_pipeline(spec, entry, corpus, configs, gateway,
                              clock=LogicalClock(), session_sink=sessions.append,
                              log_sink=run_log)
        session = sessions[0] if sessions else None
        return report, session, run_log, script

    results = []
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(execute, tasks))
    else:
        results = [execute(task) for task in tasks]

    reports = []
    for report, session, run_log, script in results:
        reports.append(report)
        if session is not None:
            session_path = out / "sessions" / f"{session.session_id}.json"
            session_path.write_text(export_session(session), encoding="utf-8")
            if run_log:
                log_path = out / "runlogs" / f"{session.session_id}.jsonl"
                log_path.write_text(
                    "\n".join(json.dumps(rec, ensure_ascii=False) for rec in run_log)
                    + "\n", encoding="utf-8")
            if script is not None:
                save_script(script, scripts_dir / f"{session.session_id}.jsonl")

    (out / "reports.jsonl").write_text(
        "\n".join(json.dumps(r.to_dict(), ensure_ascii=False) for r in reports) + "\n",
        encoding="utf-8")
    table = aggregate(reports)
    (out / "aggregate.json").write_text(
        json.dumps({"seed": args.seed, **table.to_dict()}, ensure_ascii=False,
                   indent=2) + "\n", encoding="utf-8")
    (out / "aggregate.txt").write_text(table.render_text(), encoding="utf-8")
    print(table.render_text(), end="")

    incomplete = [r for r in reports if r.incomplete]
    if incomplete:
        print(f"{len(incomplete)} run(s) incomplete", file=sys.stderr)
        return 1
    return 0


# --- thin client -----------------------------------------------------------------


def _client(server: str):
    import httpx

    return httpx.Client(base_url=server, timeout=60.0)


def _print_json(data) -> None:
    print(json.dumps(data, indent=2, ensure_ascii=False))


def run_client_command(args: argparse.Namespace) -> int:
    with _client(args.server) as client:
        if args.command == "upload-corpus":
            body = Path(args.file).read_bytes()
            response = client.post("/corpora", content=body)
        elif args.command == "create-session":
            payload = {"question": args.question, "survey": args.survey,
                       "blueprint": args.blueprint, "corpus_id": args.corpus_id}
            if args.script:
                entries = [{"match": e.matcher, "text": e.text}
                           for e in load_script(args.script)]
                payload["llm_config"] = {"mode": "scripted", "script": entries}
            response = client.post("/sessions", json=payload)
        elif args.command == "act":
            payload = {"node": args.node, "next": args.next}
            if args.feedback:
                payload["feedback"] = args.feedback
            response = client.post(f"/sessions/{args.session_id}/act", json=payload)
        elif args.command == "tree":
            response = client.get(f"/sessions/{args.session_id}/tree")
        elif args.command == "export":
            response = client.get(f"/sessions/{args.session_id}/export")
        elif args.command == "ranking":
            response = client.get(f"/sessions/{args.session_id}/ranking",
                                  params={"scope": args.scope})
        elif args.command == "sessions":
            response = client.get("/sessions")
        elif args.command == "watch":
            with client.stream(
                "GET", f"/sessions/{args.session_id}/events",
                params={"after": args.after, "follow": "true"},
            ) as stream:
                for line in stream.iter_lines():
                    if line:
                        print(line)
            return 0
        else:
            raise SystemExit(f"unknown command {args.command}")
        if response.status_code >= 400:
            print(f"HTTP {response.status_code}: {response.text}", file=sys.stderr)
            return 1
        try:
            _print_json(response.json())
        except json.JSONDecodeError:
            print(response.text)
        return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        host, _, port = args.addr.rpartition(":")
        app = create_app(args.data_dir, ui_dir=args.ui_dir)
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
        return 0
    if args.command == "eval":
        return run_eval(args)
    return run_client_command(args)


if __name__ == "__main__":
    sys.exit(main())
