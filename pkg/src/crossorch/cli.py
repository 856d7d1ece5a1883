"""Command-line entry point: ``crossorch run`` and ``crossorch replay``."""

from __future__ import annotations

import argparse
import logging
import sys
import threading
from pathlib import Path

from .errors import ConfigError, ParseError
from .orchestrator import (
    DEMO_REQUEST,
    EXIT_CONFIG,
    Orchestrator,
    RunConfig,
    RunResult,
    data_path,
)
from .runtime import Message, Transcript, load_transcript, transcript_to_jsonl


def _indent(text: str, prefix: str) -> str:
    lines = text.splitlines() or [""]
    return "\n".join([lines[0]] + [prefix + line for line in lines[1:]])


def render_message(m: Message) -> str:
    head = f"[{m.group_id} #{m.chat} t{m.turn_index:02d}] {m.sender.value}"
    if m.origin:
        head += f" (via {m.origin})"
    return f"{head}: {_indent(m.content, '    ')}"


def render_transcript(messages: Transcript) -> str:
    return "\n".join(render_message(m) for m in messages) + "\n"


def replay(transcript_path: str | Path) -> str:
    """Human-readable rendering of a JSONL transcript file."""
    try:
        text = Path(transcript_path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {transcript_path}: {exc}") from None
    return render_transcript(load_transcript(text))


def run(config: RunConfig, stream=None) -> tuple[int, RunResult | None]:
    """Run a request end to end; returns (exit status, result)."""
    lock = threading.Lock()

    def on_message(m: Message):
        if stream is not None:
            with lock:
                print(render_message(m), file=stream, flush=True)

    try:
        orch = Orchestrator.from_config(config, on_message=on_message)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG, None
    result = orch.run(config.request)
    if config.transcript_out is not None:
        Path(config.transcript_out).write_text(transcript_to_jsonl(result.messages), encoding="utf-8")
    if stream is not None:
        for t in result.transcripts:
            last = t[-1]
            status = last.error_kind or "ok"
            print(f"== {last.group_id} #{last.chat} finished ({status}): {last.content.splitlines()[0]}",
                  file=stream)
        for r in result.reports:
            print(f"== report {r.from_group} -> {r.to_group} #{r.seq}: {r.content}", file=stream)
        for problem in result.crashes + [f"{e}: {why}" for e, why in result.failed_switches]:
            print(f"== problem: {problem}", file=stream)
    return result.exit_code, result


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crossorch", description="Cross-domain multi-agent orchestration demo.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a request through both chat groups")
    r.add_argument("--topology", type=Path, default=data_path("demo_topology.json"))
    r.add_argument("--panel", type=Path, default=data_path("demo_panel.json"))
    r.add_argument("--mapping", type=Path, default=data_path("demo_mapping.json"))
    backend = r.add_mutually_exclusive_group()
    backend.add_argument("--script", type=Path, help="scripted backend file (default: shipped demo script)")
    backend.add_argument("--llm-endpoint", help="chat-completions URL; token read from LLM_API_KEY")
    r.add_argument("--model", help="model name for --llm-endpoint")
    r.add_argument("--request", default=DEMO_REQUEST)
    r.add_argument("--out", type=Path, help="write the JSONL transcript here")
    r.add_argument("--max-turns", type=int, default=40)
    r.add_argument("--retry-budget", type=int, default=2)
    r.add_argument("-q", "--quiet", action="store_true", help="do not stream messages")

    rp = sub.add_parser("replay", help="render a JSONL transcript")
    rp.add_argument("transcript", type=Path)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "replay":
        try:
            sys.stdout.write(replay(args.transcript))
        except ParseError as exc:
            print(f"ParseError: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return 0
    if args.llm_endpoint and not args.model:
        print("ConfigError: --llm-endpoint needs --model", file=sys.stderr)
        return EXIT_CONFIG
    config = RunConfig(
        topology_path=args.topology, panel_path=args.panel, mapping_path=args.mapping,
        script_path=args.script, llm_endpoint=args.llm_endpoint, model=args.model,
        request=args.request, transcript_out=args.out, max_turns=args.max_turns,
        retry_budget=args.retry_budget)
    code, _ = run(config, stream=None if args.quiet else sys.stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
