"""Command-line front end.

Subcommands: ``keygen``, ``generate``, ``detect``, ``simulate``, ``verify``.
Exit codes are a stable contract: 0 success, 1 usage or configuration
error, 2 partial per-record failures, 3 verification failure.

All outputs are machine readable (JSON / JSON lines). Records never contain
the raw key seed; keys are referenced by a fingerprint of the key file.
Under ``--mock`` with fixed seeds every command is byte-for-byte
reproducible, so records carry no timestamp in that mode.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, List, Optional

from pmark import __version__
from pmark.config import RunConfig, load_config
from pmark.endpoint import HttpEndpoint, MockEndpoint
from pmark.errors import InvalidShapeError, PMarkError
from pmark.keys import (
    MasterKey,
    key_fingerprint,
    random_master_key,
    read_key_file,
    write_key_file,
)
from pmark.pipeline import detect_text, generate_watermarked
from pmark.rng import DOMAIN_AUX, derive_stream_key, stream
from pmark.simulate import end_to_end_experiment
from pmark.verify import DEFAULT_VERIFY_SEED, run_verify

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_VERIFY_FAILED = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="pmark", description=__doc__)
    parser.add_argument("--version", action="version", version=f"pmark {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    keygen = sub.add_parser("keygen", help="create a watermark key file")
    keygen.add_argument("--out", required=True, help="key file path")
    keygen.add_argument("--dim", type=int, default=768, help="embedding dimension")
    keygen.add_argument("--channels", type=int, default=4, help="number of channels")
    keygen.add_argument("--seed", type=int, default=None, help="fixed seed (default: OS entropy)")

    generate = sub.add_parser("generate", help="generate watermarked continuations")
    generate.add_argument("--key", required=True)
    generate.add_argument("--mode", choices=("online", "offline"), default="online")
    generate.add_argument("--prompt-file", required=True, help="one prompt per line")
    generate.add_argument("--out", required=True, help="output JSONL path")
    generate.add_argument("--config", default=None, help="run config JSON")
    generate.add_argument("--mock", action="store_true", help="use the in-process mock endpoint")
    generate.add_argument("--jobs", type=int, default=1, help="parallel prompts")
    generate.add_argument("--ordered", action="store_true", help="emit records in input order")

    detect = sub.add_parser("detect", help="detect watermarks in JSONL documents")
    detect.add_argument("--key", required=True)
    detect.add_argument("--mode", choices=("online", "offline"), default="offline")
    detect.add_argument("--in", dest="infile", required=True, help="input JSONL path")
    detect.add_argument("--out", required=True, help="output JSONL path")
    detect.add_argument("--alpha", type=float, default=0.01)
    detect.add_argument("--delta", type=float, default=0.001)
    detect.add_argument("--K", type=float, default=150.0)
    detect.add_argument("--config", default=None)
    detect.add_argument("--mock", action="store_true")
    detect.add_argument("--jobs", type=int, default=1)
    detect.add_argument("--ordered", action="store_true")

    simulate = sub.add_parser("simulate", help="run a synthetic end-to-end experiment")
    simulate.add_argument("--config", required=True)
    simulate.add_argument("--out", required=True, help="metrics JSON path")
    simulate.add_argument("--trial-log", default=None, help="per-trial JSONL (default: <out>.trials.jsonl)")

    verify = sub.add_parser("verify", help="run the statistical verification suite")
    verify.add_argument("--suite", choices=("theory", "all"), default="theory")
    verify.add_argument("--out", default="-", help="report JSON path, or - for stdout")
    verify.add_argument("--seed", type=int, default=DEFAULT_VERIFY_SEED)
    verify.add_argument(
        "--negative-control",
        action="store_true",
        help="inject a non-uniform mass fixture; the zero-gap check must then fail",
    )
    return parser


def _timestamp(deterministic: bool) -> Optional[str]:
    if deterministic:
        return None
    return datetime.now(timezone.utc).isoformat()


def _record(kind: str, fingerprint: str, config: dict, payload: dict, deterministic: bool) -> dict:
    record = {"kind": kind, "key_fingerprint": fingerprint, "config": config, "payload": payload}
    stamp = _timestamp(deterministic)
    if stamp is not None:
        record["timestamp"] = stamp
    return record


def _write_jsonl(path: str, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")


def _endpoint_factory(mock: bool, config: RunConfig, key: MasterKey, stream_tag: int):
    """Per-record endpoints: fresh deterministic mocks, or one shared client.

    Mock endpoints are keyed by (config seed, record index) so records stay
    byte-reproducible under any --jobs value.
    """
    if mock:
        def make(index: int):
            seed = derive_stream_key(config.seed, (DOMAIN_AUX, stream_tag, index))[0]
            return MockEndpoint(seed=seed, dim=key.dim)

        return make
    shared = HttpEndpoint(config.endpoint)
    return lambda index: shared


def _run_jobs(tasks: List, jobs: int, ordered: bool) -> List:
    """Run callables; returns (index, result) pairs in completion or input order."""
    if jobs <= 1:
        return [(i, task()) for i, task in enumerate(tasks)]
    results = []
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {pool.submit(task): i for i, task in enumerate(tasks)}
        from concurrent.futures import as_completed

        for future in as_completed(futures):
            results.append((futures[future], future.result()))
    if ordered:
        results.sort(key=lambda pair: pair[0])
    return results


def _cmd_keygen(args) -> int:
    try:
        if args.seed is not None:
            key = MasterKey(seed=args.seed, dim=args.dim, channels=args.channels)
        else:
            key = random_master_key(args.dim, args.channels)
        write_key_file(args.out, key)
        key.pivots()  # fail fast if the shape is unusable
    except (PMarkError, OSError) as exc:
        print(f"keygen failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"wrote key file {args.out} (dim={key.dim}, channels={key.channels})")
    return EXIT_OK


def _cmd_generate(args) -> int:
    try:
        key = read_key_file(args.key)
        config = load_config(args.config)
        prompts = [
            line.strip()
            for line in Path(args.prompt_file).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    except (PMarkError, OSError) as exc:
        print(f"generate failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.mode == "online" and config.N % (1 << key.channels) != 0:
        print(
            f"generate failed: budget N={config.N} not divisible by 2**{key.channels}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    fingerprint = key_fingerprint(args.key)
    snapshot = {"mode": args.mode, "T": config.T, "N": config.N, "dim": key.dim, "b": key.channels}
    endpoint_for = _endpoint_factory(args.mock, config, key, 0)

    def task_for(index: int, prompt: str):
        def run():
            endpoint = endpoint_for(index)
            rng = stream(config.seed, DOMAIN_AUX, 1, index)
            result = generate_watermarked(
                prompt, key, args.mode, config.T, config.N, endpoint, rng
            )
            return result.to_payload()

        return run

    records, failures = [], 0
    outcomes = _run_jobs(
        [_safe(task_for(i, p)) for i, p in enumerate(prompts)], args.jobs, args.ordered or args.jobs <= 1
    )
    for index, outcome in outcomes:
        payload, error = outcome
        if error is not None:
            failures += 1
            records.append(
                _record(
                    "generation",
                    fingerprint,
                    snapshot,
                    {"index": index, "prompt": prompts[index], "error": error},
                    args.mock,
                )
            )
        else:
            records.append(
                _record("generation", fingerprint, snapshot, {"index": index, **payload}, args.mock)
            )
    try:
        _write_jsonl(args.out, records)
    except OSError as exc:
        print(f"generate failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"generated {len(records) - failures}/{len(prompts)} documents -> {args.out}")
    return EXIT_PARTIAL if failures else EXIT_OK


def _safe(task):
    def run():
        try:
            return task(), None
        except PMarkError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    return run


def _extract_document(line: str) -> dict:
    doc = json.loads(line)
    if not isinstance(doc, dict):
        raise ValueError("record is not a JSON object")
    payload = doc.get("payload", doc)
    text = payload.get("text")
    if not isinstance(text, str) or not text.strip():
        raise ValueError("record has no text field")
    prompt = payload.get("prompt")
    return {"text": text, "prompt": prompt}


def _cmd_detect(args) -> int:
    try:
        key = read_key_file(args.key)
        config = load_config(args.config)
        lines = Path(args.infile).read_text(encoding="utf-8").splitlines()
    except (PMarkError, OSError) as exc:
        print(f"detect failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    fingerprint = key_fingerprint(args.key)
    snapshot = {
        "mode": args.mode,
        "alpha": args.alpha,
        "delta": args.delta,
        "K": args.K,
        "N": config.N,
    }
    records, failures, verdicts = [], 0, 0
    documents = []
    for line_number, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            documents.append((line_number, _extract_document(line)))
        except (json.JSONDecodeError, ValueError) as exc:
            failures += 1
            records.append(
                _record(
                    "detection",
                    fingerprint,
                    snapshot,
                    {"line": line_number, "error": f"malformed record: {exc}"},
                    args.mock,
                )
            )

    endpoint_for = _endpoint_factory(args.mock, config, key, 2)

    def task_for(index: int, doc: dict):
        def run():
            endpoint = endpoint_for(index)
            report = detect_text(
                doc["text"],
                key,
                args.mode,
                endpoint,
                prompt=doc.get("prompt"),
                N=config.N,
                delta=args.delta,
                K=args.K,
                alpha=args.alpha,
            )
            return report.to_dict()

        return run

    outcomes = _run_jobs(
        [_safe(task_for(i, doc)) for i, (_, doc) in enumerate(documents)],
        args.jobs,
        args.ordered or args.jobs <= 1,
    )
    for position, outcome in outcomes:
        line_number, _ = documents[position]
        report, error = outcome
        if error is not None:
            failures += 1
            records.append(
                _record("detection", fingerprint, snapshot, {"line": line_number, "error": error}, args.mock)
            )
        else:
            verdicts += bool(report["verdict"])
            records.append(
                _record(
                    "detection", fingerprint, snapshot, {"line": line_number, "report": report}, args.mock
                )
            )
    try:
        _write_jsonl(args.out, records)
    except OSError as exc:
        print(f"detect failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    scored = len(documents)
    print(
        f"detected: {verdicts}/{scored} watermarked verdicts, {failures} failures -> {args.out}"
    )
    return EXIT_PARTIAL if failures else EXIT_OK


def _cmd_simulate(args) -> int:
    try:
        config = load_config(args.config)
        result = end_to_end_experiment(config)
    except PMarkError as exc:
        print(f"simulate failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    trial_log = args.trial_log or (args.out + ".trials.jsonl")
    try:
        Path(args.out).write_text(json.dumps(result.to_dict(), indent=2) + "\n", encoding="utf-8")
        _write_jsonl(trial_log, result.trial_records)
    except OSError as exc:
        print(f"simulate failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for label, report in result.reports.items():
        tprs = ", ".join(f"TPR@{level:g}={value:.3f}" for level, value in report.tpr_at_fpr.items())
        print(f"{label}: AUC={report.auc:.4f} {tprs} FPR@nominal={report.fpr_at_nominal:.4f}")
    print(f"metrics -> {args.out}; trials -> {trial_log}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    report = run_verify(suite=args.suite, seed=args.seed, negative_control=args.negative_control)
    doc = json.dumps(report.to_dict(), indent=2)
    if args.out == "-":
        print(doc)
    else:
        try:
            Path(args.out).write_text(doc + "\n", encoding="utf-8")
        except OSError as exc:
            print(f"verify failed: {exc}", file=sys.stderr)
            return EXIT_USAGE
        for check in report.checks:
            status = "PASS" if check.passed else "FAIL"
            print(f"{status} {check.name}: measured={check.measured:.3e}")
    return EXIT_OK if report.all_passed else EXIT_VERIFY_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "keygen": _cmd_keygen,
        "generate": _cmd_generate,
        "detect": _cmd_detect,
        "simulate": _cmd_simulate,
        "verify": _cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except InvalidShapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
