"""Command line front end.

Verbs: ``clean`` (strip junk), ``prune`` (single-stage budget prune),
``pipeline`` (full two-stage refinement), ``fetch`` (download pages),
``stats`` (aggregate results, or dump one page's block tree). Exit
codes: 0 on success, 1 when processing fails (network, budget, every
record erroring), 2 on bad usage.
"""

from __future__ import annotations

import json
import os
import sys

import click

from .blocks import InvalidGranularity
from .cleaning import clean
from .dom import EmptyDocument, EmptyDocumentSet, parse_html, serialize
from .pipeline import (RefineConfig, RefinePipeline, describe_blocks,
                       fetch_html, fetch_urls, report_stats)
from .pruning import BudgetUnattainable, Budget
from .scoring import ScorerUnavailable
from .tokentree import IncompleteProbabilities, ProviderError

_RUNTIME_ERRORS = (EmptyDocument, EmptyDocumentSet, BudgetUnattainable,
                   ScorerUnavailable, ProviderError, IncompleteProbabilities,
                   OSError)


def _load_base_config(path: str | None) -> dict:
    """Read a config file as a plain dict; flags are merged in later so
    cross-field invariants are checked once, on the final values."""
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
    except (ValueError, OSError) as exc:
        raise click.UsageError(f"bad config {path}: {exc}")
    return data


def _override(base: dict, **changes) -> RefineConfig:
    data = RefineConfig().to_dict()
    data.update(base)
    data.update({k: v for k, v in changes.items() if v is not None})
    try:
        return RefineConfig.from_dict(data)
    except (ValueError, InvalidGranularity) as exc:
        raise click.UsageError(str(exc))


def _endpoint_overrides(embed_endpoint: str | None,
                        logits_endpoint: str | None) -> dict:
    """Resolve service endpoints: flag beats environment beats config.

    An embed endpoint given on the command line also selects the remote
    stage-1 scorer; the environment only supplies URL values.
    """
    changes: dict = {}
    if embed_endpoint:
        changes["embed_endpoint"] = embed_endpoint
        changes["stage1"] = "embedding"
    elif os.environ.get("HTMLPRUNE_EMBED_ENDPOINT"):
        changes["embed_endpoint"] = os.environ["HTMLPRUNE_EMBED_ENDPOINT"]
    logits = logits_endpoint or os.environ.get("HTMLPRUNE_LOGITS_ENDPOINT")
    if logits:
        changes["logits_endpoint"] = logits
    return changes


def _write_audit(path: str | None, entries) -> None:
    if path is None:
        return
    with open(path, "w", encoding="utf-8") as f:
        for entry in entries:
            f.write(json.dumps({"path": entry.path, "score": entry.score,
                                "length_after": entry.length_after}) + "\n")


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


@click.group()
def main() -> None:
    """Refine retrieved HTML pages down to their relevant content."""


@main.command("clean")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--input", "input_file", type=click.File("rb"), default="-")
@click.option("--output", type=click.File("w"), default="-")
def clean_cmd(config_path, input_file, output) -> None:
    """Drop scripts, styles, comments, and attributes; compress structure."""
    config = _override(_load_base_config(config_path))
    try:
        tree = clean(parse_html(input_file.read()), config.clean_config())
    except _RUNTIME_ERRORS as exc:
        _fail(exc)
    output.write(serialize(tree))


@main.command("prune")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--input", "input_file", type=click.File("rb"), default="-")
@click.option("--output", type=click.File("w"), default="-")
@click.option("--query", default="")
@click.option("--budget", type=int, default=None, help="Final length limit.")
@click.option("--granularity", type=int, default=None,
              help="Max words per block.")
@click.option("--audit-log", "audit_log", type=click.Path(), default=None)
@click.option("--embed-endpoint", default=None,
              help="Embedding scorer service URL; default is local BM25.")
def prune_cmd(config_path, input_file, output, query, budget, granularity,
              audit_log, embed_endpoint) -> None:
    """Single-stage prune with the embedding-style scorer."""
    config = _override(_load_base_config(config_path), stage2="off",
                       final_budget=budget, coarse_words=granularity,
                       **_endpoint_overrides(embed_endpoint, None))
    pipeline = RefinePipeline(config)
    try:
        result = pipeline.refine(input_file.read(), query)
    except _RUNTIME_ERRORS as exc:
        _fail(exc)
    _write_audit(audit_log, result.audit)
    output.write(result.html)


@main.command("pipeline")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--input", "input_file", type=click.File("rb"), default="-")
@click.option("--output", type=click.File("w"), default="-")
@click.option("--query", default="")
@click.option("--records", is_flag=True,
              help="Input is JSONL records with html and query fields.")
@click.option("--budget", type=int, default=None, help="Final length limit.")
@click.option("--granularity", type=int, default=None,
              help="Max words per coarse block.")
@click.option("--stage2", type=click.Choice(["gen", "off"]), default=None)
@click.option("--workers", type=int, default=None)
@click.option("--audit-log", "audit_log", type=click.Path(), default=None)
@click.option("--timings", is_flag=True,
              help="Add per-record elapsed_ms to rows (needs --records).")
@click.option("--embed-endpoint", default=None)
@click.option("--logits-endpoint", default=None)
def pipeline_cmd(config_path, input_file, output, query, records, budget,
                 granularity, stage2, workers, audit_log, timings,
                 embed_endpoint, logits_endpoint) -> None:
    """Full two-stage refinement of a page or a JSONL record stream.

    In records mode a failing record becomes an ``{"id", "error"}`` row
    and the rest of the batch still runs; the exit code is 1 only when
    every record fails.
    """
    if timings and not records:
        raise click.UsageError("--timings needs --records")
    config = _override(_load_base_config(config_path), final_budget=budget,
                       coarse_words=granularity, stage2=stage2,
                       workers=workers,
                       **_endpoint_overrides(embed_endpoint, logits_endpoint))
    pipeline = RefinePipeline(config)
    if not records:
        try:
            result = pipeline.refine(input_file.read(), query)
        except _RUNTIME_ERRORS as exc:
            _fail(exc)
        _write_audit(audit_log, result.audit)
        output.write(result.html)
        return

    try:
        recs = [json.loads(line) for line in
                input_file.read().decode("utf-8").splitlines() if line.strip()]
    except ValueError as exc:
        _fail(exc)
    results = pipeline.refine_many(recs, isolate_errors=True)
    audit = []
    errors = []
    for i, (rec, result) in enumerate(zip(recs, results)):
        rec_id = rec.get("id", i) if isinstance(rec, dict) else i
        if isinstance(result, Exception):
            errors.append(result)
            output.write(json.dumps({"id": rec_id,
                                     "error": str(result)}) + "\n")
            continue
        audit.extend(result.audit)
        row = {"id": rec_id, "html": result.html,
               "stats": result.stats.to_dict()}
        if timings:
            row["elapsed_ms"] = round(result.elapsed_s * 1000.0, 3)
        output.write(json.dumps(row) + "\n")
    _write_audit(audit_log, audit)
    if recs and len(errors) == len(recs):
        _fail(RuntimeError(f"all {len(recs)} records failed; "
                           f"first error: {errors[0]}"))


@main.command("fetch")
@click.argument("urls", nargs=-1, required=True)
@click.option("--output", type=click.File("wb"), default="-",
              help="Where one page's bytes go (single URL only).")
@click.option("--out-dir", "out_dir", type=click.Path(file_okay=False),
              default=None,
              help="Download every URL here and write a manifest.")
@click.option("--timeout", type=float, default=30.0)
def fetch_cmd(urls, output, out_dir, timeout) -> None:
    """Download pages: one to --output, or a batch into --out-dir.

    Batch mode stores each page under the sha256 of its URL (already
    fetched pages are skipped on a re-run), echoes the manifest rows,
    and exits nonzero only when every fetch fails.
    """
    if out_dir is not None:
        rows = fetch_urls(list(urls), out_dir, timeout=timeout)
        for row in rows:
            click.echo(json.dumps(row, sort_keys=True))
        if rows and all(r["status"] == "error" for r in rows):
            _fail(RuntimeError("all fetches failed"))
        return
    if len(urls) != 1:
        raise click.UsageError("fetching several URLs needs --out-dir")
    try:
        output.write(fetch_html(urls[0], timeout=timeout))
    except Exception as exc:
        _fail(exc)


@main.command("stats")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--input", "input_file", type=click.File("rb"), default="-")
@click.option("--output", type=click.File("w"), default="-")
@click.option("--blocks", "blocks_mode", is_flag=True,
              help="Describe one page's block tree instead.")
@click.option("--granularity", type=int, default=None)
def stats_cmd(config_path, input_file, output, blocks_mode,
              granularity) -> None:
    """Aggregate pipeline result rows, or dump one page's block tree.

    The default input is the JSONL written by ``pipeline --records``;
    rows carrying an error are counted but not aggregated.
    """
    config = _override(_load_base_config(config_path), stage2="off",
                       coarse_words=granularity)
    raw = input_file.read()
    if blocks_mode:
        try:
            blocks = describe_blocks(raw, config)
            cleaned = clean(parse_html(raw), config.clean_config())
        except _RUNTIME_ERRORS as exc:
            _fail(exc)
        measure = Budget(0, config.budget_unit).measure
        report = {
            "input_length": measure(raw.decode("utf-8", "replace")),
            "cleaned_length": measure(serialize(cleaned)),
            "block_count": len(blocks),
            "blocks": blocks,
        }
        output.write(json.dumps(report, indent=2) + "\n")
        return
    try:
        rows = [json.loads(line) for line in
                raw.decode("utf-8").splitlines() if line.strip()]
    except ValueError as exc:
        _fail(exc)
    report = report_stats([row["stats"] for row in rows
                           if isinstance(row, dict) and "stats" in row])
    report["errors"] = sum(1 for row in rows
                           if isinstance(row, dict) and "error" in row)
    output.write(json.dumps(report, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
