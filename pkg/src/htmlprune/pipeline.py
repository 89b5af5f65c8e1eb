"""Two-stage refinement: clean, block, score, prune, then again finer.

Stage one builds a coarse block tree over the cleaned input and prunes it
with an embedding-style scorer to an intermediate budget. Stage two
rebuilds a finer tree over the survivor and prunes it to the final budget
with the generative path scorer. Stage two can be switched off, in which
case stage one prunes straight to the final budget.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import requests

from .blocks import (InvalidGranularity, assign_paths, build_block_tree,
                     blocks_debug_dump)
from .cleaning import CleanConfig, clean
from .dom import DocumentSet, concat_documents, parse_html, serialize
from .pruning import AuditEntry, BUDGET_UNITS, Budget, PruneResult, prune
from .scoring import (Bm25Scorer, GenerativeScorer, RemoteEmbeddingScorer,
                      ScorerUnavailable)
from .tokentree import HashLogitsProvider, RemoteLogitsProvider, TraversalStats

STAGE1_SCORERS = ("lexical", "embedding")
STAGE2_MODES = ("gen", "off")


@dataclass(frozen=True, slots=True)
class RefineConfig:
    """Tunable knobs for the whole pipeline; serializable as plain JSON."""

    coarse_words: int = 256
    fine_words: int = 128
    intermediate_budget: int = 8192
    final_budget: int = 4096
    budget_unit: str = "words"
    stage1: str = "lexical"
    stage2: str = "gen"
    embed_endpoint: str | None = None
    logits_endpoint: str | None = None
    embed_fallback: bool = False
    attr_allowlist: tuple[str, ...] = ()
    drop_tags: tuple[str, ...] = ("script", "style")
    strip_comments: bool = True
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.stage1 not in STAGE1_SCORERS:
            raise ValueError(f"stage1 must be one of {STAGE1_SCORERS}")
        if self.stage2 not in STAGE2_MODES:
            raise ValueError(f"stage2 must be one of {STAGE2_MODES}")
        if self.stage1 == "embedding" and not self.embed_endpoint:
            raise ValueError("stage1 'embedding' needs an embed_endpoint")
        if self.budget_unit not in BUDGET_UNITS:
            raise ValueError(f"budget_unit must be one of {BUDGET_UNITS}")
        if self.coarse_words < 1 or self.fine_words < 1:
            raise ValueError("granularities must be at least 1 word")
        if self.stage2 == "gen" and self.fine_words >= self.coarse_words:
            raise InvalidGranularity(
                f"fine granularity {self.fine_words} must be below "
                f"coarse granularity {self.coarse_words}")
        if self.intermediate_budget < 1 or self.final_budget < 1:
            raise ValueError("budgets must be at least 1")
        if self.stage2 == "gen" and self.intermediate_budget < self.final_budget:
            raise ValueError(
                f"intermediate budget {self.intermediate_budget} must not be "
                f"below the final budget {self.final_budget}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @classmethod
    def from_dict(cls, data: dict) -> "RefineConfig":
        known = {f: data[f] for f in cls.__dataclass_fields__ if f in data}
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("attr_allowlist", "drop_tags"):
            if key in known:
                known[key] = tuple(known[key])
        return cls(**known)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["attr_allowlist"] = list(self.attr_allowlist)
        data["drop_tags"] = list(self.drop_tags)
        return data

    def clean_config(self) -> CleanConfig:
        return CleanConfig(attr_allowlist=frozenset(self.attr_allowlist),
                           drop_tags=frozenset(self.drop_tags),
                           strip_comments=self.strip_comments)


def load_config(path: str | Path) -> RefineConfig:
    with open(path, encoding="utf-8") as f:
        return RefineConfig.from_dict(json.load(f))


@dataclass(slots=True)
class RefineStats:
    """Lengths are in the configured budget unit over serialized HTML."""

    input_length: int
    cleaned_length: int
    output_length: int
    intermediate_length: int | None = None
    blocks_coarse: int = 0
    blocks_fine: int | None = None
    provider_calls: int = 0
    skipped_nodes: int = 0
    total_nodes: int = 0

    @property
    def skipped_fraction(self) -> float:
        if self.total_nodes == 0:
            return 1.0
        return self.skipped_nodes / self.total_nodes

    def to_dict(self) -> dict:
        data = asdict(self)
        data["skipped_fraction"] = self.skipped_fraction
        return data


@dataclass(slots=True)
class RefineResult:
    html: str
    stats: RefineStats
    audit: list[AuditEntry] = field(default_factory=list)
    docset: DocumentSet | None = None
    elapsed_s: float = 0.0


@dataclass(slots=True)
class StagedPrune:
    """Outcome of the staged prune, before serialization."""

    result: PruneResult
    audit: list[AuditEntry]
    blocks_coarse: int
    blocks_fine: int | None = None
    intermediate_length: int | None = None
    gen_stats: TraversalStats | None = None


def two_stage_prune(docset: DocumentSet, query: str, embed_scorer,
                    gen_scorer, config: RefineConfig) -> StagedPrune:
    """Prune a cleaned document set under the configured budgets.

    Stage one scores a coarse block tree with ``embed_scorer`` and prunes
    to the intermediate budget, or straight to the final budget when
    stage two is off. Stage two rebuilds a finer tree over the survivor
    and prunes it to the final budget with ``gen_scorer`` (anything with
    a ``score_tree`` method; may be None when off).
    """
    cfg = config
    budget_of = lambda limit: Budget(limit=limit, unit=cfg.budget_unit)
    tree = assign_paths(build_block_tree(docset, cfg.coarse_words))
    texts = [b.block_text for b in tree.blocks]
    try:
        scores = embed_scorer.score_blocks(query, texts)
    except ScorerUnavailable:
        if not cfg.embed_fallback:
            raise
        scores = Bm25Scorer().score_blocks(query, texts)
    for block, score in zip(tree.blocks, scores):
        block.score = score

    stage1_limit = (cfg.intermediate_budget if cfg.stage2 == "gen"
                    else cfg.final_budget)
    result = prune(tree, budget_of(stage1_limit))
    staged = StagedPrune(result=result, audit=list(result.deleted),
                         blocks_coarse=len(tree.blocks))
    if cfg.stage2 == "gen":
        staged.intermediate_length = result.length
        fine = assign_paths(build_block_tree(result.docset, cfg.fine_words))
        gen_scorer.score_tree(fine)
        staged.result = prune(fine, budget_of(cfg.final_budget))
        staged.audit.extend(staged.result.deleted)
        staged.blocks_fine = len(fine.blocks)
        staged.gen_stats = getattr(gen_scorer, "last_stats", None)
    return staged


class RefinePipeline:
    """Runs the full refinement for one query over one or more documents.

    Scorers come from the config: stage one is local BM25 unless
    ``stage1`` is "embedding" (then the remote client at
    ``embed_endpoint``), and the logits provider is the seeded hash
    stand-in unless ``logits_endpoint`` is set. Objects passed directly
    win over the config.
    """

    def __init__(self, config: RefineConfig | None = None,
                 embed_scorer=None, logits_provider=None):
        self.config = config or RefineConfig()
        cfg = self.config
        if embed_scorer is None:
            embed_scorer = (RemoteEmbeddingScorer(cfg.embed_endpoint)
                            if cfg.stage1 == "embedding" else Bm25Scorer())
        self.embed_scorer = embed_scorer
        if logits_provider is None:
            logits_provider = (RemoteLogitsProvider(cfg.logits_endpoint)
                               if cfg.logits_endpoint
                               else HashLogitsProvider(seed=cfg.seed))
        self.logits_provider = logits_provider

    def refine(self, html, query: str = "",
               provenance: list[str] | None = None) -> RefineResult:
        """Refine one record: raw HTML (or a list of pages) plus a query."""
        started = time.perf_counter()
        cfg = self.config
        budget_of = lambda limit: Budget(limit=limit, unit=cfg.budget_unit)
        raw_list = html if isinstance(html, list) else [html]
        raw_texts = [r.decode("utf-8", "replace") if isinstance(r, bytes) else r
                     for r in raw_list]
        input_length = sum(budget_of(0).measure(t) for t in raw_texts)

        clean_cfg = cfg.clean_config()
        cleaned = [clean(parse_html(raw), clean_cfg) for raw in raw_list]
        docset = concat_documents(cleaned, provenance)
        cleaned_length = budget_of(0).measure(serialize(docset.document))

        gen_scorer = (GenerativeScorer(self.logits_provider, context=query)
                      if cfg.stage2 == "gen" else None)
        staged = two_stage_prune(docset, query, self.embed_scorer,
                                 gen_scorer, cfg)
        stats = RefineStats(input_length=input_length,
                            cleaned_length=cleaned_length,
                            output_length=staged.result.length,
                            intermediate_length=staged.intermediate_length,
                            blocks_coarse=staged.blocks_coarse,
                            blocks_fine=staged.blocks_fine)
        if staged.gen_stats is not None:
            stats.provider_calls = staged.gen_stats.provider_calls
            stats.skipped_nodes = staged.gen_stats.skipped_nodes
            stats.total_nodes = staged.gen_stats.total_nodes

        return RefineResult(html=serialize(staged.result.docset.document),
                            stats=stats, audit=staged.audit,
                            docset=staged.result.docset,
                            elapsed_s=time.perf_counter() - started)

    def refine_many(self, records: list, workers: int | None = None,
                    isolate_errors: bool = False,
                    timeout: float = 30.0) -> list:
        """Refine records in input order, identical for any worker count.

        Records are bare HTML strings or dicts as accepted by
        :func:`ingest_record`. With ``isolate_errors`` a failing record
        yields its exception in place of a result instead of aborting
        the batch; workers only bound concurrency.
        """
        workers = workers or self.config.workers

        def run(record) -> RefineResult:
            if isinstance(record, (str, bytes)):
                record = {"html": record}
            rec = ingest_record(record, timeout=timeout)
            return self.refine(rec["htmls"], rec["query"])

        def guarded(record):
            try:
                return run(record)
            except Exception as exc:
                return exc

        call = guarded if isolate_errors else run
        if workers == 1 or len(records) <= 1:
            return [call(rec) for rec in records]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(call, records))


def ingest_record(record: dict, timeout: float = 30.0) -> dict:
    """Normalize one query record to ``{"id", "query", "htmls"}``.

    Pages may be inline (``html`` or ``htmls``), file references
    (``html_files``), or fetched from ``urls``; all listed sources are
    gathered, and a record must yield at least one page.
    """
    htmls: list = []
    if "html" in record:
        htmls.append(record["html"])
    htmls.extend(record.get("htmls", ()))
    for ref in record.get("html_files", ()):
        htmls.append(Path(ref).read_bytes())
    for url in record.get("urls", ()):
        htmls.append(fetch_html(url, timeout=timeout))
    if not htmls:
        raise ValueError(
            "record needs html, htmls, html_files, or urls")
    return {"id": record.get("id"), "query": record.get("query", ""),
            "htmls": htmls}


def fetch_html(url: str, timeout: float = 30.0) -> bytes:
    """Download one page; returns raw bytes for the parser to sniff."""
    response = requests.get(url, timeout=timeout)
    response.raise_for_status()
    return response.content


def fetch_urls(urls: list[str], out_dir: str | Path,
               timeout: float = 30.0) -> list[dict]:
    """Download pages into ``out_dir`` and write a manifest.

    Files are named by the sha256 of their URL, so a re-run skips pages
    already on disk. Returns one row per URL in order: ``{"url",
    "status", "sha256", "file"}`` on success (status "fetched" or
    "cached"), ``{"url", "status": "error", "error"}`` on failure. The
    rows are also written to ``out_dir/manifest.jsonl``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows: list[dict] = []
    for url in urls:
        target = out / (hashlib.sha256(url.encode("utf-8")).hexdigest() + ".html")
        if target.exists():
            body = target.read_bytes()
            status = "cached"
        else:
            try:
                body = fetch_html(url, timeout=timeout)
            except Exception as exc:
                rows.append({"url": url, "status": "error", "error": str(exc)})
                continue
            target.write_bytes(body)
            status = "fetched"
        rows.append({"url": url, "status": status,
                     "sha256": hashlib.sha256(body).hexdigest(),
                     "file": target.name})
    with open(out / "manifest.jsonl", "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")
    return rows


def describe_blocks(html, config: RefineConfig | None = None) -> list[dict]:
    """Clean and block a page, returning the debug dump of its tree."""
    cfg = config or RefineConfig()
    cleaned = clean(parse_html(html), cfg.clean_config())
    docset = concat_documents([cleaned])
    tree = assign_paths(build_block_tree(docset, cfg.coarse_words))
    return blocks_debug_dump(tree)


def _summary(values: list) -> dict:
    vals = sorted(float(v) for v in values)

    def pct(p: int) -> float:
        return vals[max(0, math.ceil(p / 100 * len(vals)) - 1)]

    return {"mean": sum(vals) / len(vals), "p50": pct(50), "p90": pct(90)}


_REPORT_KEYS = ("input_length", "cleaned_length", "intermediate_length",
                "output_length", "provider_calls", "skipped_fraction")


def report_stats(stats_rows: list[dict]) -> dict:
    """Aggregate per-record refinement stats into one summary.

    Each length and counter gets mean/p50/p90 across records; the shrink
    ratio compares output to input length. Keys that are absent or None
    in every row are left out. A single row summarizes to itself.
    """
    report: dict = {"records": len(stats_rows)}
    if not stats_rows:
        return report
    for key in _REPORT_KEYS:
        values = [row[key] for row in stats_rows if row.get(key) is not None]
        if values:
            report[key] = _summary(values)
    shrinks = [1.0 - row["output_length"] / row["input_length"]
               for row in stats_rows if row.get("input_length")]
    if shrinks:
        report["shrink_ratio"] = _summary(shrinks)
    return report
