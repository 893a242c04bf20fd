"""Desk-scale reproduction of the scheme's complexity and leakage claims.

Three suites:

- scaling: single-threaded search latency against records*n must fit a line
  (the direct-index scan is linear in both the record count and the slots
  scanned per record), and the index payload must be exactly
  records * n * 16 bytes.
- leakage: shared keywords produce pairwise-distinct codewords, slot
  positions are uniform, and a transcript of everything server-bound
  contains none of the planted plaintext sentinels.
- search: latency of one query against a collection, reported against the
  0.15 s reference from the original prototype (an interpreted-language
  upper bound to beat, not a target).

Timing assertions elsewhere in the test suite use ratios and fits, never
absolute wall-clock, except the informational prototype comparison.
"""

from __future__ import annotations

import csv
import random
import secrets
import statistics
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .client import ServerConnection, Transcript
from .errors import ConfigError
from .keys import MasterKey, keygen
from .matching import search_collection
from .model import CollectionSchema, RecordId, SealedRecord
from .primitives import BLOCK_SIZE
from .querylang import compile_query, parse_query
from .server import GridsealServer
from .sse import IndexBuilder, Keyword, trapdoor
from .storage import PlainRecord, desired_keywords, ingest_csv, seal_collection

PROTOTYPE_SEARCH_SECONDS = 0.15  # published prototype: 4819 indexes, 1.6 GHz laptop


# --- synthetic corpora ----------------------------------------------------------


def corpus_field_names(total_fields: int) -> list[str]:
    return [f"f{i}" for i in range(total_fields)]


def gen_corpus(
    path: str | Path,
    record_count: int,
    desired_count: int,
    total_fields: int,
    value_cardinality: int,
    seed: int,
) -> None:
    """Write a synthetic CSV: fields f0..f(N-1), per-field vocabularies.

    Deterministic given the seed, byte for byte.
    """
    if desired_count > total_fields:
        raise ConfigError("desired_count cannot exceed total_fields")
    rng = random.Random(seed)
    names = corpus_field_names(total_fields)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for _ in range(record_count):
            writer.writerow(
                [
                    f"{name}v{rng.randrange(value_cardinality)}"
                    for name in names
                ]
            )


def corpus_schema(desired_count: int, total_fields: int) -> CollectionSchema:
    names = corpus_field_names(total_fields)
    return CollectionSchema(
        all_fields=tuple(names), desired_fields=tuple(names[:desired_count])
    )


def synthetic_collection(
    record_count: int,
    desired_count: int,
    total_fields: int,
    value_cardinality: int,
    seed: int,
    mk: MasterKey,
) -> tuple[CollectionSchema, list[PlainRecord], list[SealedRecord]]:
    """In-memory equivalent of gen_corpus + ingest + seal."""
    rng = random.Random(seed)
    schema = corpus_schema(desired_count, total_fields)
    plains = []
    for i in range(record_count):
        fields = tuple(
            (name, f"{name}v{rng.randrange(value_cardinality)}")
            for name in schema.all_fields
        )
        plains.append(
            PlainRecord(record_id=RecordId.from_string(f"row-{i}"), fields=fields)
        )
    seed_rng = random.Random(seed ^ 0x5EED)
    _, sealed = seal_collection(
        plains,
        mk,
        schema,
        seed_source=lambda: seed_rng.getrandbits(128).to_bytes(BLOCK_SIZE, "big"),
    )
    return schema, plains, sealed


# --- scaling -------------------------------------------------------------------


@dataclass
class ScalingPoint:
    record_count: int
    desired_count: int
    latencies: list[float]
    index_bytes: int

    @property
    def median_latency(self) -> float:
        return statistics.median(self.latencies)


@dataclass
class ScalingReport:
    points: list[ScalingPoint]
    slope: float
    intercept: float
    r_squared: float

    def index_sizes_exact(self) -> bool:
        return all(
            p.index_bytes == p.record_count * p.desired_count * BLOCK_SIZE
            for p in self.points
        )


def time_search(
    sealed: Sequence[SealedRecord], t: bytes, repeats: int = 5
) -> list[float]:
    latencies = []
    for _ in range(repeats):
        start = time.perf_counter()
        search_collection(t, sealed)
        latencies.append(time.perf_counter() - start)
    return latencies


def run_scaling(
    record_counts: Sequence[int] = (1000, 2000, 4000, 8000, 16000),
    desired_counts: Sequence[int] = (4, 8, 16),
    repeats: int = 5,
    value_cardinality: int = 50,
    seed: int = 7,
    mk: MasterKey | None = None,
) -> ScalingReport:
    if mk is None:
        mk = keygen()
    points = []
    for n in desired_counts:
        schema, plains, sealed = synthetic_collection(
            max(record_counts), n, n + 2, value_cardinality, seed + n, mk
        )
        # One query keyword that actually occurs, so the scan does real work.
        probe = desired_keywords(plains[0], schema)[0]
        t = trapdoor(mk, probe)
        for count in record_counts:
            subset = sealed[:count]
            latencies = time_search(subset, t, repeats)
            index_bytes = sum(len(b"".join(r.index)) for r in subset)
            points.append(
                ScalingPoint(
                    record_count=count,
                    desired_count=n,
                    latencies=latencies,
                    index_bytes=index_bytes,
                )
            )
    x = np.array([p.record_count * p.desired_count for p in points], dtype=float)
    y = np.array([p.median_latency for p in points], dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    predicted = slope * x + intercept
    ss_res = float(np.sum((y - predicted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot else 1.0
    return ScalingReport(
        points=points, slope=float(slope), intercept=float(intercept), r_squared=r_squared
    )


# --- leakage -------------------------------------------------------------------


@dataclass
class LeakageReport:
    shared_keyword_codewords: int
    shared_keyword_distinct: bool
    all_codewords: int
    all_codewords_distinct: bool
    chi_square_p: float
    chi_square_ok: bool
    sentinels_planted: int
    sentinels_leaked: int
    details: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (
            self.shared_keyword_distinct
            and self.all_codewords_distinct
            and self.chi_square_ok
            and self.sentinels_leaked == 0
        )


def slot_position_counts(
    mk: MasterKey,
    tracked: Keyword,
    record_count: int = 10000,
    desired_count: int = 8,
    seed: int = 11,
) -> list[int]:
    """Where the tracked keyword's codeword lands, across fresh random seeds."""
    rng = random.Random(seed)
    builder = IndexBuilder(mk)
    counts = [0] * desired_count
    other_fields = [f"f{i}" for i in range(1, desired_count)]
    for i in range(record_count):
        rid = RecordId.from_string(f"row-{i}")
        keywords = [tracked] + [
            Keyword(field=name, value=f"{name}v{rng.randrange(50)}")
            for name in other_fields
        ]
        perm_seed = rng.getrandbits(128).to_bytes(BLOCK_SIZE, "big")
        index = builder.build(keywords, rid, perm_seed)
        counts[index.index(builder.codeword_for(tracked, rid))] += 1
    return counts


def run_leakage_suite(
    mk: MasterKey | None = None,
    record_count: int = 1000,
    desired_count: int = 8,
    chi_square_records: int = 10000,
    significance: float = 0.001,
    seed: int = 13,
) -> LeakageReport:
    if mk is None:
        mk = keygen()
    details: list[str] = []

    # Unlinkability: one keyword shared by every record.
    shared = Keyword(field="f0", value="shared")
    builder = IndexBuilder(mk)
    rng = random.Random(seed)
    shared_codewords = set()
    all_codewords: list[bytes] = []
    for i in range(record_count):
        rid = RecordId.from_string(f"row-{i}")
        keywords = [shared] + [
            Keyword(field=f"f{j}", value=f"f{j}v{rng.randrange(50)}")
            for j in range(1, desired_count)
        ]
        perm_seed = rng.getrandbits(128).to_bytes(BLOCK_SIZE, "big")
        index = builder.build(keywords, rid, perm_seed)
        shared_codewords.add(builder.codeword_for(shared, rid))
        all_codewords.extend(index)
    shared_distinct = len(shared_codewords) == record_count
    all_distinct = len(set(all_codewords)) == len(all_codewords)
    details.append(
        f"shared-keyword codewords: {len(shared_codewords)}/{record_count} distinct"
    )
    details.append(
        f"all codewords: {len(set(all_codewords))}/{len(all_codewords)} distinct"
    )

    # Slot uniformity.
    counts = slot_position_counts(
        mk, shared, record_count=chi_square_records, desired_count=desired_count, seed=seed
    )
    chi = stats.chisquare(counts)
    chi_ok = chi.pvalue >= significance
    details.append(f"slot counts {counts}, chi2 p={chi.pvalue:.4f}")

    # Sentinel scan through the real wire path and server disk.
    planted, leaked, scan_details = sentinel_scan(mk)
    details.extend(scan_details)

    return LeakageReport(
        shared_keyword_codewords=len(shared_codewords),
        shared_keyword_distinct=shared_distinct,
        all_codewords=len(all_codewords),
        all_codewords_distinct=all_distinct,
        chi_square_p=float(chi.pvalue),
        chi_square_ok=chi_ok,
        sentinels_planted=planted,
        sentinels_leaked=leaked,
        details=details,
    )


def sentinel_scan(
    mk: MasterKey, record_count: int = 30, desired_count: int = 4
) -> tuple[int, int, list[str]]:
    """Upload, search, and fetch sentinel-stuffed records; scan for leaks.

    Every desired field value carries a unique 8-byte sentinel; the wire
    transcript and the server's on-disk files must not contain any of them.
    """
    sentinels: list[str] = []
    names = corpus_field_names(desired_count + 2)
    schema = CollectionSchema(
        all_fields=tuple(names), desired_fields=tuple(names[:desired_count])
    )
    plains = []
    for i in range(record_count):
        values = []
        for name in names:
            token = secrets.token_hex(4)  # 8 hex chars per sentinel
            sentinels.append(token)
            values.append(f"{name}-{token}")
        plains.append(
            PlainRecord(
                record_id=RecordId.from_string(f"row-{i}"),
                fields=tuple(zip(names, values)),
            )
        )
    manifest, sealed = seal_collection(plains, mk, schema)

    with tempfile.TemporaryDirectory() as root:
        server = GridsealServer(root).start()
        try:
            transcript = Transcript()
            conn = ServerConnection(server.address, transcript=transcript)
            try:
                conn.upload("sentinel", manifest, sealed)
                probe = parse_query(
                    f"{names[0]}:{plains[0].fields[0][1]}", schema
                )
                ids = conn.search("sentinel", compile_query(probe, mk))
                if ids:
                    conn.fetch("sentinel", ids)
            finally:
                conn.close()
            blobs = [transcript.all_bytes()]
            for file in sorted(Path(root).rglob("*")):
                if file.is_file():
                    blobs.append(file.read_bytes())
        finally:
            server.shutdown()

    leaked = 0
    for token in sentinels:
        raw = token.encode("utf-8")
        if any(raw in blob for blob in blobs):
            leaked += 1
    details = [
        f"sentinels planted={len(sentinels)} leaked={leaked} "
        f"(scanned transcript + {len(blobs) - 1} server files)"
    ]
    return len(sentinels), leaked, details


# --- single-search benchmark ----------------------------------------------------


@dataclass
class SearchBenchReport:
    record_count: int
    desired_count: int
    latencies: list[float]
    index_bytes: int

    @property
    def median_latency(self) -> float:
        return statistics.median(self.latencies)

    @property
    def records_per_second(self) -> float:
        med = self.median_latency
        return self.record_count / med if med > 0 else float("inf")


def run_search_bench(
    container_path: str | Path, query_text: str, mk: MasterKey, repeats: int = 5
) -> SearchBenchReport:
    from . import container as container_mod
    from .matching import eval_query_collection

    manifest, sealed = container_mod.read_container(container_path)
    expr = compile_query(parse_query(query_text, manifest.schema), mk)
    latencies = []
    for _ in range(repeats):
        start = time.perf_counter()
        eval_query_collection(expr, sealed)
        latencies.append(time.perf_counter() - start)
    return SearchBenchReport(
        record_count=len(sealed),
        desired_count=manifest.desired_count,
        latencies=latencies,
        index_bytes=sum(len(b"".join(r.index)) for r in sealed),
    )


# --- report formatting -----------------------------------------------------------


def format_scaling(report: ScalingReport) -> str:
    lines = [
        f"{'records':>8} {'n':>4} {'median_s':>10} {'index_bytes':>12}",
    ]
    for p in report.points:
        lines.append(
            f"{p.record_count:>8} {p.desired_count:>4} "
            f"{p.median_latency:>10.6f} {p.index_bytes:>12}"
        )
    lines.append(
        f"linear fit vs records*n: latency = {report.slope:.3e}*x + "
        f"{report.intercept:.3e}, R^2 = {report.r_squared:.4f}"
    )
    lines.append(
        f"index sizes exact (records*n*16): {report.index_sizes_exact()}"
    )
    for p in report.points:
        lines.append(
            "gridseal-bench: kind=scaling "
            f"records={p.record_count} n={p.desired_count} "
            f"median_s={p.median_latency:.6f} index_bytes={p.index_bytes} "
            f"raw={','.join(f'{v:.6f}' for v in p.latencies)}"
        )
    lines.append(
        f"gridseal-bench: kind=fit slope={report.slope:.6e} "
        f"intercept={report.intercept:.6e} r2={report.r_squared:.6f}"
    )
    return "\n".join(lines)


def format_leakage(report: LeakageReport) -> str:
    lines = list(report.details)
    lines.append(
        "gridseal-bench: kind=leakage "
        f"shared_distinct={report.shared_keyword_distinct} "
        f"all_distinct={report.all_codewords_distinct} "
        f"chi2_p={report.chi_square_p:.6f} "
        f"sentinels_leaked={report.sentinels_leaked} "
        f"passed={report.passed}"
    )
    lines.append(f"leakage suite: {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines)


def format_search_bench(report: SearchBenchReport) -> str:
    reference = PROTOTYPE_SEARCH_SECONDS
    lines = [
        f"records={report.record_count} n={report.desired_count}",
        f"median latency: {report.median_latency * 1000:.2f} ms "
        f"({report.records_per_second:,.0f} records/s)",
        f"index bytes: {report.index_bytes} "
        f"(= {report.record_count} x {report.desired_count} x 16: "
        f"{report.index_bytes == report.record_count * report.desired_count * 16})",
        f"prototype reference: {reference * 1000:.0f} ms for 4819 records "
        f"({'faster' if report.median_latency < reference else 'slower'})",
        "gridseal-bench: kind=search "
        f"records={report.record_count} n={report.desired_count} "
        f"median_s={report.median_latency:.6f} "
        f"raw={','.join(f'{v:.6f}' for v in report.latencies)}",
    ]
    return "\n".join(lines)
