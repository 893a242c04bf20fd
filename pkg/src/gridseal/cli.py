"""Operator command line: gridseal keygen|index|upload|append|search|fetch|bench|serve.

Every server-backed command also works against a local container path, so
the whole workflow can be exercised with no network. Exit codes: 0 success
(for search: at least one match), 1 for a search with no matches, 2 on any
error.

The --seed and --deterministic-nonce flags exist for reproducible test
containers only and are refused unless GRIDSEAL_TEST_FLAGS=1 is set in the
environment.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import bench as bench_mod
from . import container as container_mod
from .client import ServerConnection
from .errors import (
    ConfigError,
    GridsealError,
    QuerySyntaxError,
    SchemaError,
)
from .keys import MasterKey, keygen, load_key_file, save_key_file
from .matching import eval_query_collection
from .model import CollectionSchema
from .querylang import compile_query, parse_query
from .server import GridsealServer
from .storage import (
    ROW_ORDINAL,
    deterministic_seed_source,
    ingest_csv,
    seal_collection,
    unseal_record,
)

SERVER_ENV = "GRIDSEAL_SERVER"
TEST_FLAGS_ENV = "GRIDSEAL_TEST_FLAGS"

EXIT_OK = 0
EXIT_NO_MATCH = 1
EXIT_ERROR = 2


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return config


def _setting(args, config: dict, name: str, env: str | None = None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    if env and os.environ.get(env):
        return os.environ[env]
    return config.get(name)


def _parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"server address must be host:port, got {text!r}")
    try:
        return host, int(port)
    except ValueError:
        raise ConfigError(f"bad port in server address {text!r}") from None


def _parse_fields(value) -> list[str] | None:
    if value is None:
        return None
    if isinstance(value, list):
        return [str(f) for f in value]
    return [f.strip() for f in str(value).split(",") if f.strip()]


def _require_test_flags(flag_name: str) -> None:
    if os.environ.get(TEST_FLAGS_ENV) != "1":
        raise ConfigError(
            f"{flag_name} is a test-profile flag; set {TEST_FLAGS_ENV}=1 to enable it"
        )


def _key(args, config) -> MasterKey:
    key_path = _setting(args, config, "key")
    if not key_path:
        raise ConfigError("a key file is required (-k/--key)")
    return load_key_file(key_path)


# --- commands -------------------------------------------------------------------


def cmd_keygen(args, config) -> int:
    out = Path(args.out)
    if out.exists() and not args.force:
        print(f"error: {out} already exists; use --force to overwrite", file=sys.stderr)
        return EXIT_ERROR
    mk = keygen()
    save_key_file(mk, out, hex_mode=args.hex)
    print(f"wrote {'hex' if args.hex else 'raw'} key to {out}")
    return EXIT_OK


def cmd_index(args, config) -> int:
    mk = _key(args, config)
    fields = _parse_fields(_setting(args, config, "fields"))
    if not fields:
        raise ConfigError("--fields is required to build an index")
    id_source = _setting(args, config, "id_column") or ROW_ORDINAL

    seed_source = None
    if args.seed:
        _require_test_flags("--seed")
        seed_source = deterministic_seed_source(bytes.fromhex(args.seed))
    if args.deterministic_nonce:
        _require_test_flags("--deterministic-nonce")

    start = time.perf_counter()
    records, schema = ingest_csv(args.csv, fields, id_source)
    manifest, sealed = seal_collection(
        records,
        mk,
        schema,
        seed_source=seed_source,
        use_deterministic_nonce=args.deterministic_nonce,
    )
    container_mod.write_container(manifest, sealed, args.out)
    elapsed = time.perf_counter() - start
    if args.hex_csv:
        container_mod.write_hex_csv(sealed, args.hex_csv)
        print(f"wrote hex CSV demo to {args.hex_csv}")
    index_bytes = len(sealed) * schema.desired_count * 16
    print(
        f"sealed {len(sealed)} records (n={schema.desired_count}, "
        f"index {index_bytes} bytes) to {args.out} in {elapsed:.2f}s"
    )
    return EXIT_OK


def cmd_upload(args, config) -> int:
    manifest, sealed = container_mod.read_container(args.container)
    address = _server_address(args, config)
    collection = _collection(args, config)
    with ServerConnection(address) as conn:
        count = conn.upload(collection, manifest, sealed)
    print(f"uploaded {count} records to {collection}")
    return EXIT_OK


def cmd_append(args, config) -> int:
    mk = _key(args, config)
    fields = _parse_fields(_setting(args, config, "fields"))
    if not fields:
        raise ConfigError("--fields is required to append")
    id_source = _setting(args, config, "id_column") or ROW_ORDINAL
    records, schema = ingest_csv(
        args.csv, fields, id_source, row_ordinal_offset=args.id_offset
    )
    manifest, sealed = seal_collection(records, mk, schema)
    address = _server_address(args, config)
    collection = _collection(args, config)
    with ServerConnection(address) as conn:
        count = conn.append(collection, manifest, sealed)
    print(f"appended {count} records to {collection}")
    return EXIT_OK


def _server_address(args, config) -> tuple[str, int]:
    server = _setting(args, config, "server", env=SERVER_ENV)
    if not server:
        raise ConfigError(f"no server address (use -s or {SERVER_ENV})")
    return _parse_address(server)


def _collection(args, config) -> str:
    collection = _setting(args, config, "collection")
    if not collection:
        raise ConfigError("no collection name (use -c)")
    return collection


def _print_plain_rows(plains, fmt: str) -> None:
    if fmt == "lines":
        for record in plains:
            print(record.record_id.id_string)
        return
    if not plains:
        return
    header = ["id"] + [name for name, _ in plains[0].fields]
    rows = [
        [record.record_id.id_string] + [value for _, value in record.fields]
        for record in plains
    ]
    widths = [
        max(len(header[i]), *(len(row[i]) for row in rows)) for i in range(len(header))
    ]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))


def cmd_search(args, config) -> int:
    mk = _key(args, config)
    fmt = _setting(args, config, "format") or "table"

    if args.container:
        manifest, sealed = container_mod.read_container(args.container)
        if manifest.schema is None:
            raise SchemaError(
                f"{args.container} carries a redacted manifest; "
                "pass --fields to validate the query"
            )
        schema = manifest.schema
        expr = compile_query(parse_query(args.query, schema), mk)
        ids = [rid.id_string for rid in eval_query_collection(expr, sealed)]
        matched = [r for r in sealed if r.record_id.id_string in set(ids)]
    else:
        fields = _parse_fields(_setting(args, config, "fields"))
        if not fields:
            raise ConfigError("server-mode search needs --fields for validation")
        schema = CollectionSchema(all_fields=tuple(fields), desired_fields=tuple(fields))
        # Parse and compile before any network traffic.
        expr = compile_query(parse_query(args.query, schema), mk)
        address = _server_address(args, config)
        collection = _collection(args, config)
        with ServerConnection(address) as conn:
            ids = conn.search(collection, expr)
            matched = conn.fetch(collection, ids) if args.fetch and ids else []

    if args.fetch:
        if fmt == "hex-csv":
            sys.stdout.write(container_mod.render_hex_csv(matched))
        else:
            _print_plain_rows([unseal_record(r, mk) for r in matched], fmt)
    else:
        for ident in ids:
            print(ident)
    return EXIT_OK if ids else EXIT_NO_MATCH


def cmd_fetch(args, config) -> int:
    mk = _key(args, config)
    fmt = _setting(args, config, "format") or "table"
    if args.container:
        _, sealed = container_mod.read_container(args.container)
        by_id = {r.record_id.id_string: r for r in sealed}
        missing = [i for i in args.ids if i not in by_id]
        if missing:
            raise GridsealError(f"unknown record ids: {missing}")
        matched = [by_id[i] for i in args.ids]
    else:
        address = _server_address(args, config)
        collection = _collection(args, config)
        with ServerConnection(address) as conn:
            matched = conn.fetch(collection, args.ids)
    if fmt == "hex-csv":
        sys.stdout.write(container_mod.render_hex_csv(matched))
    else:
        _print_plain_rows([unseal_record(r, mk) for r in matched], fmt)
    return EXIT_OK


def cmd_serve(args, config) -> int:
    host, port = _parse_address(args.listen)
    server = GridsealServer(args.root, host, port)
    print(f"gridseal server on {server.address[0]}:{server.address[1]}, root {args.root}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def cmd_bench(args, config) -> int:
    if args.bench_command == "gen-corpus":
        bench_mod.gen_corpus(
            args.out,
            args.records,
            args.n,
            args.total_fields,
            args.cardinality,
            args.seed,
        )
        print(f"wrote {args.records} records x {args.total_fields} fields to {args.out}")
        return EXIT_OK
    if args.bench_command == "scaling":
        report = bench_mod.run_scaling(
            record_counts=[int(v) for v in args.records.split(",")],
            desired_counts=[int(v) for v in args.n.split(",")],
            repeats=args.repeats,
        )
        print(bench_mod.format_scaling(report))
        return EXIT_OK
    if args.bench_command == "leakage":
        report = bench_mod.run_leakage_suite()
        print(bench_mod.format_leakage(report))
        return EXIT_OK if report.passed else EXIT_ERROR
    if args.bench_command == "search":
        mk = _key(args, config)
        report = bench_mod.run_search_bench(
            args.container, args.query, mk, repeats=args.repeats
        )
        print(bench_mod.format_search_bench(report))
        return EXIT_OK
    raise ConfigError(f"unknown bench command {args.bench_command!r}")


# --- argument parsing -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridseal",
        description="Keyword-searchable encrypted storage for fixed-schema records.",
    )
    parser.add_argument("--config", help="JSON config file with default settings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a master key file")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--hex", action="store_true", help="write 32 hex chars instead of raw bytes")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("index", help="ingest a CSV and seal it into a container")
    p.add_argument("csv")
    p.add_argument("-k", "--key")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--fields", help="comma-separated desired (searchable) fields")
    p.add_argument("--id-column", dest="id_column", help="id column (default: row ordinal)")
    p.add_argument("--hex-csv", dest="hex_csv", help="also write the hex CSV demo file")
    p.add_argument("--seed", help="test-profile fixed seed (32 hex chars)")
    p.add_argument("--deterministic-nonce", action="store_true", help="test-profile nonces")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("upload", help="upload a sealed container to the server")
    p.add_argument("container")
    p.add_argument("-s", "--server")
    p.add_argument("-c", "--collection")
    p.set_defaults(func=cmd_upload)

    p = sub.add_parser("append", help="seal a small CSV and append it to a collection")
    p.add_argument("csv")
    p.add_argument("-k", "--key")
    p.add_argument("-s", "--server")
    p.add_argument("-c", "--collection")
    p.add_argument("--fields")
    p.add_argument("--id-column", dest="id_column")
    p.add_argument("--id-offset", dest="id_offset", type=int, default=0,
                   help="starting ordinal for synthesized row ids")
    p.set_defaults(func=cmd_append)

    p = sub.add_parser("search", help="run a boolean keyword query")
    p.add_argument("query")
    p.add_argument("-k", "--key")
    p.add_argument("-s", "--server")
    p.add_argument("-c", "--collection")
    p.add_argument("--container", help="search a local container instead of a server")
    p.add_argument("--fields", help="desired fields (server mode; validates the query)")
    p.add_argument("--fetch", action="store_true", help="fetch and decrypt matches")
    p.add_argument("--format", choices=["table", "lines", "hex-csv"])
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("fetch", help="fetch and decrypt records by id")
    p.add_argument("ids", nargs="+")
    p.add_argument("-k", "--key")
    p.add_argument("-s", "--server")
    p.add_argument("-c", "--collection")
    p.add_argument("--container")
    p.add_argument("--format", choices=["table", "lines", "hex-csv"])
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("serve", help="run the storage server")
    p.add_argument("--root", required=True)
    p.add_argument("--listen", default="127.0.0.1:7433")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("bench", help="benchmarks and leakage checks")
    bench_sub = p.add_subparsers(dest="bench_command", required=True)

    b = bench_sub.add_parser("gen-corpus", help="write a synthetic CSV corpus")
    b.add_argument("-o", "--out", required=True)
    b.add_argument("--records", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--total-fields", type=int, required=True)
    b.add_argument("--cardinality", type=int, default=50)
    b.add_argument("--seed", type=int, default=1)

    b = bench_sub.add_parser("scaling", help="latency-vs-size linear fit")
    b.add_argument("--records", default="1000,2000,4000,8000,16000")
    b.add_argument("--n", default="4,8,16")
    b.add_argument("--repeats", type=int, default=5)

    bench_sub.add_parser("leakage", help="unlinkability, uniformity, sentinel scan")

    b = bench_sub.add_parser("search", help="time one query against a container")
    b.add_argument("--container", required=True)
    b.add_argument("--query", required=True)
    b.add_argument("-k", "--key")
    b.add_argument("--repeats", type=int, default=5)

    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except QuerySyntaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        query = getattr(args, "query", None)
        if query is not None and 0 <= exc.position <= len(query):
            print(f"  {query}", file=sys.stderr)
            print(f"  {' ' * exc.position}^", file=sys.stderr)
        return EXIT_ERROR
    except GridsealError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
