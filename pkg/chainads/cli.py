import argparse
import json
import logging
import os
import sys

from chainads.chain.block import HeaderValidationError, check_headers
from chainads.chain.objects import TemporalObject, read_objects
from chainads.chain.storage import (
    PARAMS_FILE, ChainStore, atomic_write, load_config, load_headers, load_params
)
from chainads.config import ChainConfig, ConfigError
from chainads.crypto.accumulator import Construction, create_accumulator, keygen
from chainads.errors import ChainAdsError
from chainads.query.processor import QueryOptions, QueryProcessor
from chainads.query.vo import VerificationObject, VOFormatError
from chainads.subscribe.service import LAZY, REALTIME, SubscriptionService
from chainads.transform.condition import QuerySyntaxError, parse_query
from chainads.transform.prefix import DomainError
from chainads.verify.verifier import RejectReason, Verifier, VerifyReport


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3


def write_results(path, results):
    """
    One canonical object per line.
    """
    atomic_write(path, b"".join(obj.canonical_bytes + b"\n" for obj in results))


def read_results(path):
    """
    :rtype: list[TemporalObject]
    """
    with open(path, "rb") as stream:
        return [TemporalObject.from_bytes(line.rstrip(b"\n")) for line in stream if line.strip()]


def _tuple_of(kind):
    def parse(text):
        return tuple(kind(item) for item in text.split(","))

    return parse


def _capacity(text):
    capacity = int(text)
    if capacity < 2:
        raise argparse.ArgumentTypeError(f"capacity must be at least 2, got {capacity}")

    return capacity


def cmd_keygen(args):
    if os.path.exists(args.out):
        raise CommandError(f"{args.out} already exists, refusing to overwrite it")

    params = keygen(
        Construction.parse(args.construction),
        args.capacity,
        seed=args.seed,
        group=args.group,
        transparent=args.transparent,
    )
    atomic_write(args.out, params.to_bytes())
    print(f"wrote {params.construction.label} params (q={params.capacity}, {params.group.name}) to {args.out}")
    return EXIT_OK


def cmd_build(args):
    params = load_params(args.params)
    config = ChainConfig(
        construction=params.construction.label,
        capacity=params.capacity,
        group=params.group.name,
        salt=bytes.fromhex(args.salt),
        widths=args.widths,
        offsets=args.offsets,
        scales=args.scales,
        index_mode=args.index_mode,
        skip_list_length=args.skip_list_length,
        difficulty=args.difficulty,
        block_policy=args.block_policy,
        workers=args.workers,
    )

    with open(args.objects, "r", encoding="utf-8") as stream:
        objects = read_objects(stream, dimensions=len(config.widths))

    store = ChainStore.create(args.chain, params, config)
    blocks = store.ingest(objects)
    print(f"built {len(blocks)} blocks from {len(objects)} objects, height {store.height}")
    return EXIT_OK


def cmd_query(args):
    store = ChainStore.open(args.chain)
    options = QueryOptions(batch=args.batch, use_skips=not args.no_skips, workers=args.workers or store.config.workers)
    results, vo = QueryProcessor(store, options).process(parse_query(args.query))

    data = vo.to_bytes()
    atomic_write(args.vo, data)
    if args.results:
        write_results(args.results, results)
    print(f"{len(results)} results, VO of {len(data)} bytes ({vo.mismatch_count()} proofs)")
    return EXIT_OK


def _light_client(directory):
    """
    Headers, params and configuration only, the light client never reads blocks.
    The header list is validated before anything is checked against it.

    :raise HeaderValidationError: on a broken header chain
    """
    config = load_config(directory)
    params = load_params(os.path.join(directory, PARAMS_FILE))
    headers = load_headers(directory)
    check_headers(headers, config.difficulty)

    accumulator = create_accumulator(params, salt=config.salt)
    return Verifier(headers, accumulator, config.domain)


def verify_encoded(verifier, query, results, data):
    """
    A VO that does not even decode is rejected as malformed.

    :rtype: VerifyReport
    """
    try:
        vo = VerificationObject.from_bytes(data, verifier.accumulator)
    except VOFormatError as e:
        return VerifyReport(RejectReason.MALFORMED, str(e))

    if vo.span is not None:
        return verifier.verify_span(query, results, vo)

    return verifier.verify_window(query, results, vo)


def cmd_verify(args):
    verifier = _light_client(args.chain)
    query = parse_query(args.query)
    results = read_results(args.results)
    with open(args.vo, "rb") as stream:
        report = verify_encoded(verifier, query, results, stream.read())

    print(report.to_json() if args.json else report.to_text())
    return EXIT_OK if report.accepted else EXIT_REJECT


def cmd_subscribe(args):
    """
    Replay the chain through the subscriptions listed in the query file (one query per line).
    """
    store = ChainStore.open(args.chain)
    service = SubscriptionService(
        store.accumulator, store.domain,
        max_depth=store.config.ip_max_depth, flush_threshold=store.config.lazy_flush_threshold
    )
    with open(args.queries, "r", encoding="utf-8") as stream:
        query_ids = [service.register(line.strip(), args.mode) for line in stream if line.strip()]

    for block in store.blocks(args.start):
        service.on_block(block)
    if args.mode == LAZY:
        for query_id in query_ids:
            service.flush(query_id)

    os.makedirs(args.out, exist_ok=True)
    verifier = _light_client(args.chain) if args.verify else None
    rejected = 0
    for query_id in query_ids:
        for results, vo in service.poll(query_id):
            stem = os.path.join(args.out, f"q{query_id:04d}-{vo.span[0]:08d}-{vo.span[1]:08d}")
            atomic_write(f"{stem}.vo", vo.to_bytes())
            write_results(f"{stem}.results", results)

            status = ""
            if verifier is not None:
                report = verifier.verify_span(service.query(query_id), results, vo)
                rejected += not report.accepted
                status = " ACCEPT" if report.accepted else f" REJECT: {report.reason.value}"
            print(f"q{query_id} blocks {vo.span[0]}..{vo.span[1]}: {len(results)} results, {len(vo)} bytes{status}")

    return EXIT_REJECT if rejected else EXIT_OK


def cmd_stats(args):
    store = ChainStore.open(args.chain)
    rows = store.stats()
    summary = {
        "height": store.height,
        "index_mode": store.config.index_mode,
        "construction": store.config.construction,
        "intra_bytes_per_block": sum(row["intra_bytes"] for row in rows) / max(1, len(rows)),
        "skip_bytes_per_block": sum(row["skip_bytes"] for row in rows) / max(1, len(rows)),
    }

    if args.query:
        query = parse_query(args.query)
        verifier = _light_client(args.chain)
        summary["queries"] = dict()
        for name, options in _option_matrix(store):
            results, vo = QueryProcessor(store, options).process(query)
            round_trip = VerificationObject.from_bytes(vo.to_bytes(), verifier.accumulator)
            report = verifier.verify_window(query, results, round_trip)
            summary["queries"][name] = {
                "results": len(results),
                "vo_bytes": len(vo),
                "proofs": vo.mismatch_count(),
                "pairings": report.pairings,
                "accepted": report.accepted,
            }

    if args.json:
        print(json.dumps({"summary": summary, "blocks": rows}, sort_keys=True))
        return EXIT_OK

    for key, value in summary.items():
        if key != "queries":
            print(f"{key}: {value}")
    for name, counters in summary.get("queries", dict()).items():
        print(f"{name}: " + ", ".join(f"{key}={value}" for key, value in counters.items()))

    return EXIT_OK


def _option_matrix(store):
    yield "no-skips", QueryOptions(use_skips=False)
    yield "skips", QueryOptions(use_skips=True)
    if store.accumulator.supports_aggregation:
        yield "skips+batch", QueryOptions(use_skips=True, batch=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="chainads", description="Authenticated queries over an append-only block store.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    keygen_command = commands.add_parser("keygen", help="run the setup ceremony")
    keygen_command.add_argument("construction", choices=["acc1", "acc2"])
    keygen_command.add_argument("capacity", type=_capacity, help="q, the largest encoded element")
    keygen_command.add_argument("out", help="params file to write")
    keygen_command.add_argument("--group", default="bls12-381")
    keygen_command.add_argument("--seed", type=int, default=None, help="reproducible ceremony (tests only)")
    keygen_command.add_argument("--transparent", action="store_true", help="keep the trapdoor (INSECURE)")
    keygen_command.set_defaults(handler=cmd_keygen)

    build_command = commands.add_parser("build", help="mine a chain from JSON lines objects")
    build_command.add_argument("params")
    build_command.add_argument("objects", help="JSON lines file")
    build_command.add_argument("chain", help="chain directory to create")
    build_command.add_argument("--block-policy", default="count:8")
    build_command.add_argument("--index-mode", choices=["nil", "intra", "both"], default="both")
    build_command.add_argument("--skip-list-length", type=int, default=5)
    build_command.add_argument("--widths", type=_tuple_of(int), default=(32, 32))
    build_command.add_argument("--offsets", type=_tuple_of(float), default=None)
    build_command.add_argument("--scales", type=_tuple_of(float), default=None)
    build_command.add_argument("--salt", default="", help="hex encoded element salt")
    build_command.add_argument("--difficulty", type=int, default=0)
    build_command.add_argument("--workers", type=int, default=1)
    build_command.set_defaults(handler=cmd_build)

    query_command = commands.add_parser("query", help="answer a time window query")
    query_command.add_argument("chain")
    query_command.add_argument("query")
    query_command.add_argument("--vo", required=True, help="VO file to write")
    query_command.add_argument("--results", help="results file to write")
    query_command.add_argument("--batch", action="store_true", help="aggregate mismatches sharing a clause")
    query_command.add_argument("--no-skips", action="store_true", help="ignore the skip lists")
    query_command.add_argument("--workers", type=int, default=None)
    query_command.set_defaults(handler=cmd_query)

    verify_command = commands.add_parser("verify", help="verify results against the headers")
    verify_command.add_argument("chain", help="chain directory, only headers, params and config are read")
    verify_command.add_argument("query")
    verify_command.add_argument("results")
    verify_command.add_argument("vo")
    verify_command.add_argument("--json", action="store_true")
    verify_command.set_defaults(handler=cmd_verify)

    subscribe_command = commands.add_parser("subscribe", help="replay the chain through subscriptions")
    subscribe_command.add_argument("chain")
    subscribe_command.add_argument("queries", help="file with one subscription query per line")
    subscribe_command.add_argument("--mode", choices=[REALTIME, LAZY], default=REALTIME)
    subscribe_command.add_argument("--out", required=True, help="directory receiving the messages")
    subscribe_command.add_argument("--start", type=int, default=1, help="first block height")
    subscribe_command.add_argument("--verify", action="store_true")
    subscribe_command.set_defaults(handler=cmd_subscribe)

    stats_command = commands.add_parser("stats", help="ADS sizes and VO counters")
    stats_command.add_argument("chain")
    stats_command.add_argument("--query", help="also compare VO sizes for this query")
    stats_command.add_argument("--json", action="store_true")
    stats_command.set_defaults(handler=cmd_stats)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )

    try:
        return args.handler(args)
    except HeaderValidationError as e:
        print(f"REJECT: invalid headers ({e})")
        return EXIT_REJECT
    except (QuerySyntaxError, DomainError, ConfigError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ChainAdsError as e:
        logger.debug("command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


class CommandError(ChainAdsError):
    pass


if __name__ == "__main__":
    sys.exit(main())
