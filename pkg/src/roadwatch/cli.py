"""Operator command line: serve, agent tooling, driver import, demo."""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import tempfile
import threading
from pathlib import Path

from . import __version__
from .agent import flush_unacked, replay
from .api import AnalyticsApi
from .blackbox import BlackBox
from .config import Config, ConfigError, load_config
from .detection import DetectionConfig
from .geocode import ExternalHttpGeocoder, Gazetteer, GazetteerGeocoder
from .ingest import IngestionServer
from .livefeed import LiveFeed
from .notify import Dispatcher, HttpTelephony, MockTelephony, RetryPolicy
from .store import DriverRecord, EventStore
from .traces import Injection, ScenarioSpec, generate_trace, parse_trace, scenario_from_json, write_trace

log = logging.getLogger("roadwatch.cli")

DEFAULT_BLACKBOX = "blackbox.log"


def _detection_config(overrides: dict) -> DetectionConfig:
    known = {k: v for k, v in overrides.items()
             if k in DetectionConfig.__dataclass_fields__}
    return DetectionConfig(**known)


def _split_endpoint(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"endpoint must be host:port, got {value!r}")
    return host, int(port)


class Runtime:
    """Everything `serve` owns: store, feeds, dispatcher, both listeners."""

    def __init__(self, cfg: Config, heartbeat_s: float = 15.0):
        self.cfg = cfg
        self.store = EventStore(cfg.db_path)
        self.livefeed = LiveFeed()
        if cfg.geocoder == "external":
            geocoder = ExternalHttpGeocoder(cfg.geocoder_url)
        else:
            gaz = Gazetteer.load(cfg.gazetteer_path) if cfg.gazetteer_path else Gazetteer([])
            geocoder = GazetteerGeocoder(gaz)
        if cfg.telephony == "http":
            telephony = HttpTelephony(cfg.telephony_url, cfg.telephony_token or "")
        else:
            telephony = MockTelephony()
        self.telephony = telephony
        self.dispatcher = Dispatcher(
            self.store,
            geocoder,
            telephony,
            emergency_number=cfg.emergency_number,
            retry=RetryPolicy(cfg.retry_max_attempts, cfg.retry_base_s,
                              cfg.retry_factor, cfg.retry_cap_s),
        )
        self.ingest = IngestionServer(
            self.store, self.livefeed, on_crash=self.dispatcher.enqueue,
            host=cfg.host, port=cfg.wire_port,
        )
        self.api = AnalyticsApi(
            self.store, self.livefeed, host=cfg.host, port=cfg.api_port,
            cors_origin=cfg.cors_origin, heartbeat_s=heartbeat_s,
        )

    def start(self) -> None:
        self.dispatcher.start()
        self.dispatcher.recover()
        self.ingest.start()
        self.api.start()

    def stop(self) -> None:
        self.api.stop()
        self.ingest.stop()
        self.dispatcher.stop()
        self.store.close()


def cmd_serve(args) -> int:
    try:
        cfg = load_config(args.config, overrides={
            "host": args.host,
            "wire_port": args.wire_port,
            "api_port": args.api_port,
            "db_path": args.db,
            "geocoder": args.geocoder,
            "gazetteer_path": args.gazetteer,
            "geocoder_url": args.geocoder_url,
            "telephony": args.telephony,
            "telephony_url": args.telephony_url,
            "telephony_token": args.telephony_token,
            "emergency_number": args.emergency_number,
            "cors_origin": args.cors_origin,
        })
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        runtime = Runtime(cfg)
    except OSError as e:
        print(f"startup failed: {e}", file=sys.stderr)
        return 1
    runtime.start()
    print(
        f"roadwatch serving: wire on {cfg.host}:{runtime.ingest.port},"
        f" api on {cfg.host}:{runtime.api.port}, db {cfg.db_path}",
        flush=True,
    )
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    stop.wait()
    runtime.stop()
    return 0


def cmd_agent_gen_trace(args) -> int:
    try:
        spec = scenario_from_json(Path(args.spec).read_text())
        if args.seed is not None:
            spec = ScenarioSpec(
                route=spec.route, cruise_speed_kmh=spec.cruise_speed_kmh,
                sample_rate_hz=spec.sample_rate_hz, fix_rate_hz=spec.fix_rate_hz,
                injections=spec.injections, seed=args.seed,
                duration_ms=spec.duration_ms, device_id=spec.device_id,
            )
        trace = generate_trace(spec)
    except (OSError, ValueError) as e:
        print(f"gen-trace failed: {e}", file=sys.stderr)
        return 2
    write_trace(trace, args.out)
    print(f"wrote {args.out}: {len(trace.samples)} samples, {len(trace.fixes)} fixes")
    return 0


def cmd_agent_replay(args) -> int:
    try:
        trace = parse_trace(args.trace)
    except (OSError, ValueError) as e:
        print(f"replay failed: {e}", file=sys.stderr)
        return 2
    host, port = args.server
    driver = args.driver or trace.device_id
    cfg = _detection_config(trace.config_overrides)
    blackbox = BlackBox(args.blackbox)
    run = replay(trace, driver, cfg, host, port, blackbox, time_scale=args.time_scale)
    print(
        f"detected={run.detected} acked={run.acked} retransmissions={run.retransmissions}"
    )
    return 0 if run.all_acked else 1


def cmd_agent_flush(args) -> int:
    host, port = args.server
    blackbox = BlackBox(args.blackbox)
    count = flush_unacked(host, port, blackbox)
    print(f"flushed {count}")
    return 0 if not blackbox.unacked() else 1


def cmd_drivers_import(args) -> int:
    store = EventStore(args.db)
    try:
        imported, warnings = store.import_drivers_csv(args.csv)
    except Exception as e:
        print(f"import failed: {e}", file=sys.stderr)
        return 2
    finally:
        store.close()
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"imported {imported}")
    if imported == 0 and warnings:
        return 1
    return 0


DEMO_ROUTE = [(32.9800, -96.7500), (32.9880, -96.7500), (32.9960, -96.7500)]
DEMO_GAZETTEER = [
    ("Main St & 1st Ave", 32.9800, -96.7500),
    ("Campbell Rd & Floyd Rd", 32.9827, -96.7500),
    ("Synergy Park Blvd", 32.9960, -96.7500),
]
DEMO_DRIVER = ("d-demo", "Jordan Avery", "Honda Civic 2016", "TX-4821-RW",
               "Casey Avery", "+12145550137")


def demo_scenario(seed: int, include_crash: bool) -> ScenarioSpec:
    injections = [
        Injection(t=8_000, kind="pothole", peak_g=5.0, duration_ms=120),
        Injection(t=16_000, kind="pothole", peak_g=6.5, duration_ms=120),
    ]
    if include_crash:
        injections.append(Injection(t=24_000, kind="crash_x", peak_g=-13.0, duration_ms=100))
    return ScenarioSpec(
        route=DEMO_ROUTE,
        cruise_speed_kmh=45.0,
        sample_rate_hz=50.0,
        fix_rate_hz=1.0,
        injections=injections,
        seed=seed,
        duration_ms=40_000,
        device_id="d-demo",
    )


def run_demo(seed: int, include_crash: bool, out=None, workdir: Path | None = None) -> int:
    """One-shot end-to-end run against a fresh server; prints the outbox."""
    out = out or sys.stdout
    with tempfile.TemporaryDirectory(prefix="roadwatch-demo-") as tmp:
        base = workdir or Path(tmp)
        gaz_path = base / "gazetteer.csv"
        gaz_path.write_text(
            "name,lat,lon\n"
            + "".join(f"{n},{la},{lo}\n" for n, la, lo in DEMO_GAZETTEER)
        )
        cfg = Config(
            wire_port=0, api_port=0, db_path=str(base / "demo.db"),
            gazetteer_path=str(gaz_path), retry_base_s=0.01,
        )
        runtime = Runtime(cfg)
        runtime.store.upsert_driver(DriverRecord(*DEMO_DRIVER))
        runtime.start()
        try:
            spec = demo_scenario(seed, include_crash)
            trace = generate_trace(spec)
            blackbox = BlackBox(base / "blackbox.log")
            run = replay(trace, "d-demo", DetectionConfig(), "127.0.0.1",
                         runtime.ingest.port, blackbox)
            runtime.dispatcher.drain(timeout_s=10)
            events = runtime.store.query_events(0, 2**62)
            crashes = sum(1 for e in events if e.type == "crash")
            potholes = sum(1 for e in events if e.type == "pothole")
            print(
                f"detected={run.detected} acked={run.acked}"
                f" stored={len(events)} (crashes={crashes}, potholes={potholes})",
                file=out,
            )
            print("outbox:", file=out)
            outbox = runtime.store.all_notifications()
            if not outbox:
                print("  (empty)", file=out)
            for n in outbox:
                print(
                    f"  [{n.notif_id}] {n.kind} to {n.to}: {n.status}"
                    f" attempts={n.attempts} -- {n.message}",
                    file=out,
                )
            return 0 if run.all_acked else 1
        finally:
            runtime.stop()


def cmd_demo(args) -> int:
    return run_demo(args.seed, include_crash=not args.no_crash)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roadwatch", description=__doc__)
    p.add_argument("--version", action="version", version=f"roadwatch {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the ingestion server and analytics API")
    serve.add_argument("--config", help="JSON config file")
    serve.add_argument("--host", default=None)
    serve.add_argument("--wire-port", type=int, default=None)
    serve.add_argument("--api-port", type=int, default=None)
    serve.add_argument("--db", default=None, help="sqlite database path")
    serve.add_argument("--geocoder", choices=["gazetteer", "external"], default=None)
    serve.add_argument("--gazetteer", default=None, help="gazetteer CSV path")
    serve.add_argument("--geocoder-url", default=None)
    serve.add_argument("--telephony", choices=["mock", "http"], default=None)
    serve.add_argument("--telephony-url", default=None)
    serve.add_argument("--telephony-token", default=None)
    serve.add_argument("--emergency-number", default=None)
    serve.add_argument("--cors-origin", default=None)
    serve.set_defaults(func=cmd_serve)

    agent = sub.add_parser("agent", help="device agent tooling")
    agent_sub = agent.add_subparsers(dest="agent_command", required=True)

    gen = agent_sub.add_parser("gen-trace", help="synthesize a sensor trace from a scenario")
    gen.add_argument("--spec", required=True, help="scenario JSON file")
    gen.add_argument("--out", required=True, help="trace file to write")
    gen.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    gen.set_defaults(func=cmd_agent_gen_trace)

    rep = agent_sub.add_parser("replay", help="replay a trace against a server")
    rep.add_argument("--trace", required=True)
    rep.add_argument("--driver", default=None, help="driver id (default: trace header)")
    rep.add_argument("--server", required=True, type=_split_endpoint, metavar="HOST:PORT")
    rep.add_argument("--time-scale", type=float, default=0.0,
                     help="speed multiplier; 0 = as fast as possible")
    rep.add_argument("--blackbox", default=DEFAULT_BLACKBOX)
    rep.set_defaults(func=cmd_agent_replay)

    flush = agent_sub.add_parser("flush", help="re-send unacked black-box entries")
    flush.add_argument("--server", required=True, type=_split_endpoint, metavar="HOST:PORT")
    flush.add_argument("--blackbox", default=DEFAULT_BLACKBOX)
    flush.set_defaults(func=cmd_agent_flush)

    drivers = sub.add_parser("drivers", help="driver registry tooling")
    drivers_sub = drivers.add_subparsers(dest="drivers_command", required=True)
    imp = drivers_sub.add_parser("import", help="bulk import drivers from CSV")
    imp.add_argument("csv")
    imp.add_argument("--db", default="roadwatch.db")
    imp.set_defaults(func=cmd_drivers_import)

    demo = sub.add_parser("demo", help="end-to-end demo on a fresh server")
    demo.add_argument("--seed", type=int, default=7)
    demo.add_argument("--no-crash", action="store_true")
    demo.set_defaults(func=cmd_demo)

    return p


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
