"""Operator command line: serve the API, replay scenarios, benchmark, verify.

Port and data directory honor the MEDLEDGER_PORT and MEDLEDGER_DATA_DIR
environment variables; explicit options win over both.
"""

from __future__ import annotations

import json
import os
import sys

import click

from .engine import EngineConfig, SupplyChainEngine
from .errors import MedLedgerError
from .supply import batch_key_of


def _load_config(config_path: str | None, data_dir: str | None = None) -> EngineConfig:
    config = EngineConfig.from_file(config_path) if config_path else EngineConfig()
    env_data_dir = os.environ.get("MEDLEDGER_DATA_DIR")
    if data_dir:
        config.data_dir = data_dir
    elif env_data_dir and config.data_dir is None:
        config.data_dir = env_data_dir
    return config


def _open_engine(config: EngineConfig) -> SupplyChainEngine:
    """Resume from the data directory when it already holds chains."""
    if config.data_dir and os.path.isdir(os.path.join(config.data_dir, "chains")):
        chain_dir = os.path.join(config.data_dir, "chains")
        if any(name.endswith(".chain") for name in os.listdir(chain_dir)):
            return SupplyChainEngine.load(config)
    if config.data_dir:
        os.makedirs(config.data_dir, exist_ok=True)
    return SupplyChainEngine(config)


@click.group()
def main():
    """Permissioned multi-ledger supply-chain engine."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Topology configuration file (JSON).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=None, type=int, help="Defaults to $MEDLEDGER_PORT or 8440.")
@click.option("--data-dir", default=None, type=click.Path(), help="Chain/store directory.")
def serve(config_path, host, port, data_dir):
    """Run the HTTP/JSON service."""
    import uvicorn

    from .api import create_app

    if port is None:
        port = int(os.environ.get("MEDLEDGER_PORT", "8440"))
    config = _load_config(config_path, data_dir)
    engine = _open_engine(config)
    click.echo(f"serving on http://{host}:{port} "
               f"(chains: {len(engine.chains_wire())}, data_dir: {config.data_dir})")
    uvicorn.run(create_app(engine), host=host, port=port, log_level="info")


@main.group()
def scenario():
    """Deterministic scenario scripts."""


@scenario.command("run")
@click.argument("file", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="Write the full JSON report here.")
def scenario_run(file, config_path, report_path):
    """Execute FILE and print a step-by-step report."""
    from .scenario import run_scenario

    config = None
    if config_path:
        config = _load_config(config_path)
    report = run_scenario(file, config=config)
    for step in report.steps:
        mark = "ok " if step.passed else "FAIL"
        outcome = step.error or "ok"
        click.echo(f"  [{mark}] step {step.index:3d}  {step.action:20s} "
                   f"actor={step.actor:28s} -> {outcome}")
    click.echo(f"scenario {report.name}: {report.passed} passed, {report.failed} failed")
    click.echo(f"final global head: {report.final_digests['global_head']}")
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(report.to_wire(), fh, indent=2, sort_keys=True)
    if report.mismatch_step is not None:
        click.echo(f"expectation violated at step {report.mismatch_step}", err=True)
        sys.exit(1)


@main.command()
@click.option("--op", "workload", required=True,
              type=click.Choice(["login", "register", "new_item", "check_item",
                                 "trace", "inbound", "outbound"]))
@click.option("-n", "iterations", default=100, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--base-url", default=None,
              help="Target service; omitted = self-host a fresh seeded service.")
@click.option("--clients", default=1, show_default=True)
def bench(workload, iterations, csv_path, base_url, clients):
    """Measure per-operation latency; prints p50/p95 and optionally writes CSV."""
    from .bench import run_bench, serve_background

    server = None
    try:
        if base_url is None:
            engine = SupplyChainEngine(EngineConfig())
            server, base_url = serve_background(engine)
            click.echo(f"self-hosted service at {base_url}")
        result = run_bench(workload, iterations, base_url, clients)
    except MedLedgerError as exc:
        click.echo(f"error: {exc.code}: {exc.message}", err=True)
        sys.exit(1)
    finally:
        if server is not None:
            server.should_exit = True
    click.echo(f"{workload}: n={len(result.micros)} "
               f"p50={result.p50}us p95={result.p95}us")
    if csv_path:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(result.to_csv())
        click.echo(f"wrote {csv_path}")


@main.command()
@click.option("--scope", default="all", show_default=True,
              help="all, chains, or a record kind (Entity, Delivery, ...).")
@click.option("--data-dir", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def verify(scope, data_dir, config_path):
    """Verify chain integrity and off-chain/on-chain consistency."""
    config = _load_config(config_path, data_dir)
    engine = SupplyChainEngine.load(config)
    failed = False
    if scope in ("all", "chains"):
        for key, report in engine.verify_all_chains().items():
            status = "ok" if report.ok else f"BAD at height {report.first_bad_height}: {report.detail}"
            click.echo(f"chain {key}: {status}")
            failed = failed or not report.ok
    if scope != "chains":
        store_scope = None if scope in ("all", "All") else scope
        report = engine.verify_consistency(store_scope)
        click.echo(f"store: checked={report['checked']} mismatches={report['mismatches']}")
        failed = failed or not report["ok"]
    sys.exit(1 if failed else 0)


@main.command()
@click.option("--name", required=True)
@click.option("--date", "production_date", required=True)
@click.option("--batch", "batch_number", required=True)
@click.option("--as", "requester_email", default=None,
              help="Trace through the engine as this entity (email).")
@click.option("--data-dir", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def trace(name, production_date, batch_number, requester_email, data_dir, config_path):
    """Trace a batch: brute-force oracle over the store, plus the engine path."""
    config = _load_config(config_path, data_dir)
    engine = SupplyChainEngine.load(config)
    key = batch_key_of(name, production_date, batch_number)

    oracle_hops = []
    for delivery in engine.supply.deliveries.values():
        for product_id, _ in delivery.items:
            product = engine.supply.products.get(product_id)
            if product is not None and product.batch_key == key:
                oracle_hops.append(delivery)
                break
    oracle_hops.sort(key=lambda d: (d.shipped_at is None, d.shipped_at or 0, d.delivery_id))
    click.echo(f"oracle scan: {len(oracle_hops)} deliveries under batch {key}")
    for delivery in oracle_hops:
        click.echo(f"  {delivery.delivery_id}: {delivery.address_from} -> "
                   f"{delivery.address_to} [{delivery.status.value}] "
                   f"shipped={delivery.shipped_at} received={delivery.received_at}")

    if requester_email:
        record = engine.registry.by_email(requester_email)
        if record is None:
            click.echo(f"error: no entity registered as {requester_email}", err=True)
            sys.exit(1)
        try:
            report = engine.trace(record.entity_id, name, production_date, batch_number)
        except MedLedgerError as exc:
            click.echo(f"engine trace failed: {exc.code}: {exc.message}", err=True)
            sys.exit(1)
        click.echo(json.dumps(report, indent=2, sort_keys=True))
        engine_ids = [h["delivery_id"] for h in report["hops"]]
        oracle_ids = [d.delivery_id for d in oracle_hops]
        click.echo(f"engine/oracle agree: {engine_ids == oracle_ids}")


if __name__ == "__main__":
    main()
