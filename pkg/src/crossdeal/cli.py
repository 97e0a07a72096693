"""Command-line surface: scenario runs, seed sweeps, state inspection, demo stack.

    crossdeal run-scenario FILE --seed 7       one deterministic run + report
    crossdeal explore FILE --seeds 1000        seed sweep with aggregate verdict
    crossdeal inspect-chain CHAIN ...          chain state via gateway or dump
    crossdeal inspect-log TOPIC ...            log records via gateway or data dir
    crossdeal demo-up                          boot chains + log + service + gateway
    crossdeal demo-auction                     drive a full auction over HTTP
"""

from __future__ import annotations

import json
import sys
import time

import click

from .eventlog import EventLog
from .keys import KeyPair
from .scenarios import explore as explore_fn
from .scenarios import run_scenario


def _load_spec(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _echo_report(result) -> None:
    click.echo(f"seed        : {result.seed}")
    click.echo(f"outcome     : {result.outcome}")
    click.echo(f"steps       : {result.steps} (quiesced={result.quiesced})")
    click.echo(f"trace hash  : {result.trace_hash}")
    for chain_id, digest in result.digests.items():
        click.echo(f"digest {chain_id:<12}: {digest}")
    for name in ("atomicity", "conservation", "nft_unique",
                 "conclusion_follows_log", "lender_safety"):
        section = result.report.get(name)
        if isinstance(section, dict):
            click.echo(f"{name:<22}: {'ok' if section.get('ok') else 'VIOLATED'}")
    click.echo(f"all terminal          : {result.report['all_terminal']}")


@click.group()
def main() -> None:
    """Cross-chain deals over simulated ledgers."""


@main.command("run-scenario")
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--step-bound", default=100_000, show_default=True, type=int)
@click.option("--no-arbitration", is_flag=True,
              help="Disable the log's conclusion arbitration (negative control).")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.option("--trace", "trace_path", type=click.Path(),
              help="Write the full trace as JSON lines.")
@click.option("--dump-state", "dump_path", type=click.Path(),
              help="Write final chain states (for inspect-chain --state).")
def run_scenario_cmd(scenario, seed, step_bound, no_arbitration, as_json,
                     trace_path, dump_path):
    """Run one scenario deterministically and report invariants."""
    spec = _load_spec(scenario)
    mutations = {"log_arbitration": False} if no_arbitration else None
    result = run_scenario(spec, seed, step_bound, mutations,
                          keep_trace=bool(trace_path))
    if trace_path:
        with open(trace_path, "w", encoding="utf-8") as fh:
            for entry in result.trace:
                fh.write(json.dumps(entry, sort_keys=True, default=str) + "\n")
    if dump_path:
        from .scenarios import BUILDERS

        sched, stack = BUILDERS[spec.get("kind", "auction")](spec, seed, mutations)
        sched.run(step_bound)
        dump = {"seed": seed,
                "chains": {c: stack.ledgers[c].state_export()
                           for c in sorted(stack.ledgers)}}
        with open(dump_path, "w", encoding="utf-8") as fh:
            json.dump(dump, fh, indent=2, sort_keys=True)
    if as_json:
        click.echo(json.dumps(result.to_json(), sort_keys=True))
    else:
        _echo_report(result)
    sys.exit(0 if result.report["ok"] else 1)


@main.command("explore")
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--seeds", default=100, show_default=True, type=int)
@click.option("--start", default=0, show_default=True, type=int)
@click.option("--step-bound", default=100_000, show_default=True, type=int)
@click.option("--no-arbitration", is_flag=True)
@click.option("--stop-on-violation", is_flag=True)
@click.option("--json", "as_json", is_flag=True)
def explore_cmd(scenario, seeds, start, step_bound, no_arbitration,
                stop_on_violation, as_json):
    """Sweep a scenario across seeds and aggregate invariant results."""
    spec = _load_spec(scenario)
    mutations = {"log_arbitration": False} if no_arbitration else None
    t0 = time.time()
    report = explore_fn(spec, range(start, start + seeds), step_bound,
                        mutations, stop_on_violation)
    elapsed = time.time() - t0
    if as_json:
        click.echo(json.dumps({**report.to_json(), "elapsed_s": round(elapsed, 2)},
                              sort_keys=True))
    else:
        click.echo(f"runs        : {report.runs} in {elapsed:.1f}s")
        click.echo(f"outcomes    : {report.outcomes}")
        click.echo(f"violations  : {len(report.violations)}")
        for violation in report.violations[:10]:
            click.echo(f"  seed {violation['seed']}: {violation['failed']} "
                       f"({violation['outcome']})")
        click.echo(f"stuck seeds : {len(report.stuck_seeds)}")
    sys.exit(0 if report.ok else 1)


@main.command("inspect-chain")
@click.argument("chain_id")
@click.option("--url", help="Gateway base URL (live stack).")
@click.option("--state", "state_path", type=click.Path(exists=True),
              help="State dump written by run-scenario --dump-state.")
@click.option("--account", help="Account name (gateway keystore) or hex address.")
@click.option("--nft", help="NFT id to resolve the owner of.")
@click.option("--contract", help="Contract address to show.")
@click.option("--events-since", type=int, help="List events from a sequence number.")
def inspect_chain(chain_id, url, state_path, account, nft, contract, events_since):
    """Query one chain's state from a live gateway or a state dump."""
    if bool(url) == bool(state_path):
        raise click.UsageError("exactly one of --url or --state is required")
    if url:
        import httpx

        params = {}
        if account is not None:
            params["account"] = account
        if nft is not None:
            params["nft"] = nft
        if contract is not None:
            params["contract"] = contract
        if events_since is not None:
            params["events_since"] = events_since
        response = httpx.get(f"{url.rstrip('/')}/chains/{chain_id}/state",
                             params=params, timeout=10)
        if response.status_code != 200:
            click.echo(f"error: {response.status_code} {response.text}", err=True)
            sys.exit(1)
        click.echo(json.dumps(response.json(), indent=2, sort_keys=True))
        return
    dump = _load_spec(state_path)
    chain = dump["chains"].get(chain_id)
    if chain is None:
        click.echo(f"error: no chain {chain_id!r} in dump", err=True)
        sys.exit(1)
    if account is not None:
        click.echo(json.dumps({"account": account,
                               "balance": chain["accounts"].get(account, 0)}))
    elif nft is not None:
        click.echo(json.dumps({"nft": nft, "owner": chain["nfts"].get(nft)}))
    elif contract is not None:
        click.echo(json.dumps(chain["contracts"].get(contract), indent=2,
                              sort_keys=True))
    elif events_since is not None:
        click.echo(json.dumps(chain["events"][events_since:], indent=2))
    else:
        click.echo(json.dumps(chain, indent=2, sort_keys=True))


@main.command("inspect-log")
@click.argument("topic")
@click.option("--url", help="Gateway base URL (live stack).")
@click.option("--data-dir", type=click.Path(exists=True),
              help="Event log segment directory.")
@click.option("--from", "from_offset", default=0, show_default=True, type=int)
def inspect_log(topic, url, data_dir, from_offset):
    """Print a topic's records in offset order."""
    if bool(url) == bool(data_dir):
        raise click.UsageError("exactly one of --url or --data-dir is required")
    if url:
        import httpx

        response = httpx.get(f"{url.rstrip('/')}/log/{topic}",
                             params={"from_offset": from_offset}, timeout=10)
        records = response.json()["records"]
    else:
        log = EventLog(KeyPair.dev("log-operator"), data_dir=data_dir)
        records = [r.to_json() for r in log.read(topic, from_offset)]
    for record in records:
        click.echo(json.dumps(record, sort_keys=True))


@main.command("demo-up")
@click.option("--port", default=8732, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="Genesis config JSON (chains, balances, nft grants, parties).")
@click.option("--data-dir", type=click.Path(),
              help="Persist log segments here (default: $CROSSDEAL_DATA_DIR).")
@click.option("--token", default="dev-token", show_default=True,
              help="Dev token required on mutating requests.")
@click.option("--ui", "ui_dir", type=click.Path(exists=True),
              help="Serve a built web client from this directory at /ui.")
def demo_up(port, host, config_path, data_dir, token, ui_dir):
    """Boot the full stack (3 chains, log, deal service, gateway) in real time."""
    import os

    import uvicorn

    from .gateway import create_app, default_demo_state, state_from_config

    data_dir = data_dir or os.environ.get("CROSSDEAL_DATA_DIR") or None
    if config_path:
        state = state_from_config(_load_spec(config_path), data_dir=data_dir,
                                  dev_token=token)
    else:
        state = default_demo_state(data_dir=data_dir, dev_token=token)
    state.start()
    app = create_app(state, ui_dir=ui_dir)
    click.echo(f"chains      : {sorted(state.ledgers)}")
    click.echo(f"accounts    : {sorted(state.keystore)}")
    click.echo(f"gateway     : http://{host}:{port}  (dev token: {token})")
    if ui_dir:
        click.echo(f"web client  : http://{host}:{port}/ui/")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("demo-auction")
@click.option("--url", default="http://127.0.0.1:8732", show_default=True)
@click.option("--token", default="dev-token", show_default=True)
@click.option("--asset", default="ticket-1", show_default=True)
@click.option("--duration", default=6.0, show_default=True,
              help="Seconds of open bidding before the auction ends.")
@click.option("--bid1", default=100, show_default=True, type=int)
@click.option("--bid2", default=45, show_default=True, type=int)
@click.option("--wait", default=60.0, show_default=True,
              help="Seconds to wait for the conclusion.")
def demo_auction(url, token, asset, duration, bid1, bid2, wait):
    """Drive the whole flow over HTTP: create, bid from two chains, conclude."""
    import httpx

    base = url.rstrip("/")
    headers = {"x-dev-token": token}

    def post(path, body):
        response = httpx.post(f"{base}{path}", json=body, headers=headers, timeout=30)
        if response.status_code >= 400:
            click.echo(f"error on {path}: {response.status_code} {response.text}",
                       err=True)
            sys.exit(1)
        return response.json()

    def get(path, **params):
        response = httpx.get(f"{base}{path}", params=params, timeout=30)
        response.raise_for_status()
        return response.json()

    click.echo("=> creating auction")
    created = post("/auctions", {
        "actor": "auctioneer",
        "asset": asset,
        "accepted_chains": ["coin-a", "coin-b"],
        "rates": {"coin-a": [1, 1], "coin-b": [2, 1]},
        "duration_ms": int(duration * 1000),
    })
    auction_id = created["auction_id"]
    ticket_contract = created["ticket_contract"]
    click.echo(f"   auction id     : {auction_id}")
    click.echo(f"   ticket contract: {ticket_contract}")

    added = post("/auctions/add", {"ticket_contract": ticket_contract})
    click.echo(f"   added to dashboard, status: {added['status']}")

    click.echo(f"=> bidder-1 bids {bid1} on coin-a")
    post(f"/auctions/{auction_id}/bids",
         {"actor": "bidder-1", "chain": "coin-a", "amount": bid1})
    click.echo(f"=> bidder-2 bids {bid2} on coin-b")
    post(f"/auctions/{auction_id}/bids",
         {"actor": "bidder-2", "chain": "coin-b", "amount": bid2})

    click.echo("=> waiting for the end of bidding and the conclusion")
    deadline = time.time() + duration + wait
    view = None
    while time.time() < deadline:
        view = get(f"/auctions/{auction_id}")
        if view["status"] in ("committed", "aborted"):
            break
        time.sleep(1.0)
    if view is None or view["status"] not in ("committed", "aborted"):
        click.echo("error: auction did not conclude in time", err=True)
        sys.exit(1)

    click.echo(f"   status: {view['status']}")
    click.echo("   bids:")
    for row in view["bids"]:
        marker = " *" if row["highest"] else ""
        click.echo(f"     {row['chain']:<8} {row['bidder'][:12]}… "
                   f"amount={row['amount']} normalized="
                   f"{row['normalized'][0]}/{row['normalized'][1]}{marker}")
    owner = get("/chains/ticket-chain/state", nft=asset)["owner"]
    accounts = get("/accounts")
    names = {address: name for name, address in accounts.items()}
    click.echo(f"   {asset} owner: {names.get(owner, owner)}")
    for chain in ("coin-a", "coin-b"):
        response = httpx.get(f"{base}/chains/{chain}/state",
                             params={"account": "auctioneer"}, timeout=30)
        balance = response.json()["balance"] if response.status_code == 200 else 0
        click.echo(f"   auctioneer balance on {chain}: {balance}")
    click.echo("demo complete" if view["status"] == "committed"
               else "demo ended in abort")


if __name__ == "__main__":
    main()
