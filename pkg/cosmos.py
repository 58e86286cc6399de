#!/usr/bin/env python3
"""
cosmos - context-sensitive configuration for smartphones
"""

import argparse
import os
import sys
from typing import List, Optional

from rich.console import Console
from rich.table import Table

# Add project directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.config import CosmosConfig, setup_logging
from src.context import TimeWindow
from src.dtree import TreeParams, accuracy, classify, load_tree, parse_row, read_dataset, save_tree, train
from src.errors import ConfigError, CosmosError, UsageError
from src.harness import (
    aggregate_battery,
    aggregate_relevance,
    battery_table,
    read_battery_table,
    read_relevance_table,
    relevance_table,
    run_sessions,
    write_report,
    write_trace,
)
from src.protocol import parse_context_xml
from src.scenario import demo_user, format_scenario, generate_scenario, load_scenario, load_user
from src.server import CosmosServer, ServerParams
from src.settings import SETTING_NAMES, format_profile, load_critical
from src.transport import get_channel, serve

console = Console()

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def cmd_simulate(args, config: CosmosConfig) -> int:
    user = load_user(args.user) if args.user else None
    if args.scenario:
        script = load_scenario(args.scenario, seed=args.seed)
    else:
        user = user or demo_user()
        script = generate_scenario(args.seed or 0, args.ticks, user, drain=args.drain,
                                   window=TimeWindow(config.window_seconds), threshold_pct=config.battery_threshold)

    summary = run_sessions(
        script,
        args.sessions,
        user,
        params=ServerParams.from_config(config),
        window=TimeWindow(config.window_seconds),
        critical=load_critical(config.critical_file),
        sms=args.sms,
    )
    last = summary.runs[-1]
    console.print(f"[blue]{len(script.ticks)} ticks x {args.sessions} session(s); "
                  f"final phase {last.final_phase.value}[/blue]")
    if summary.relevance.sessions:
        console.print(relevance_table(summary.relevance))
    else:
        console.print("[yellow]The server never left training: no suggestions to score[/yellow]")
    console.print(battery_table(summary.battery, title="Simulated battery hours"))

    if args.report:
        write_report(args.report, summary)
        console.print(f"[green]✓ Report written to {args.report}[/green]")
    if args.trace:
        write_trace(args.trace, last.trace)
        console.print(f"[green]✓ Trace written to {args.trace}[/green]")
    return EXIT_OK


def cmd_train(args, config: CosmosConfig) -> int:
    data = read_dataset(args.data, label=args.label)
    params = TreeParams(min_leaf=config.min_leaf, max_depth=config.max_depth, prune=config.prune)
    tree = train(data, params)
    save_tree(tree, args.out)
    console.print(
        f"[green]✓ Trained on {len(data.rows)} rows: depth {tree.depth()}, {tree.leaf_count()} leaves, "
        f"training accuracy {accuracy(tree, data.rows):.3f}[/green]"
    )
    console.print(f"Model saved to {args.out}")
    return EXIT_OK


def cmd_classify(args, config: CosmosConfig) -> int:
    tree = load_tree(args.model)
    label, purity = classify(tree, parse_row(args.row, tree.schema))
    console.print(f"[bold]{label}[/bold] (purity {purity:.3f})")
    return EXIT_OK


def cmd_serve(args, config: CosmosConfig) -> int:
    server = CosmosServer.from_config(config, store_path=args.store)
    path = args.socket or config.socket_path
    console.print(f"[blue]COSMOS server on {path}: {len(server.store)} stored observations, "
                  f"phase {server.phase.value}[/blue]")
    try:
        serve(server, path)
    except KeyboardInterrupt:
        console.print("\n[yellow]Stopped[/yellow]")
    return EXIT_OK


def cmd_evaluate(args, config: CosmosConfig) -> int:
    if not args.table1 and not args.table2:
        raise UsageError("give --table1 and/or --table2")
    if args.table1:
        console.print(battery_table(aggregate_battery(read_battery_table(args.table1)), title="Battery utilization"))
    if args.table2:
        console.print(relevance_table(aggregate_relevance(read_relevance_table(args.table2))))
    return EXIT_OK


def cmd_send_context(args, config: CosmosConfig) -> int:
    with open(args.xml, "rb") as f:
        upload = parse_context_xml(f.read())
    channel = get_channel("socket", path=args.socket or config.socket_path)
    doc = channel.send_context(upload, sms=args.sms)

    table = Table(title=f"Settings ({doc.status.value}, sequence {doc.sequence})")
    table.add_column("Setting", style="bold")
    table.add_column("Value")
    for name in SETTING_NAMES:
        table.add_row(name, doc.profile.label(name))
    console.print(table)
    return EXIT_OK


def cmd_generate(args, config: CosmosConfig) -> int:
    user = load_user(args.user) if args.user else demo_user()
    script = generate_scenario(args.seed, args.ticks, user, drain=args.drain,
                               window=TimeWindow(config.window_seconds), threshold_pct=config.battery_threshold)
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_scenario(script))
    console.print(f"[green]✓ Wrote {len(script.ticks)} ticks to {args.out}[/green]")
    truths = {format_profile(tick.ground_truth) for tick in script.ticks}
    console.print(f"{len(truths)} distinct ground-truth profiles")
    return EXIT_OK


def cmd_demo(args, config: CosmosConfig) -> int:
    from demo import run_demo
    run_demo(console, seed=args.seed, ticks=args.ticks, sessions=args.sessions)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="cosmos - context-sensitive smartphone configuration")
    parser.add_argument("--log-level", help="Logging level (default: COSMOS_LOG_LEVEL or WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Replay a scenario against an in-process server")
    p.add_argument("--scenario", help="Scenario file (default: a generated day-cycle)")
    p.add_argument("--user", help="User model file; without one the scenario's ground truth is used")
    p.add_argument("--seed", type=int, help="Seed override")
    p.add_argument("--sessions", type=int, default=1, help="Number of sessions (default: 1)")
    p.add_argument("--ticks", type=int, default=200, help="Ticks to generate without --scenario (default: 200)")
    p.add_argument("--drain", action="store_true", help="Generated scenario drains the battery during the day")
    p.add_argument("--sms", action="store_true", help="Use the SMS encoding instead of XML")
    p.add_argument("--report", help="Write the session report CSV here")
    p.add_argument("--trace", help="Write the last session's trace CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="Train a decision tree from a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="Model file (JSON)")
    p.add_argument("--label", help="Label column, when the dataset has several")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="Classify one row with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--row", required=True, help="Attribute values, comma separated")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("serve", help="Run the COSMOS server on a Unix socket")
    p.add_argument("--socket", help="Socket path (default: COSMOS_SOCKET)")
    p.add_argument("--store", help="Observation store file (default: COSMOS_STORE)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("evaluate", help="Aggregate battery and relevance tables")
    p.add_argument("--table1", help="CSV of session,normal_hours,cosmos_hours")
    p.add_argument("--table2", help="CSV of session,crs,prs,cis")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("send-context", help="Send a context upload to a running server")
    p.add_argument("--socket", help="Socket path (default: COSMOS_SOCKET)")
    p.add_argument("--xml", required=True, help="Context upload XML file")
    p.add_argument("--sms", action="store_true", help="Send it in the SMS encoding")
    p.set_defaults(func=cmd_send_context)

    p = sub.add_parser("generate", help="Write a generated scenario file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ticks", type=int, default=200)
    p.add_argument("--user", help="User model file (default: the demo user)")
    p.add_argument("--drain", action="store_true", help="Drain the battery during the day")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("demo", help="Run the demo sessions")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--ticks", type=int, default=240)
    p.add_argument("--sessions", type=int, default=5)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    try:
        config = CosmosConfig.from_env(log_level=args.log_level)
        setup_logging(config.log_level)
        return args.func(args, config)
    except (UsageError, ConfigError) as e:
        console.print(f"[red]Error: {e}[/red]")
        return EXIT_USAGE
    except (CosmosError, OSError) as e:
        console.print(f"[red]Error: {e}[/red]")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
