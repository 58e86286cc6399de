#!/usr/bin/env python3
"""
Demo mode for cosmos - a generated week of phone use against a synthetic user
"""

import os
import sys

# Add project directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from src.config import CosmosConfig, setup_logging
from src.harness import battery_table, relevance_table, run_sessions
from src.scenario import demo_user, demo_zones, generate_scenario
from src.server import ServerParams

NOISE_LEVELS = (0.0, 0.1, 0.2)


def show_zones(console: Console) -> None:
    table = Table(title="Zones")
    table.add_column("Zone", style="bold")
    table.add_column("Center")
    table.add_column("Radius (m)", justify="right")
    table.add_column("Wi-Fi")
    for zone in demo_zones():
        table.add_row(zone.id, f"{zone.center_lat:.4f}, {zone.center_lon:.4f}", f"{zone.radius_m:.0f}",
                      ", ".join(sorted(zone.wifi_ids)) or "-")
    console.print(table)


def run_demo(console: Console, seed: int = 7, ticks: int = 240, sessions: int = 5) -> None:
    console.print(Panel.fit(
        "[bold blue]COSMOS demo[/bold blue]\n"
        f"{ticks} hourly ticks per session with a draining battery, {sessions} sessions per noise level",
        border_style="blue",
    ))
    show_zones(console)

    params = ServerParams.from_config(CosmosConfig())
    for noise in NOISE_LEVELS:
        user = demo_user(noise)
        script = generate_scenario(seed, ticks, user, drain=True)
        summary = run_sessions(script, sessions, user, params=params)
        console.print(f"\n[bold]User noise {noise:.0%}[/bold]")
        if summary.relevance.sessions:
            console.print(relevance_table(summary.relevance))
        else:
            console.print("[yellow]No suggestions: the server stayed in training[/yellow]")
        console.print(battery_table(summary.battery, title="Simulated battery hours"))

        crisis = sum(1 for run in summary.runs for row in run.trace if row.crisis == "YES" and row.suggested is not None)
        console.print(f"{crisis} suggestions were made under the low-battery override")


def main():
    """Main entry point"""
    console = Console()
    setup_logging(CosmosConfig.from_env().log_level)
    try:
        run_demo(console)
    except KeyboardInterrupt:
        console.print("\n[yellow]Goodbye![/yellow]")


if __name__ == "__main__":
    main()
