"""
Geodesic Lab - Rich CLI Utilities

This module provides the console components used by the geodesic_lab runner:
banner, phase headers, step status lines, error panels and result tables.
"""

from contextlib import nullcontext
from typing import Any, Dict, List, Optional, Sequence

from rich.align import Align
from rich.console import Console
from rich.markdown import Markdown
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn
from rich.table import Table

console = Console()

STATUS_ICONS = {
    "pending": ("⏳", "yellow"),
    "in_progress": ("🔄", "blue"),
    "completed": ("✅", "green"),
    "failed": ("❌", "red"),
}


class LabCLI:
    """Rich CLI interface for Geodesic Lab runs"""

    def __init__(self, quiet: bool = False, target: Optional[Console] = None):
        self.console = target or console
        self.quiet = quiet

    def print_banner(self, command: str):
        """Display the Geodesic Lab banner"""
        if self.quiet:
            return
        banner_text = f"""
# 🌀 GEODESIC LAB
## `{command}`

*Closed geodesics of SL2(Z[i]) through Hurwitz continued fractions:*
- **Markov partition** and its subshift of finite type
- **Growth exponent** delta_R from the pressure equation
- **Congruence and character sums** over Z[i]/(q)
- **Sieve ledger** and square-free discriminant harvest
        """
        banner_panel = Panel(
            Markdown(banner_text),
            title="[bold cyan]Geodesic Lab[/bold cyan]",
            border_style="cyan",
            padding=(1, 2),
        )
        self.console.print()
        self.console.print(Align.center(banner_panel))
        self.console.print()

    def print_phase_header(self, phase_num: int, phase_name: str, description: str):
        """Display a phase header"""
        if self.quiet:
            return
        phase_panel = Panel(
            f"[bold white]{description}[/bold white]",
            title=f"[bold yellow]Phase {phase_num}: {phase_name}[/bold yellow]",
            border_style="yellow",
            padding=(0, 1),
        )
        self.console.print()
        self.console.print(phase_panel)
        self.console.print()

    def print_step(self, step_num: int, description: str, status: str = "pending"):
        """Print a step with status indicator"""
        if self.quiet:
            return
        icon, color = STATUS_ICONS.get(status, ("📋", "white"))
        self.console.print(f"{icon} [bold {color}]Step {step_num}:[/bold {color}] {description}")

    def print_file(self, path: str, digest: str):
        if self.quiet:
            return
        self.console.print(f"[green]📁 {path}[/green]")
        self.console.print(f"   [blue]sha256:[/blue] {digest}")

    def print_table(self, title: str, columns: Sequence[str], rows: List[Sequence[Any]]):
        """Display a result table"""
        if self.quiet:
            return
        table = Table(title=f"[bold cyan]{title}[/bold cyan]", show_header=True, header_style="bold magenta")
        for column in columns:
            table.add_column(column, style="white")
        for row in rows:
            table.add_row(*(str(v) for v in row))
        self.console.print(table)
        self.console.print()

    def print_summary_table(self, command: str, summary_data: Dict[str, Dict[str, Any]]):
        """Display the final summary; shown even in quiet mode"""
        table = Table(
            title=f"[bold cyan]🎉 geodesic_lab {command} finished[/bold cyan]",
            show_header=True,
            header_style="bold magenta",
        )
        table.add_column("Phase", style="cyan", width=22)
        table.add_column("Status", style="green", width=12)
        table.add_column("Details", style="white", width=60)
        for phase, data in summary_data.items():
            if data.get("success"):
                table.add_row(phase, "✅ Success", data.get("details", "Completed"))
            else:
                table.add_row(phase, "❌ Failed", data.get("error", "Unknown error"))
        self.console.print()
        self.console.print(table)
        self.console.print()

    def print_error(self, message: str, details: Optional[str] = None):
        """Display an error message"""
        error_text = f"[bold red]❌ Error:[/bold red] {message}"
        if details:
            error_text += f"\n[dim]{details}[/dim]"
        self.console.print(Panel(error_text, border_style="red", padding=(0, 1)))
        self.console.print()

    def print_warning(self, message: str):
        """Display a warning message"""
        if self.quiet:
            return
        self.console.print(f"[bold yellow]⚠️  Warning:[/bold yellow] {message}")
        self.console.print()

    def print_info(self, message: str):
        """Display an info message"""
        if self.quiet:
            return
        self.console.print(f"[blue]ℹ️  Info:[/blue] {message}")
        self.console.print()

    def create_progress_bar(self) -> Progress:
        """Create a progress bar for long-running operations"""
        return Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TaskProgressColumn(),
            console=self.console,
            disable=self.quiet,
        )

    def status(self, message: str):
        if self.quiet:
            return nullcontext()
        return self.console.status(f"[bold blue]{message}...")
