import rich
from rich.panel import Panel
from rich.table import Table


class VerificationDashboard:
    def __init__(self, console=None):
        self.console = console or rich.get_console()

    def display_report(self, report):
        """Display a verification or realization report in the terminal"""
        status = "[green]VERIFIED[/green]" if report["verified"] else "[red]REJECTED[/red]"
        point = report.get("point", {})
        header = f"[bold]{report['id']}[/bold]\n"
        if point:
            header += f"x = {point['x']}  y = {point['y']}  I = {point['I']}  D = {point['D']}\n"
        if "verification_score" in report:
            header += f"Score: [yellow]{report['verification_score']:.2f}/1.0[/yellow] "
        self.console.print(Panel(header + status, expand=False))

        table = Table(show_header=True, header_style="bold magenta")
        table.add_column("Phase")
        table.add_column("Status")
        table.add_column("Details")

        for phase, result in report["results"].items():
            status = "[green]PASS[/green]" if result.get("passed", False) else "[red]FAIL[/red]"
            table.add_row(phase.upper(), status, self._format_details(result))

        self.console.print(table)

    def _format_details(self, result):
        """Format result details for display"""
        if "skipped" in result:
            return f"[yellow]skipped: {result['skipped']}[/yellow]"
        lines = []
        for name, value in result.items():
            if isinstance(value, dict) and "estimate" in value:
                lines.append(
                    f"{name}: {value['estimate']} ± {value['stderr']} (target {value['target']})"
                )
        if "stages" in result:
            for stage in result["stages"]:
                lines.append(
                    f"V[{stage['level']}]: ancilla {stage['ancilla_dim_in']} -> "
                    f"{stage['ancilla_dim_out']}, residual {stage['isometry_residual']}"
                )
        for key in ("residual", "recomposition_residual", "max_deviation", "constraint_residual"):
            if key in result:
                lines.append(f"{key}: {result[key]}")
        return "\n".join(lines) if lines else "No details available"

    def display_curve(self, points, limit=11):
        """Display an evenly thinned sample of curve points"""
        table = Table(show_header=True, header_style="bold magenta", title=f"d = {points[0].d}")
        for column in ("I", "D", "x", "y", "F", "G"):
            table.add_column(column, justify="right")
        step = max(1, (len(points) - 1) // (limit - 1))
        shown = points[::step]
        if shown[-1] is not points[-1]:
            shown.append(points[-1])
        for point in shown:
            table.add_row(*(f"{getattr(point, c):.6f}" for c in ("I", "D", "x", "y", "F", "G")))
        self.console.print(table)

    def display_trajectories(self, trajectories):
        rate = len(trajectories) / sum(t.proposals for t in trajectories)
        mean_gain = sum(t.gain for t in trajectories) / len(trajectories)
        mean_fidelity = sum(t.conditional_fidelity for t in trajectories) / len(trajectories)
        self.console.print(Panel(
            f"[bold]{len(trajectories)} trajectories[/bold]\n"
            f"acceptance rate: [yellow]{rate:.4f}[/yellow]\n"
            f"mean gain: [yellow]{mean_gain:.6f}[/yellow]\n"
            f"mean conditional fidelity: [yellow]{mean_fidelity:.6f}[/yellow]",
            expand=False,
        ))
