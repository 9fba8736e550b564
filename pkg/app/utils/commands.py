"""Subcommand registry used by the CLI entry point"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

from app.models.schemas import GapScheme, RunConfig, Scheme
from app.utils.errors import ConfigError


@dataclass
class CommandResult:
    """What a subcommand hands back: a one-line summary, a JSON document and CSV rows"""
    summary: str
    document: Dict[str, Any]
    csv_fields: Sequence[str] = ()
    csv_rows: Iterable[Dict[str, Any]] = field(default_factory=list)


Handler = Callable[[RunConfig], CommandResult]


@dataclass(frozen=True)
class Command:
    name: str
    handler: Handler
    help: str = ""
    requires_system: bool = True


class CommandRouter:
    """Groups subcommand handlers; routers are merged with include_router"""

    def __init__(self, tags: Optional[List[str]] = None):
        self.tags = tags or []
        self.commands: Dict[str, Command] = {}

    def command(self, name: str, help: str = "", requires_system: bool = True):
        def register(handler: Handler) -> Handler:
            if name in self.commands:
                raise ValueError(f"subcommand '{name}' registered twice")
            self.commands[name] = Command(name, handler, help or (handler.__doc__ or "").strip(), requires_system)
            return handler
        return register

    def include_router(self, router: "CommandRouter") -> None:
        for command in router.commands.values():
            self.command(command.name, command.help, command.requires_system)(command.handler)

    def get(self, name: str) -> Command:
        if name not in self.commands:
            raise ConfigError(f"Unknown subcommand '{name}'. Expected one of {', '.join(self.names)}")
        return self.commands[name]

    @property
    def names(self) -> List[str]:
        return list(self.commands)


def measure_schemes(config: RunConfig, strict: bool = True) -> List[Scheme]:
    """Empirical-measure schemes named by --scheme; gap-only names mean both unless strict"""
    name = config.scheme
    if name == "both" or (not strict and name.startswith("weyl-")):
        return [Scheme.ARITHMETIC, Scheme.LOGARITHMIC]
    if name in ("arithmetic", "cesaro"):
        return [Scheme.ARITHMETIC]
    if name in ("logarithmic", "log"):
        return [Scheme.LOGARITHMIC]
    raise ConfigError(f"Scheme '{name}' does not weight empirical measures; use arithmetic, logarithmic or both")


def gap_scheme(config: RunConfig) -> GapScheme:
    """Averaging scheme for pair gaps; 'both' falls back to Cesàro"""
    aliases = {"both": "cesaro", "arithmetic": "cesaro", "log": "logarithmic"}
    return GapScheme(aliases.get(config.scheme, config.scheme))
