from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from core.exception import ConfigError


class Subcommand:
    SAMPLE = 'sample'
    SPECTRUM = 'spectrum'
    LIMIT = 'limit'
    SOLVE = 'solve'
    POTENTIAL = 'potential'
    VERIFY = 'verify'

    CHOICES = (SAMPLE, SPECTRUM, LIMIT, SOLVE, POTENTIAL, VERIFY)


@dataclass(frozen=True)
class CommandInvocation:
    """
    One call of the `lab` command.

    `overrides` holds raw "dotted.key=value" strings; they are applied to a
    copy of the loaded config, never to the file.
    """
    subcommand: str
    config_path: Optional[Path] = None
    out_dir: Optional[Path] = None
    overrides: tuple = ()
    seed: Optional[int] = None
    threads: Optional[int] = None
    ladder: Optional[tuple] = None

    def __post_init__(self):
        if self.subcommand not in Subcommand.CHOICES:
            raise ConfigError(f"Unknown subcommand '{self.subcommand}'; expected one of {', '.join(Subcommand.CHOICES)}.")
        if self.seed is not None and not 0 <= self.seed < 2 ** 64:
            raise ConfigError("--seed must be a 64-bit unsigned integer.")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("--threads must be at least 1.")
        if self.ladder is not None and (not self.ladder or any(n < 2 for n in self.ladder)):
            raise ConfigError("--ladder needs sizes of at least 2.")
