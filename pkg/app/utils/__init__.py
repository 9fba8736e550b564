from .errors import ConfigError, DomainError, ErgodicError, SamplerError, SystemMismatchError
from .summation import KahanSum, compensated_cumsum, compensated_sum
from .number_theory import mobius_table, prime_sieve
from .reports import render_csv, render_json, write_csv, write_json

__all__ = [
    "ErgodicError",
    "DomainError",
    "SystemMismatchError",
    "ConfigError",
    "SamplerError",
    "KahanSum",
    "compensated_cumsum",
    "compensated_sum",
    "mobius_table",
    "prime_sieve",
    "render_csv",
    "render_json",
    "write_csv",
    "write_json",
]
