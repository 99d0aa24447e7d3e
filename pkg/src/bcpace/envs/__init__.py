"""Benchmark BAMDPs and the name-based factory."""

from ..errors import InvalidParams, UnknownEnvironment
from .chain import make_chain
from .finite import FiniteLatentMdp
from .lightdark import LightDarkTiger, make_lightdark
from .tiger import make_tiger

REGISTRY = {
    "tiger": make_tiger,
    "chain": make_chain,
    "lightdark": make_lightdark,
}


def make_env(name, params=None):
    """Build a registered environment from a parameter mapping."""
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise UnknownEnvironment(f"unknown environment {name!r}; known: {sorted(REGISTRY)}") from None
    try:
        return factory(**dict(params or {}))
    except TypeError as exc:
        raise InvalidParams(f"bad parameters for {name}: {exc}") from None


__all__ = [
    "FiniteLatentMdp",
    "LightDarkTiger",
    "make_chain",
    "make_env",
    "make_lightdark",
    "make_tiger",
    "REGISTRY",
]
