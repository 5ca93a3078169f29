"""Assembly of one running system.

A node is a store plus every service built over it, sharing one lock and
one clock. Construction order matters: the services attach their log
listeners first, then the store folds the on-disk log, so replayed
history and live appends drive the same derived-state code.
"""

import os
import threading
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Mapping

from .analytics import AnalyticsService
from .federation import FederationService
from .search import SearchService
from .sessions import ProfileSynthesizer
from .store import Store

DEFAULT_LISTEN = "127.0.0.1:8797"


@dataclass(frozen=True)
class NodeConfig:
    data_dir: str | None = None
    system_id: str = "local"
    annotation_weight: Fraction = Fraction(1)
    session_timeout: int = 3600
    listen: str = DEFAULT_LISTEN
    ui_origin: str = "*"


_ENV_FIELDS: dict[str, tuple[str, Callable[[str], Any]]] = {
    "data_dir": ("ANNEX_DATA_DIR", str),
    "system_id": ("ANNEX_SYSTEM_ID", str),
    "annotation_weight": ("ANNEX_ANNOTATION_WEIGHT", Fraction),
    "session_timeout": ("ANNEX_SESSION_TIMEOUT", int),
    "listen": ("ANNEX_LISTEN", str),
    "ui_origin": ("ANNEX_UI_ORIGIN", str),
}


def resolve_config(environ: Mapping[str, str] | None = None,
                   **flags: Any) -> NodeConfig:
    """Fold flags, environment variables, and defaults into a config.

    An explicitly passed flag wins; a flag of None counts as absent and
    falls through to the matching ANNEX_* variable, then to the default.
    String flag values go through the same parser as the environment so
    "1/2" works for the annotation weight either way.
    """
    env = os.environ if environ is None else environ
    values: dict[str, Any] = {}
    for name, (env_key, parse) in _ENV_FIELDS.items():
        flag = flags.get(name)
        if flag is not None:
            values[name] = parse(flag) if isinstance(flag, str) else flag
        elif env_key in env:
            values[name] = parse(env[env_key])
    unknown = set(flags) - set(_ENV_FIELDS)
    if unknown:
        raise TypeError(f"unknown config flags: {sorted(unknown)}")
    return NodeConfig(**values)


def split_listen(listen: str) -> tuple[str, int]:
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"listen address {listen!r} is not host:port")
    return host, int(port)


class Node:
    """One system's store and services, ready for the portal or the CLI."""

    def __init__(self, config: NodeConfig | None = None, *,
                 clock: Callable[[], int] | None = None,
                 transport: Any | None = None,
                 fsync: bool = True):
        self.config = config or NodeConfig()
        self._clock = clock or (lambda: int(time.time()))
        lock = threading.RLock()
        self.store = Store(self.config.data_dir, clock=self._clock,
                           lock=lock, fsync=fsync)
        self.search = SearchService(
            self.store, annotation_weight=self.config.annotation_weight)
        self.synthesizer = ProfileSynthesizer(
            self.store, idle_timeout=self.config.session_timeout)
        self.federation = FederationService(
            self.store, self.config.system_id, transport=transport)
        self.analytics = AnalyticsService(self.store)
        self.store.load()

    def now(self) -> int:
        return self._clock()
