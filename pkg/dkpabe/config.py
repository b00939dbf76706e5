'''config.py: Contains the ServiceConfig of the authority key service.

Values come from, in increasing precedence: a JSON file, DKPABE_* environment variables, explicit overrides
(command line flags).
'''

import json
import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Mapping, Optional, Tuple

from .wire import DEFAULT_MAX_FRAME

logger = logging.getLogger(__name__)

DEFAULT_HOME = "~/.dkpabe"
DEFAULT_LISTEN = "0.0.0.0:5000"
DEFAULT_SESSION_TTL = 300.0

PARAMS_FILE = "params.dkab"
PUBLIC_KEY_FILE = "authority.pk.dkab"
SECRET_KEY_FILE = "authority.sk.dkab"
GRANTS_FILE = "grants.json"

_ENV_FIELDS = {
    "DKPABE_PARAMS": "params_path",
    "DKPABE_AUTHORITY_KEY": "public_key_path",
    "DKPABE_AUTHORITY_SECRET": "secret_key_path",
    "DKPABE_GRANTS": "grants_path",
    "DKPABE_LISTEN": "listen",
    "DKPABE_SESSION_TTL": "session_ttl",
    "DKPABE_MAX_FRAME": "max_frame",
}


def dkpabe_home(environ: Optional[Mapping[str, str]] = None) -> Path:
    '''The default key directory: $DKPABE_HOME or ~/.dkpabe.'''
    environ = os.environ if environ is None else environ
    return Path(environ.get("DKPABE_HOME") or DEFAULT_HOME).expanduser()


def default_path(name: str, environ: Optional[Mapping[str, str]] = None) -> str:
    return str(dkpabe_home(environ) / name)


def parse_listen(listen: str) -> Tuple[str, int]:
    '''Splits "host:port"; a bare port listens on every interface.'''
    host, _, port = listen.rpartition(":")
    try:
        number = int(port)
    except ValueError:
        raise ValueError(f"Invalid listen address {listen!r}") from None
    if not 0 < number < 65536:
        raise ValueError(f"Port out of range in {listen!r}")
    return host or "0.0.0.0", number


@dataclass(frozen=True)
class ServiceConfig:
    '''
    A class that holds everything the authority service reads at start-up.

    Attributes:
        params_path:     Global parameters entry.
        public_key_path: This authority's public key entry.
        secret_key_path: This authority's secret key entry.
        grants_path:     JSON grant table.
        listen:          "host:port" for the development server.
        session_ttl:     Seconds an unfinished issuing session is kept.
        max_frame:       Largest accepted WireFrame, in bytes.
    '''
    params_path: str = ""
    public_key_path: str = ""
    secret_key_path: str = ""
    grants_path: str = ""
    listen: str = DEFAULT_LISTEN
    session_ttl: float = DEFAULT_SESSION_TTL
    max_frame: int = DEFAULT_MAX_FRAME

    @staticmethod
    def load(path: Optional[str] = None, environ: Optional[Mapping[str, str]] = None,
             overrides: Optional[Mapping[str, object]] = None) -> "ServiceConfig":
        environ = os.environ if environ is None else environ
        config = ServiceConfig.defaults(environ)

        path = path or environ.get("DKPABE_CONFIG")
        if path:
            with open(path, "r", encoding="utf-8") as handle:
                config = config.merged(json.load(handle))
            logger.info("Configuration read from %s", path)

        config = config.merged({name: environ[key] for key, name in _ENV_FIELDS.items() if environ.get(key)})
        config = config.merged({name: value for name, value in (overrides or {}).items() if value is not None})
        parse_listen(config.listen)
        return config

    @staticmethod
    def defaults(environ: Optional[Mapping[str, str]] = None) -> "ServiceConfig":
        return ServiceConfig(
            params_path=default_path(PARAMS_FILE, environ),
            public_key_path=default_path(PUBLIC_KEY_FILE, environ),
            secret_key_path=default_path(SECRET_KEY_FILE, environ),
            grants_path=default_path(GRANTS_FILE, environ),
        )

    def merged(self, values: Mapping[str, object]) -> "ServiceConfig":
        '''Returns a copy with the known keys of values applied; numeric fields are converted.'''
        known = {item.name: item.type for item in fields(self)}
        changes = {}
        for name, value in values.items():
            if name not in known:
                raise ValueError(f"Unknown configuration key {name!r}")
            if name == "session_ttl":
                value = float(value)
                if value <= 0:
                    raise ValueError("session_ttl must be positive")
            elif name == "max_frame":
                value = int(value)
                if value < 64:
                    raise ValueError("max_frame is too small")
            else:
                value = str(value)
            changes[name] = value
        return replace(self, **changes)

    @property
    def address(self) -> Tuple[str, int]:
        return parse_listen(self.listen)
