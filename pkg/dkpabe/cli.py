'''cli.py: Contains the dkpabe command line tool.

Exit codes: 0 success, 2 usage, 3 cryptographic or verification failure, 4 I/O or format error.
'''

import argparse
import json
import logging
import os
import sys
from collections import defaultdict
from pathlib import Path

from . import __version__
from .access import AccessTree, format_policy, parse_policy
from .bench import DEFAULT_SCENARIOS, Scenario, bench_report, render_json_lines, render_table
from .client import HttpTransport, fetch_params, fetch_public_key, request_share
from .config import (GRANTS_FILE, PARAMS_FILE, ServiceConfig, default_path, dkpabe_home)
from .encoding import Role, inspect_entry, load_entity, save_entity
from .errors import CryptoError, FormatError, PolicySyntaxError, UnsupportedParameters
from .groups import Backend
from .hybrid import decrypt_file, encrypt_stream
from .issuing import GrantTable, create_pseudonym
from .kpabe import attribute_namer, authority_setup, global_setup, policy_resolver
from .twopc import generate_keypair

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CRYPTO = 3
EXIT_IO = 4

AUTHORITY_PREFIX = "authority"


def _params_path(args) -> str:
    return args.params or default_path(PARAMS_FILE)


def _load_params(args):
    return load_entity(_params_path(args), Role.GLOBAL_PARAMS)


def _load_public_keys(paths, params):
    return [load_entity(path, Role.AUTHORITY_PK, params) for path in paths]


def _ensure_parent(path):
    Path(path).expanduser().resolve().parent.mkdir(parents=True, exist_ok=True)


def parse_attributes(text: str, pks):
    '''"k:name,k:name" -> authority id -> attribute set.'''
    resolve = policy_resolver(pks)
    sets = defaultdict(set)
    for item in filter(None, (part.strip() for part in text.split(","))):
        authority, separator, attribute = item.partition(":")
        if not separator:
            raise PolicySyntaxError(f"Attribute {item!r} is not of the form authority:attribute")
        resolved = resolve(authority, attribute)
        sets[resolved.authority].add(resolved)
    if not sets:
        raise PolicySyntaxError("No attributes given")
    return dict(sets)


# commands

def cmd_setup_global(args) -> int:
    params = global_setup(args.backend, order=args.order)
    out = args.out or default_path(PARAMS_FILE)
    _ensure_parent(out)
    save_entity(out, params, params)
    print(f"Global parameters ({params.backend.value}, {params.order.bit_length()}-bit order) written to {out}")
    return EXIT_OK


def cmd_authority_init(args) -> int:
    params = _load_params(args)
    names = [name.strip() for name in args.names.split(",")] if args.names else None
    count = len(names) if names else args.attributes
    if not count:
        raise UnsupportedParameters("Give --attributes or --names")
    pk, sk = authority_setup(params, args.id, count, attribute_names=names, name=args.name or "")
    prefix = args.out or str(dkpabe_home() / AUTHORITY_PREFIX)
    _ensure_parent(prefix)
    save_entity(f"{prefix}.pk.dkab", params, pk)
    save_entity(f"{prefix}.sk.dkab", params, sk)
    os.chmod(f"{prefix}.sk.dkab", 0o600)
    print(f"Authority {pk.label} (id {pk.authority_id}, {count} attributes): {prefix}.pk.dkab, {prefix}.sk.dkab")
    return EXIT_OK


def cmd_authority_serve(args) -> int:
    overrides = {
        "params_path": args.params,
        "public_key_path": args.authority_key,
        "secret_key_path": args.authority_secret,
        "grants_path": args.grants,
        "listen": args.serve,
        "session_ttl": args.session_ttl,
    }
    config = ServiceConfig.load(args.config, overrides=overrides)
    try:
        from authority_service import create_app
    except ImportError:
        raise UnsupportedParameters("authority_service.py must be importable (run from the repository root)") from None
    host, port = config.address
    logger.info("Serving authority on %s:%d", host, port)
    create_app(config).run(host=host, port=port, debug=False, threaded=True)
    return EXIT_OK


def cmd_pseudonym(args) -> int:
    params = _load_params(args)
    pseudonym = create_pseudonym(params, args.gid.encode("utf-8"))
    _ensure_parent(args.out)
    save_entity(args.out, params, pseudonym)
    os.chmod(args.out, 0o600)
    print(pseudonym.fingerprint())
    return EXIT_OK


def cmd_grant(args) -> int:
    params = _load_params(args)
    pk = load_entity(args.authority_key, Role.AUTHORITY_PK, params)
    if args.pseudonym:
        fingerprint = load_entity(args.pseudonym, Role.PSEUDONYM, params).fingerprint()
    elif args.fingerprint:
        fingerprint = args.fingerprint.lower()
    else:
        raise UnsupportedParameters("Give --pseudonym or --fingerprint")

    if args.policy:
        tree = parse_policy(args.policy, policy_resolver([pk]))
    elif args.attrs:
        sets = parse_attributes(args.attrs, [pk])
        tree = AccessTree.threshold_tree(sorted(sets[pk.authority_id]), args.threshold or len(sets[pk.authority_id]))
    else:
        raise UnsupportedParameters("Give --policy or --attrs")
    if tree.authorities() != {pk.authority_id}:
        raise PolicySyntaxError(f"A grant may only use attributes of authority {pk.label}")

    path = args.grants or default_path(GRANTS_FILE)
    grants = GrantTable.load(path)
    grant = grants.add(fingerprint, tree, format_policy(tree, attribute_namer([pk])))
    _ensure_parent(path)
    grants.save(path)
    print(f"Granted {grant.policy} to {fingerprint[:16]} ({len(grants)} grants in {path})")
    return EXIT_OK


def cmd_request_keys(args) -> int:
    transport = HttpTransport(args.serve)
    params = _load_params(args) if args.params or os.path.exists(_params_path(args)) else fetch_params(transport)
    if args.authority_key:
        pk = load_entity(args.authority_key, Role.AUTHORITY_PK, params)
        if pk != fetch_public_key(transport, params):
            raise CryptoError(f"Service at {args.serve} does not hold the public key of authority {pk.label}")
    else:
        pk = fetch_public_key(transport, params)
    pseudonym = load_entity(args.pseudonym, Role.PSEUDONYM, params) if args.pseudonym else None
    keypair = generate_keypair(params.order, args.paillier_bits)
    share = request_share(params, pk, args.gid.encode("utf-8"), transport, pseudonym=pseudonym,
                          keypair=keypair, self_test=args.self_test)
    _ensure_parent(args.out)
    save_entity(args.out, params, share)
    os.chmod(args.out, 0o600)
    print(f"Key share of authority {pk.label} for {len(share.Dj)} attributes written to {args.out}")
    return EXIT_OK


def cmd_encrypt(args) -> int:
    params = _load_params(args)
    pks = _load_public_keys(args.authority_key, params)
    attr_sets = parse_attributes(args.attrs, pks)
    _ensure_parent(args.out)
    with open(args.input, "rb") as reader, open(args.out, "wb") as writer:
        ciphertext = encrypt_stream(params, pks, attr_sets, reader, writer, label=args.label.encode("utf-8"))
    print(f"Encrypted {args.input} for authorities {list(ciphertext.authorities)} into {args.out}")
    return EXIT_OK


def cmd_decrypt(args) -> int:
    params = _load_params(args)
    shares = [load_entity(path, Role.USER_SHARE, params) for path in args.share]
    _ensure_parent(args.out)
    partial = args.out + ".partial"
    try:
        with open(partial, "wb") as writer:
            written = decrypt_file(params, shares, args.input, writer)
        os.replace(partial, args.out)
    finally:
        if os.path.exists(partial):
            os.remove(partial)
    print(f"Decrypted {written} bytes into {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    scenarios = [Scenario.parse(text) for text in args.scenario] if args.scenario else list(DEFAULT_SCENARIOS)
    rows = bench_report(scenarios, args.backend, order=args.order)
    print(render_json_lines(rows) if args.format == "json" else render_table(rows))
    return EXIT_OK


def cmd_inspect(args) -> int:
    with open(args.file, "rb") as handle:
        fields = inspect_entry(handle.read())
    if args.json:
        print(json.dumps(fields, sort_keys=True))
    else:
        for key, value in fields.items():
            print(f"{key:>14}: {value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dkpabe", description="Decentralized multi-authority KP-ABE toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def with_params(command):
        command.add_argument("--params", help=f"global parameters (default $DKPABE_HOME/{PARAMS_FILE})")
        return command

    command = sub.add_parser("setup-global", help="create the global parameters")
    command.add_argument("--backend", choices=[backend.value for backend in Backend], default=Backend.CURVE.value)
    command.add_argument("--order", type=int, help="prime order of the transparent backend")
    command.add_argument("--out")
    command.set_defaults(handler=cmd_setup_global)

    command = with_params(sub.add_parser("authority-init", help="create the keys of one authority"))
    command.add_argument("--id", type=int, required=True)
    command.add_argument("--attributes", type=int, help="number of attributes")
    command.add_argument("--names", help="comma separated attribute names")
    command.add_argument("--name", help="authority name used in policies")
    command.add_argument("--out", help="path prefix; writes <out>.pk.dkab and <out>.sk.dkab")
    command.set_defaults(handler=cmd_authority_init)

    command = with_params(sub.add_parser("authority-serve", help="run the authority key service"))
    command.add_argument("--config")
    command.add_argument("--authority-key")
    command.add_argument("--authority-secret")
    command.add_argument("--grants")
    command.add_argument("--serve", help="listen address host:port")
    command.add_argument("--session-ttl", type=float)
    command.set_defaults(handler=cmd_authority_serve)

    command = with_params(sub.add_parser("pseudonym", help="create a pseudonym for one authority"))
    command.add_argument("--gid", required=True)
    command.add_argument("--out", required=True)
    command.set_defaults(handler=cmd_pseudonym)

    command = with_params(sub.add_parser("grant", help="grant an access tree to a pseudonym"))
    command.add_argument("--authority-key", required=True)
    command.add_argument("--grants")
    command.add_argument("--pseudonym", help="pseudonym entry")
    command.add_argument("--fingerprint", help="pseudonym fingerprint")
    command.add_argument("--policy")
    command.add_argument("--attrs", help="k:name,... combined by --threshold")
    command.add_argument("--threshold", type=int)
    command.set_defaults(handler=cmd_grant)

    command = with_params(sub.add_parser("request-keys", help="obtain a key share blindly from a service"))
    command.add_argument("--serve", required=True, help="service address host:port or URL")
    command.add_argument("--authority-key")
    command.add_argument("--gid", required=True)
    command.add_argument("--pseudonym")
    command.add_argument("--paillier-bits", type=int)
    command.add_argument("--self-test", action="store_true")
    command.add_argument("--out", required=True)
    command.set_defaults(handler=cmd_request_keys)

    command = with_params(sub.add_parser("encrypt", help="encrypt a file"))
    command.add_argument("--authority-key", action="append", required=True)
    command.add_argument("--attrs", required=True)
    command.add_argument("--label", default="")
    command.add_argument("--in", dest="input", required=True)
    command.add_argument("--out", required=True)
    command.set_defaults(handler=cmd_encrypt)

    command = with_params(sub.add_parser("decrypt", help="decrypt a file"))
    command.add_argument("--share", action="append", required=True)
    command.add_argument("--in", dest="input", required=True)
    command.add_argument("--out", required=True)
    command.set_defaults(handler=cmd_decrypt)

    command = sub.add_parser("bench", help="operation counts against the closed-form costs")
    command.add_argument("--backend", choices=[backend.value for backend in Backend],
                         default=Backend.TRANSPARENT.value)
    command.add_argument("--order", type=int)
    command.add_argument("--scenario", action="append", help="N,n[,depth]")
    command.add_argument("--format", choices=("table", "json"), default="table")
    command.set_defaults(handler=cmd_bench)

    command = sub.add_parser("inspect", help="show the header of a key store entry")
    command.add_argument("file")
    command.add_argument("--json", action="store_true")
    command.set_defaults(handler=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except CryptoError as error:
        print(f"error: {type(error).__name__}: {error}", file=sys.stderr)
        return EXIT_CRYPTO
    except (UnsupportedParameters, PolicySyntaxError, ValueError) as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError) as error:
        print(f"error: {type(error).__name__}: {error}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
