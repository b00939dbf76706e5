'''bench.py: Contains the operation-count benchmark: measured group operations of every sub-algorithm next to
the closed-form costs of the scheme.

Closed forms, for N authorities with n attributes each:
    authority setup   (nN + 2N) exponentiations
    key generation    (4N + nN) exponentiations, 2N multiplications
    encryption        (2N - 1) multiplications, (1 + 2N + nN) exponentiations
    decryption        (2N + nN) pairings; the shorter 1 + N + nN form only holds at N = 1
    ciphertext        (1 + N + nN) source elements + 1 target element; the shorter (2 + nN) form only holds at N = 1
'''

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

from tabulate import tabulate

from .access import AccessTree, Node, and_gate, leaf
from .encoding import encode_ciphertext
from .groups import Backend, default_rng
from .kpabe import authority_setup, decrypt, encrypt, global_setup, keygen, random_message

logger = logging.getLogger(__name__)

_BUCKETS = ("multiplications", "exponentiations", "pairings")


@dataclass(frozen=True)
class Scenario:
    '''N authorities, n attributes each, key trees of the given depth.'''
    authorities: int
    attributes: int
    depth: int = 1

    def __post_init__(self):
        if self.authorities < 1 or self.attributes < 1:
            raise ValueError("A scenario needs at least one authority and one attribute")
        if not 1 <= self.depth <= self.attributes:
            raise ValueError(f"Depth must lie in [1, {self.attributes}]")

    @staticmethod
    def parse(text: str) -> "Scenario":
        '''"N,n" or "N,n,depth".'''
        try:
            values = [int(part) for part in text.split(",")]
        except ValueError:
            raise ValueError(f"Invalid scenario {text!r}") from None
        if len(values) not in (2, 3):
            raise ValueError(f"Invalid scenario {text!r}, expected N,n[,depth]")
        return Scenario(*values)


DEFAULT_SCENARIOS = (Scenario(1, 4), Scenario(2, 3), Scenario(3, 3, 2))


@dataclass(frozen=True)
class BenchRow:
    algorithm: str
    scenario: Scenario
    measured: Dict[str, int]
    expected: Dict[str, int]
    formula: str
    note: str = ""
    extra: Dict[str, int] = field(default_factory=dict)

    @property
    def matches(self) -> bool:
        return all(self.measured.get(key) == value for key, value in self.expected.items())

    def as_dict(self) -> Dict[str, object]:
        return {
            "algorithm": self.algorithm,
            "N": self.scenario.authorities,
            "n": self.scenario.attributes,
            "depth": self.scenario.depth,
            "measured": dict(self.measured),
            "expected": dict(self.expected),
            "formula": self.formula,
            "matches": self.matches,
            "note": self.note,
            **self.extra,
        }


def chain_tree(attributes, depth: int) -> AccessTree:
    '''An AND over every attribute, nested depth levels deep, so decryption uses every leaf.'''
    attributes = list(attributes)

    def build(items, level) -> Node:
        if level == 1 or len(items) == 1:
            return leaf(items[0]) if len(items) == 1 else and_gate(*(leaf(item) for item in items))
        return and_gate(leaf(items[0]), build(items[1:], level - 1))

    return AccessTree(build(attributes, depth))


def _as_dict(counts) -> Dict[str, int]:
    return {bucket: getattr(counts, bucket) for bucket in _BUCKETS}


def run_scenario(params, scenario: Scenario, rng=None) -> List[BenchRow]:
    '''Runs every sub-algorithm once for the scenario and returns one row per measurement.'''
    rng = rng or default_rng()
    ctx = params.ctx
    N, n = scenario.authorities, scenario.attributes
    rows = []

    with ctx.counting() as setup:
        keys = [authority_setup(params, k, n, rng) for k in range(1, N + 1)]
    rows.append(BenchRow("authority_setup", scenario, _as_dict(setup.counts),
                         {"exponentiations": n * N + 2 * N, "multiplications": 0, "pairings": 0},
                         "(nN+2N)C_e"))

    u = ctx.hash_to_scalar(b"bench-user")
    trees = {pk.authority_id: chain_tree(sorted(pk.universe()), scenario.depth) for pk, _ in keys}
    with ctx.counting() as generation:
        shares = [keygen(params, sk, u, trees[sk.authority_id], rng) for _, sk in keys]
    rows.append(BenchRow("keygen", scenario, _as_dict(generation.counts),
                         {"exponentiations": 4 * N + n * N, "multiplications": 2 * N, "pairings": 0},
                         "(4N+nN)C_e + 2N C_m"))

    pks = [pk for pk, _ in keys]
    m = random_message(params, rng)
    attr_sets = {pk.authority_id: pk.universe() for pk in pks}
    with ctx.counting() as encryption:
        ciphertext = encrypt(params, pks, attr_sets, m, rng)
    rows.append(BenchRow("encrypt", scenario, _as_dict(encryption.counts),
                         {"multiplications": 2 * N - 1, "exponentiations": 1 + 2 * N + n * N, "pairings": 0},
                         "(2N-1)C_m + (1+2N+nN)C_e"))

    with ctx.counting() as decryption:
        recovered = decrypt(params, shares, ciphertext)
    if recovered != m:
        raise RuntimeError("Benchmark decryption did not recover the message")
    short_pairings = 1 + N + n * N
    note = "" if N == 1 else f"1+N+nN gives {short_pairings}; one e(C3_k, D1_k) per authority adds {N - 1}"
    rows.append(BenchRow("decrypt", scenario, _as_dict(decryption.counts),
                         {"pairings": 2 * N + n * N}, "(2N+nN)C_p", note))

    source, target = ciphertext.element_count()
    length = len(encode_ciphertext(ciphertext))
    short_source = 2 + n * N
    note = "" if source == short_source else f"2+nN gives {short_source} source elements, delta {source - short_source}"
    rows.append(BenchRow("ciphertext", scenario, {"source_elements": source, "target_elements": target},
                         {"source_elements": 1 + N + n * N, "target_elements": 1},
                         "(1+N+nN)|G1| + |G2|", note, {"bytes": length}))

    for row in rows:
        logger.debug("bench algorithm=%s N=%d n=%d matches=%s", row.algorithm, N, n, row.matches)
    return rows


def bench_report(scenarios: Iterable[Scenario] = DEFAULT_SCENARIOS, backend=Backend.TRANSPARENT,
                 order: Optional[int] = None, rng=None, params=None) -> List[BenchRow]:
    params = params or global_setup(backend, order=order)
    rows = []
    for scenario in scenarios:
        rows.extend(run_scenario(params, scenario, rng))
    return rows


def _format_counts(values: Dict[str, int]) -> str:
    return " ".join(f"{key}={value}" for key, value in values.items())


def render_table(rows: List[BenchRow]) -> str:
    table = [["algorithm", "N", "n", "depth", "measured", "expected", "formula", "match", "note"]]
    for row in rows:
        measured = dict(row.measured, **row.extra)
        table.append([row.algorithm, row.scenario.authorities, row.scenario.attributes, row.scenario.depth,
                      _format_counts(measured), _format_counts(row.expected), row.formula,
                      "yes" if row.matches else "NO", row.note])
    return tabulate(table, headers="firstrow", tablefmt="grid")


def render_json_lines(rows: List[BenchRow]) -> str:
    return "\n".join(json.dumps(row.as_dict(), sort_keys=True) for row in rows)
