'''access.py: Contains monotone threshold access trees, secret sharing over them and Lagrange reconstruction.'''

import re
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import DuplicatePoints, PolicySyntaxError, Unsatisfied
from .groups import default_rng, inverse


@dataclass(frozen=True, order=True)
class AttributeId:
    '''Attribute j of authority k; unique as the pair (k, j).'''
    authority: int
    index: int

    def __post_init__(self):
        if self.authority < 1 or self.index < 1:
            raise ValueError(f"Attribute ids start at 1, got {self.authority}:{self.index}")

    def __str__(self):
        return f"{self.authority}:{self.index}"


@dataclass(frozen=True)
class Node:
    '''
    A threshold gate or a leaf.

    Attributes:
        threshold: k_x, the number of children that must be satisfied (1 for leaves).
        children:  Ordered children; child i has evaluation point i + 1 in its parent.
        attribute: The attribute of a leaf, None for gates.
    '''
    threshold: int
    children: Tuple["Node", ...] = ()
    attribute: Optional[AttributeId] = None

    @property
    def is_leaf(self):
        return self.attribute is not None


def leaf(attribute: AttributeId) -> Node:
    return Node(1, (), attribute)


def threshold_gate(threshold: int, children: Sequence[Node]) -> Node:
    return Node(threshold, tuple(children))


def and_gate(*children: Node) -> Node:
    return Node(len(children), tuple(children))


def or_gate(*children: Node) -> Node:
    return Node(1, tuple(children))


class AccessTree:
    '''
    A class that represents a validated access tree (the key policy of one authority).

    Attributes:
        root: The root node.
    '''

    def __init__(self, root: Node):
        self.root = root
        self._leaves = tuple(attribute for _, attribute in self._collect(root, ()))
        if len(set(self._leaves)) != len(self._leaves):
            raise ValueError("An attribute may appear on at most one leaf of a tree")

    def _collect(self, node, path):
        if node.is_leaf:
            if node.threshold != 1 or node.children:
                raise ValueError(f"Leaf at {path} must have threshold 1 and no children")
            yield path, node.attribute
            return
        if not node.children:
            raise ValueError(f"Gate at {path} has no children")
        if not 0 < node.threshold <= len(node.children):
            raise ValueError(f"Gate at {path} has threshold {node.threshold} over {len(node.children)} children")
        for index, child in enumerate(node.children, start=1):
            yield from self._collect(child, path + (index,))

    @staticmethod
    def threshold_tree(attributes: Iterable[AttributeId], minimum: int) -> "AccessTree":
        '''A depth-1 tree: at least minimum of the attributes (a single leaf when there is only one).'''
        leaves = [leaf(attribute) for attribute in sorted(attributes)]
        if len(leaves) == 1 and minimum == 1:
            return AccessTree(leaves[0])
        return AccessTree(threshold_gate(minimum, leaves))

    def leaves(self) -> Tuple[AttributeId, ...]:
        '''Leaf attributes in preorder.'''
        return self._leaves

    def leaf_set(self):
        return frozenset(self._leaves)

    def authorities(self):
        return frozenset(attribute.authority for attribute in self._leaves)

    def walk(self):
        '''Yields (path, node) in preorder; the root path is ().'''
        stack = [((), self.root)]
        while stack:
            path, node = stack.pop()
            yield path, node
            for index in range(len(node.children), 0, -1):
                stack.append((path + (index,), node.children[index - 1]))

    def __eq__(self, other):
        return isinstance(other, AccessTree) and self.root == other.root

    def __hash__(self):
        return hash(self.root)

    def __repr__(self):
        return f"AccessTree({format_policy(self)})"


def satisfies(tree: AccessTree, attrs: Iterable[AttributeId]) -> bool:
    '''True iff at least k_x children of every required gate are satisfied, recursively.'''
    attrs = frozenset(attrs)

    def visit(node):
        if node.is_leaf:
            return node.attribute in attrs
        satisfied = 0
        for child in node.children:
            if visit(child):
                satisfied += 1
                if satisfied >= node.threshold:
                    return True
        return False

    return visit(tree.root)


@dataclass(frozen=True)
class PlanNode:
    '''
    A node chosen for decryption.

    Attributes:
        node:   The tree node.
        index:  Its evaluation point in the parent (0 for the root).
        chosen: The chosen children, exactly node.threshold of them for gates.
    '''
    node: Node
    index: int
    chosen: Tuple["PlanNode", ...] = field(default=())


@dataclass(frozen=True)
class DecryptionPlan:
    root: PlanNode

    def leaves(self) -> Tuple[AttributeId, ...]:
        found = []

        def visit(plan_node):
            if plan_node.node.is_leaf:
                found.append(plan_node.node.attribute)
            for child in plan_node.chosen:
                visit(child)

        visit(self.root)
        return tuple(found)


def select_satisfying(tree: AccessTree, attrs: Iterable[AttributeId]) -> DecryptionPlan:
    '''Picks, at every gate, the lowest-indexed satisfied children.'''
    attrs = frozenset(attrs)

    def visit(node, index):
        if node.is_leaf:
            return PlanNode(node, index) if node.attribute in attrs else None
        chosen = []
        for child_index, child in enumerate(node.children, start=1):
            plan = visit(child, child_index)
            if plan is not None:
                chosen.append(plan)
                if len(chosen) == node.threshold:
                    return PlanNode(node, index, tuple(chosen))
        return None

    root = visit(tree.root, 0)
    if root is None:
        raise Unsatisfied("The attribute set does not satisfy the access tree")
    return DecryptionPlan(root)


def evaluate_polynomial(coefficients: Sequence[int], x: int, order: int) -> int:
    result = 0
    for coefficient in reversed(coefficients):
        result = (result * x + coefficient) % order
    return result


def _random_polynomial(constant: int, degree: int, rng, order: int) -> Tuple[int, ...]:
    coefficients = [constant % order]
    for position in range(1, degree + 1):
        if position == degree:
            coefficients.append(rng.randrange(1, order))
        else:
            coefficients.append(rng.randrange(0, order))
    return tuple(coefficients)


def assign_polynomials(tree: AccessTree, secret: int, order: int, rng=None) -> Dict[tuple, Tuple[int, ...]]:
    '''
    Top-down sharing: q_root(0) = secret and q_x(0) = q_parent(x)(index(x)).

    Every q_x has degree exactly k_x - 1. Returns the coefficients per node path.
    '''
    rng = rng or default_rng()
    polynomials = {}
    constants = {(): secret % order}
    for path, node in tree.walk():
        coefficients = _random_polynomial(constants[path], node.threshold - 1, rng, order)
        polynomials[path] = coefficients
        for index in range(1, len(node.children) + 1):
            constants[path + (index,)] = evaluate_polynomial(coefficients, index, order)
    return polynomials


def share_secret(tree: AccessTree, secret: int, order: int, rng=None) -> Dict[AttributeId, int]:
    '''Returns q_leaf(0) for every leaf (the LeafShareMap).'''
    polynomials = assign_polynomials(tree, secret, order, rng)
    return {node.attribute: polynomials[path][0] for path, node in tree.walk() if node.is_leaf}


def lagrange_coeff(x_i: int, points: Iterable[int], x: int, order: int) -> int:
    '''Δ_{x_i,S}(x) = ∏_{x_j ∈ S, x_j ≠ x_i} (x − x_j)/(x_i − x_j) mod order.'''
    points = [point % order for point in points]
    if len(set(points)) != len(points):
        raise DuplicatePoints(f"Interpolation points are not distinct: {points}")
    x_i %= order
    if x_i not in points:
        raise ValueError(f"{x_i} is not one of the interpolation points")
    numerator, denominator = 1, 1
    for x_j in points:
        if x_j == x_i:
            continue
        numerator = numerator * (x - x_j) % order
        denominator = denominator * (x_i - x_j) % order
    return numerator * inverse(denominator, order) % order


def interpolate_at_zero(points: Sequence[Tuple[int, int]], order: int) -> int:
    '''p(0) of the unique polynomial through the given (x, y) points.'''
    if not points:
        raise ValueError("At least one point is required")
    xs = [x for x, _ in points]
    return sum(y * lagrange_coeff(x, xs, 0, order) for x, y in points) % order


def reconstruct_secret(plan: DecryptionPlan, shares: Dict[AttributeId, int], order: int) -> int:
    '''Lagrange-weighted recursion over the plan; returns q_root(0).'''

    def visit(plan_node):
        if plan_node.node.is_leaf:
            return shares[plan_node.node.attribute] % order
        indices = [child.index for child in plan_node.chosen]
        return sum(visit(child) * lagrange_coeff(child.index, indices, 0, order)
                   for child in plan_node.chosen) % order

    return visit(plan.root)


_TOKEN = re.compile(r"\s*(?:(?P<punct>[(),;])|(?P<word>[A-Za-z0-9_.\-]+(?::[A-Za-z0-9_.\-]+)?))")


def _tokenize(text: str) -> List[str]:
    tokens, position = [], 0
    text = text.strip()
    while position < len(text):
        match = _TOKEN.match(text, position)
        if not match or match.end() == position:
            raise PolicySyntaxError(f"Unexpected character at offset {position}: {text[position:position + 10]!r}")
        tokens.append(match.group("punct") or match.group("word"))
        position = match.end()
        while position < len(text) and text[position].isspace():
            position += 1
    return tokens


def numeric_resolver(authority: str, attribute: str) -> AttributeId:
    '''Resolves leaves written as numbers, e.g. 2:3.'''
    try:
        return AttributeId(int(authority), int(attribute))
    except ValueError as error:
        raise PolicySyntaxError(f"Leaf {authority}:{attribute} is not numeric") from error


def parse_policy(text: str, resolver: Callable[[str, str], AttributeId] = numeric_resolver) -> AccessTree:
    '''
    Parses THRESH(k; child, ...), AND(...), OR(...) and authority:attribute leaves.

    The resolver maps the two halves of a leaf name onto an AttributeId.
    '''
    tokens = _tokenize(text)
    position = 0

    def peek():
        return tokens[position] if position < len(tokens) else None

    def expect(token):
        nonlocal position
        if peek() != token:
            raise PolicySyntaxError(f"Expected {token!r}, found {peek()!r}")
        position += 1

    def children_until_close():
        nonlocal position
        children = [expression()]
        while peek() == ",":
            position += 1
            children.append(expression())
        expect(")")
        return children

    def expression():
        nonlocal position
        token = peek()
        if token is None or token in "(),;":
            raise PolicySyntaxError(f"Expected a gate or a leaf, found {token!r}")
        position += 1
        keyword = token.upper()
        if keyword in ("AND", "OR", "THRESH") and peek() == "(":
            expect("(")
            if keyword == "THRESH":
                count = peek()
                if count is None or not count.isdigit():
                    raise PolicySyntaxError(f"THRESH needs a numeric threshold, found {count!r}")
                position += 1
                expect(";")
                children = children_until_close()
                return threshold_gate(int(count), children)
            children = children_until_close()
            return and_gate(*children) if keyword == "AND" else or_gate(*children)
        if ":" not in token:
            raise PolicySyntaxError(f"Leaf {token!r} must be written authority:attribute")
        authority, attribute = token.split(":", 1)
        return leaf(resolver(authority, attribute))

    root = expression()
    if position != len(tokens):
        raise PolicySyntaxError(f"Unexpected trailing input starting at {peek()!r}")
    try:
        return AccessTree(root)
    except ValueError as error:
        raise PolicySyntaxError(str(error)) from error


def format_policy(tree: AccessTree, namer: Callable[[AttributeId], str] = str) -> str:
    def visit(node):
        if node.is_leaf:
            return namer(node.attribute)
        inner = ", ".join(visit(child) for child in node.children)
        if node.threshold == len(node.children):
            return f"AND({inner})"
        if node.threshold == 1:
            return f"OR({inner})"
        return f"THRESH({node.threshold}; {inner})"

    return visit(tree.root)
