"""Class-order structures: total chains and Hasse-diagram partial orders.

Class indices are 0-based everywhere.  A chain over K classes is the total
order 0 < 1 < ... < K-1, marked by the ``chain_order`` flag with no explicit
edges; an edge set describes the Hasse diagram of a partial order, with an
edge (m, n) meaning "class m is immediately below class n".
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import OrderStructureError, ValidationError


@dataclass(frozen=True)
class ClassOrder:
    """An ordinal structure over ``num_classes`` classes.

    ``chain_order`` selects the total order (no explicit edges); otherwise
    ``edges`` is the Hasse diagram, possibly empty (an antichain).
    """

    num_classes: int
    edges: tuple[tuple[int, int], ...] = ()
    class_names: tuple[str, ...] | None = None
    chain_order: bool = False

    def __post_init__(self) -> None:
        if self.num_classes < 1:
            raise ValidationError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.chain_order and self.edges:
            raise ValidationError("a chain order must not carry explicit edges")
        object.__setattr__(self, "edges", tuple((int(m), int(n)) for m, n in self.edges))
        seen = set()
        for m, n in self.edges:
            if not (0 <= m < self.num_classes and 0 <= n < self.num_classes):
                raise OrderStructureError(
                    f"edge ({m}, {n}) references a class outside [0, {self.num_classes})"
                )
            if m == n:
                raise OrderStructureError(f"self-loop on class {m}")
            if (m, n) in seen:
                raise OrderStructureError(f"duplicate edge ({m}, {n})")
            seen.add((m, n))
        if self.class_names is not None:
            names = tuple(self.class_names)
            if len(names) != self.num_classes:
                raise ValidationError(
                    f"expected {self.num_classes} class names, got {len(names)}"
                )
            object.__setattr__(self, "class_names", names)
        cycle = _find_cycle(self.num_classes, self.edges)
        if cycle is not None:
            raise OrderStructureError(
                "order graph contains a cycle: " + " -> ".join(str(c) for c in cycle)
            )

    @classmethod
    def chain(cls, num_classes: int, class_names=None) -> "ClassOrder":
        return cls(num_classes=num_classes, class_names=class_names, chain_order=True)

    @property
    def is_chain(self) -> bool:
        return self.chain_order

    def hasse_edges(self) -> tuple[tuple[int, int], ...]:
        """Edges of the Hasse diagram; chains expand to (k, k+1) edges."""
        if self.is_chain:
            return tuple((k, k + 1) for k in range(self.num_classes - 1))
        return self.edges


@dataclass(frozen=True)
class PathLengthTable:
    """Shortest directed path lengths in the Hasse diagram (0 where no path)."""

    lengths: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.lengths, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError(f"lengths must be square, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "lengths", arr)

    def __getitem__(self, idx):
        return self.lengths[idx]


@dataclass(frozen=True)
class CostMatrix:
    """Symmetric non-negative penalty costs between class pairs."""

    costs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.costs, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError(f"costs must be square, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "costs", arr)

    def __getitem__(self, idx):
        return self.costs[idx]


def _find_cycle(num_classes: int, edges) -> list[int] | None:
    adj: list[list[int]] = [[] for _ in range(num_classes)]
    for m, n in edges:
        adj[m].append(n)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * num_classes
    parent = [-1] * num_classes
    for start in range(num_classes):
        if color[start] != WHITE:
            continue
        stack = [(start, iter(adj[start]))]
        color[start] = GRAY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    parent[nxt] = node
                    stack.append((nxt, iter(adj[nxt])))
                    advanced = True
                    break
                if color[nxt] == GRAY:
                    cycle = [nxt]
                    cur = node
                    while cur != nxt:
                        cycle.append(cur)
                        cur = parent[cur]
                    cycle.append(nxt)
                    cycle.reverse()
                    return cycle
            if not advanced:
                color[node] = BLACK
                stack.pop()
    return None


def path_lengths(order: ClassOrder) -> PathLengthTable:
    """BFS shortest path length from every class to every class (0 if none)."""
    K = order.num_classes
    if order.is_chain:
        idx = np.arange(K)
        lengths = np.maximum(idx[None, :] - idx[:, None], 0)
        return PathLengthTable(lengths)
    adj: list[list[int]] = [[] for _ in range(K)]
    for m, n in order.hasse_edges():
        adj[m].append(n)
    lengths = np.zeros((K, K), dtype=np.int64)
    for src in range(K):
        dist = {src: 0}
        queue = deque([src])
        while queue:
            node = queue.popleft()
            for nxt in adj[node]:
                if nxt not in dist:
                    dist[nxt] = dist[node] + 1
                    queue.append(nxt)
        for dst, d in dist.items():
            lengths[src, dst] = d
    return PathLengthTable(lengths)


def cost_matrix(order: ClassOrder) -> CostMatrix:
    """Penalty cost between class pairs: one less than their ordinal distance.

    Chains use the closed form max(|i-j| - 1, 0); general orders use the
    shortest-path distance max(l[m,n], l[n,m]) in place of |i-j|.  Both agree
    whenever the Hasse diagram is a chain.
    """
    if order.is_chain:
        idx = np.arange(order.num_classes)
        costs = np.maximum(np.abs(idx[:, None] - idx[None, :]) - 1, 0).astype(np.float64)
        return CostMatrix(costs)
    lengths = path_lengths(order).lengths
    dist = np.maximum(lengths, lengths.T)
    return CostMatrix(np.maximum(dist - 1, 0).astype(np.float64))


def ordinal_pair_sets(
    order: ClassOrder, ground_truth: int
) -> tuple[tuple[tuple[int, int], ...], tuple[tuple[int, int], ...]]:
    """Class pairs whose probabilities must ascend / descend around the target.

    Returns (ascending, descending).  Each pair (a, b) is oriented so that the
    loss penalizes max(0, margin + p[a] - p[b]), i.e. p[a] should stay below
    p[b].  Ascending pairs are Hasse edges below the ground truth, descending
    pairs are edges above it (reversed so the higher class is penalized).
    """
    K = order.num_classes
    y = int(ground_truth)
    if not 0 <= y < K:
        raise ValidationError(f"ground_truth {y} outside [0, {K})")
    if order.is_chain:
        ascending = tuple((k, k + 1) for k in range(y))
        descending = tuple((k + 1, k) for k in range(y, K - 1))
        return ascending, descending
    lengths = path_lengths(order).lengths
    ascending = []
    descending = []
    for m, n in order.hasse_edges():
        # An edge qualifies iff some maximal Hasse path contains both the
        # edge and y; that reduces to y being reachable from n, or m from y.
        if n == y or lengths[n, y] > 0:
            ascending.append((m, n))
        elif m == y or lengths[y, m] > 0:
            descending.append((n, m))
    return tuple(ascending), tuple(descending)


def maximal_chains(order: ClassOrder) -> tuple[tuple[int, ...], ...]:
    """All source-to-sink paths of the Hasse diagram, as class index tuples."""
    K = order.num_classes
    if order.is_chain:
        return (tuple(range(K)),)
    adj: list[list[int]] = [[] for _ in range(K)]
    has_parent = [False] * K
    for m, n in order.hasse_edges():
        adj[m].append(n)
        has_parent[n] = True
    chains: list[tuple[int, ...]] = []

    def walk(node: int, path: list[int]) -> None:
        path.append(node)
        if not adj[node]:
            chains.append(tuple(path))
        else:
            for nxt in adj[node]:
                walk(nxt, path)
        path.pop()

    for src in range(K):
        if not has_parent[src]:
            walk(src, [])
    return tuple(chains)


def parse_order_text(text: str) -> ClassOrder:
    """Parse the order file format.

    First line ``classes <K>``; optional ``name <idx> <string>`` lines;
    ``edge <m> <n>`` lines.  No edge lines means the chain order.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise OrderStructureError("empty order file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "classes":
        raise OrderStructureError(f"first line must be 'classes <K>', got {lines[0]!r}")
    try:
        K = int(head[1])
    except ValueError:
        raise OrderStructureError(f"bad class count {head[1]!r}") from None
    names: dict[int, str] = {}
    edges: list[tuple[int, int]] = []
    for ln in lines[1:]:
        parts = ln.split(maxsplit=2)
        if parts[0] == "name":
            if len(parts) != 3:
                raise OrderStructureError(f"bad name line {ln!r}")
            idx = int(parts[1])
            if not 0 <= idx < K:
                raise OrderStructureError(f"name index {idx} outside [0, {K})")
            names[idx] = parts[2]
        elif parts[0] == "edge":
            if len(parts) != 3:
                raise OrderStructureError(f"bad edge line {ln!r}")
            edges.append((int(parts[1]), int(parts[2])))
        else:
            raise OrderStructureError(f"unrecognized line {ln!r}")
    class_names = None
    if names:
        class_names = tuple(names.get(i, f"class_{i}") for i in range(K))
    return ClassOrder(
        num_classes=K, edges=tuple(edges), class_names=class_names, chain_order=not edges
    )


def format_order_text(order: ClassOrder) -> str:
    lines = [f"classes {order.num_classes}"]
    if order.class_names is not None:
        for i, name in enumerate(order.class_names):
            lines.append(f"name {i} {name}")
    for m, n in order.edges:
        lines.append(f"edge {m} {n}")
    return "\n".join(lines) + "\n"


def parse_order_spec(spec: str) -> ClassOrder:
    """Accept either ``chain:<K>`` or a path to an order file."""
    if spec.startswith("chain:"):
        return ClassOrder.chain(int(spec.split(":", 1)[1]))
    with open(spec, "r", encoding="utf-8") as fh:
        return parse_order_text(fh.read())
