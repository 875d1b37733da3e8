"""Spanning trees over measure vertices: Prüfer codes, enumeration, and the
composition/cost rules that make tree-structured couplings tractable.

A tree-structured optimal coupling factors over its edges:

    M_T[i_1..i_s] = prod_edges M_edge[i_a, i_b] / prod_v mu_v[i_v]^(deg v - 1)

and its KL value decomposes as  sum_edges sb_edge + sum_v (deg v - 1) H(mu_v),
equivalently  sum_edges g_edge - sum_v H(mu_v)  with the degree-free weights
g_edge = sb_edge + H(mu_a) + H(mu_b).
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .measures import DiscreteMeasure
from .sinkhorn import BimarginalCoupling, total_variation

Edge = tuple[int, int]

ENUMERATION_CAP = 8  # 8^6 = 262144 trees


@dataclass(frozen=True)
class SpanningTree:
    """Tree on vertices 1..s, stored as s-1 canonical sorted edges."""

    s: int
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if self.s < 2:
            raise ValidationError(f"spanning tree needs s >= 2, got {self.s}")
        canon = tuple(sorted(tuple(sorted(e)) for e in self.edges))
        if len(canon) != self.s - 1:
            raise ValidationError(
                f"spanning tree on {self.s} vertices needs {self.s - 1} edges, got {len(canon)}"
            )
        parent = list(range(self.s + 1))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in canon:
            if a == b:
                raise ValidationError(f"self-loop ({a}, {b})")
            if not (1 <= a <= self.s and 1 <= b <= self.s):
                raise ValidationError(f"edge ({a}, {b}) out of range for s={self.s}")
            ra, rb = find(a), find(b)
            if ra == rb:
                raise ValidationError(f"edges contain a cycle through ({a}, {b})")
            parent[ra] = rb
        object.__setattr__(self, "edges", canon)

    def degrees(self) -> np.ndarray:
        """Degree of each vertex; index i holds the degree of vertex i+1."""
        deg = np.zeros(self.s, dtype=int)
        for a, b in self.edges:
            deg[a - 1] += 1
            deg[b - 1] += 1
        return deg

    def to_dot(self, name: str = "tree") -> str:
        lines = [f"graph {name} {{"]
        lines += [f"  {a} -- {b};" for a, b in self.edges]
        lines.append("}")
        return "\n".join(lines) + "\n"


def prufer_decode(code: Sequence[int], s: int) -> SpanningTree:
    """The unique labeled tree on s vertices with the given Prüfer code.

    Standard leaf construction: each entry of the code consumes the smallest
    current leaf; deg(v) = multiplicity of v in the code + 1.
    """
    code = tuple(int(c) for c in code)
    if s < 2:
        raise ValidationError(f"need s >= 2, got {s}")
    if len(code) != s - 2:
        raise ValidationError(f"code length {len(code)} invalid for s={s} (need {s - 2})")
    for c in code:
        if not 1 <= c <= s:
            raise ValidationError(f"code entry {c} out of range 1..{s}")
    deg = [1] * (s + 1)
    for c in code:
        deg[c] += 1
    leaves = [v for v in range(1, s + 1) if deg[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for c in code:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, c))
        deg[c] -= 1
        if deg[c] == 1:
            heapq.heappush(leaves, c)
    edges.append((heapq.heappop(leaves), heapq.heappop(leaves)))
    return SpanningTree(s, tuple(edges))


def prufer_encode(tree: SpanningTree) -> tuple[int, ...]:
    """Prüfer code of a tree: repeatedly strip the smallest leaf, recording
    its neighbor, until two vertices remain.  Inverse of prufer_decode."""
    adjacency: dict[int, set[int]] = {v: set() for v in range(1, tree.s + 1)}
    for a, b in tree.edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    leaves = [v for v, nbrs in adjacency.items() if len(nbrs) == 1]
    heapq.heapify(leaves)
    code = []
    for _ in range(tree.s - 2):
        leaf = heapq.heappop(leaves)
        neighbor = adjacency[leaf].pop()
        adjacency[neighbor].discard(leaf)
        code.append(neighbor)
        if len(adjacency[neighbor]) == 1:
            heapq.heappush(leaves, neighbor)
    return tuple(code)


def format_prufer(code: Sequence[int]) -> str:
    """Space-separated serialization, e.g. (3, 3, 5) -> "3 3 5"."""
    return " ".join(str(int(c)) for c in code)


def parse_prufer(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split())
    except ValueError as exc:
        raise ValidationError(f"malformed Prüfer code {text!r}") from exc


def enumerate_trees(s: int, cap: int = ENUMERATION_CAP) -> Iterator[SpanningTree]:
    """All s^(s-2) labeled trees, in lexicographic Prüfer-code order."""
    if s < 2:
        raise ValidationError(f"need s >= 2, got {s}")
    if s > cap:
        raise ValidationError(
            f"s={s} exceeds the enumeration cap of {cap} ({cap}^{cap - 2} trees)"
        )
    for code in itertools.product(range(1, s + 1), repeat=s - 2):
        yield prufer_decode(code, s)


def _plan_array(value) -> np.ndarray:
    return value.plan if isinstance(value, BimarginalCoupling) else np.asarray(value, dtype=float)


def compose_tree_coupling(
    tree: SpanningTree,
    plans: Mapping[Edge, "np.ndarray | BimarginalCoupling"],
    measures: Sequence[DiscreteMeasure],
    cap: int = 10_000_000,
    marginal_tol: float = 1e-6,
) -> np.ndarray:
    """Dense tree-structured coupling from the pairwise plans on its edges.

    Each plan must be keyed by a canonical (a, b) edge with shape
    (n_a, n_b), a < b, and must reproduce the endpoint marginals within
    marginal_tol (TV).  Entries whose marginal weight vanishes anywhere are
    zero by feasibility and are set to zero rather than dividing 0/0.
    """
    measures = list(measures)
    if len(measures) != tree.s:
        raise ValidationError(f"tree has s={tree.s} vertices but {len(measures)} measures given")
    shape = tuple(m.n for m in measures)
    total = int(np.prod([int(n) for n in shape], dtype=np.int64))
    if total > cap:
        raise ValidationError(f"tensor with {total} entries exceeds the configured cap of {cap}")

    out = np.ones(shape)
    for a, b in tree.edges:
        if (a, b) not in plans:
            raise ValidationError(f"missing pairwise plan for tree edge ({a}, {b})")
        plan = _plan_array(plans[(a, b)])
        if plan.shape != (shape[a - 1], shape[b - 1]):
            raise ValidationError(
                f"plan for edge ({a}, {b}) has shape {plan.shape}, expected "
                f"({shape[a - 1]}, {shape[b - 1]})"
            )
        row_gap = total_variation(plan.sum(axis=1), measures[a - 1].weights)
        col_gap = total_variation(plan.sum(axis=0), measures[b - 1].weights)
        if max(row_gap, col_gap) > marginal_tol:
            raise ValidationError(
                f"plan for edge ({a}, {b}) violates its marginals "
                f"(TV {max(row_gap, col_gap):.3e} > {marginal_tol:.1e})"
            )
        view = [1] * tree.s
        view[a - 1] = plan.shape[0]
        view[b - 1] = plan.shape[1]
        out *= plan.reshape(view)

    deg = tree.degrees()
    for idx, measure in enumerate(measures):
        if deg[idx] <= 1:
            continue
        w = measure.weights ** (deg[idx] - 1)
        view = [1] * tree.s
        view[idx] = w.size
        wv = w.reshape(view)
        np.divide(out, wv, out=out, where=wv > 0)
        zero = measure.weights == 0
        if zero.any():
            slicer: list = [slice(None)] * tree.s
            slicer[idx] = zero
            out[tuple(slicer)] = 0.0
    return out


def _edge_lookup(tree: SpanningTree, values: Mapping[Edge, float], what: str) -> list[float]:
    picked = []
    for edge in tree.edges:
        if edge not in values:
            raise ValidationError(f"missing {what} for tree edge {edge}")
        picked.append(float(values[edge]))
    return picked


def tree_cost_decomposed(
    tree: SpanningTree,
    sb_values: Mapping[Edge, float],
    entropies: Sequence[float],
) -> float:
    """KL cost of a tree via its edges: sum sb_edge + sum (deg-1) * H."""
    if len(entropies) != tree.s:
        raise ValidationError(f"need {tree.s} entropies, got {len(entropies)}")
    total = sum(_edge_lookup(tree, sb_values, "sb value"))
    deg = tree.degrees()
    total += float(((deg - 1) * np.asarray(entropies, dtype=float)).sum())
    return total


def tree_cost_additive(
    tree: SpanningTree,
    g_weights: np.ndarray,
    entropies: Sequence[float],
) -> float:
    """KL cost of a tree via degree-free edge weights: sum g_edge - sum H.

    Algebraically identical to tree_cost_decomposed when
    g[a, b] = sb[a, b] + H_a + H_b.
    """
    g = np.asarray(g_weights, dtype=float)
    if g.shape != (tree.s, tree.s):
        raise ValidationError(f"weight matrix shape {g.shape} != ({tree.s}, {tree.s})")
    if len(entropies) != tree.s:
        raise ValidationError(f"need {tree.s} entropies, got {len(entropies)}")
    total = sum(float(g[a - 1, b - 1]) for a, b in tree.edges)
    return total - float(np.asarray(entropies, dtype=float).sum())
