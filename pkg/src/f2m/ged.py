"""Graph edit distance between normalized flowchart graphs.

Unit costs: node insert/delete 1, node substitution 0 iff the normalized
labels are equal else 1, edge insert/delete 1.  Because normalized graphs
key nodes by (unique) labels, a candidate edit script is fully described
by an injective partial mapping from one label set to the other; the
distance is the minimum mapping cost.

Up to ``exact_limit`` nodes on the larger side the search is exact
(branch and bound with an admissible lower bound).  Beyond it a greedy
same-label-first mapping gives an upper bound, which can only understate
the derived similarity score, never inflate it.
"""

from __future__ import annotations

from .mermaid import NormalizedGraph

EXACT_NODE_LIMIT = 12

_DELETED = -1
_UNDECIDED = -2


class _Instance:
    """Indexed form of one (a, b) graph pair."""

    def __init__(self, a: NormalizedGraph, b: NormalizedGraph):
        self.a_labels = sorted(a.node_labels)
        self.b_labels = sorted(b.node_labels)
        common = a.node_labels & b.node_labels
        # Nodes with a same-label partner first: cheap assignments early
        # make the bound effective sooner.
        self.a_labels.sort(key=lambda lab: (lab not in common, lab))
        a_index = {lab: i for i, lab in enumerate(self.a_labels)}
        b_index = {lab: j for j, lab in enumerate(self.b_labels)}
        self.n_a = len(self.a_labels)
        self.n_b = len(self.b_labels)
        self.a_edges = {(a_index[u], a_index[v]) for u, v in a.edges}
        self.b_edges = {(b_index[u], b_index[v]) for u, v in b.edges}
        self.a_out = [set() for _ in range(self.n_a)]
        self.a_in = [set() for _ in range(self.n_a)]
        for u, v in self.a_edges:
            self.a_out[u].add(v)
            self.a_in[v].add(u)
        self.b_out = [set() for _ in range(self.n_b)]
        self.b_in = [set() for _ in range(self.n_b)]
        for u, v in self.b_edges:
            self.b_out[u].add(v)
            self.b_in[v].add(u)

    def mapping_cost(self, match: list[int]) -> int:
        """Exact cost of a complete assignment (match[i] = j or _DELETED)."""
        used = {j for j in match if j != _DELETED}
        cost = sum(1 for j in match if j == _DELETED)          # deletions
        cost += self.n_b - len(used)                           # insertions
        for i, j in enumerate(match):
            if j != _DELETED and self.a_labels[i] != self.b_labels[j]:
                cost += 1                                      # substitutions
        matched_edges = 0
        for u, v in self.a_edges:
            mu, mv = match[u], match[v]
            if mu != _DELETED and mv != _DELETED and (mu, mv) in self.b_edges:
                matched_edges += 1
            else:
                cost += 1                                      # edge deletions
        cost += len(self.b_edges) - matched_edges              # edge insertions
        return cost

    def greedy_match(self) -> list[int]:
        b_of_label = {lab: j for j, lab in enumerate(self.b_labels)}
        match = [_UNDECIDED] * self.n_a
        used = set()
        for i, lab in enumerate(self.a_labels):
            j = b_of_label.get(lab)
            if j is not None and j not in used:
                match[i] = j
                used.add(j)
        spare = [j for j in range(self.n_b) if j not in used]
        for i in range(self.n_a):
            if match[i] == _UNDECIDED:
                match[i] = spare.pop() if spare else _DELETED
        return match


class _Search:
    def __init__(self, inst: _Instance, initial_best: int):
        self.inst = inst
        self.best = initial_best
        self.match = [_UNDECIDED] * inst.n_a
        self.inv = [_UNDECIDED] * inst.n_b
        # Suffix counts of edges wholly inside the not-yet-decided region,
        # used by the lower bound.
        self.a_rem_edges = self._suffix_edge_counts()

    def _suffix_edge_counts(self) -> list[int]:
        counts = [0] * (self.inst.n_a + 1)
        for level in range(self.inst.n_a - 1, -1, -1):
            extra = sum(1 for (u, v) in self.inst.a_edges
                        if u >= level and v >= level and (u == level or v == level))
            counts[level] = counts[level + 1] + extra
        return counts

    def run(self) -> int:
        self._expand(0, 0)
        return self.best

    # -- incremental exact cost -------------------------------------------

    def _assign_cost(self, i: int, j: int) -> int:
        """Cost added by mapping a-node i to b-node j, given levels < i decided."""
        inst = self.inst
        cost = 0 if inst.a_labels[i] == inst.b_labels[j] else 1
        for v in inst.a_out[i]:
            if v < i or v == i:
                mv = j if v == i else self.match[v]
                if mv == _DELETED or (j, mv) not in inst.b_edges:
                    cost += 1
        for u in inst.a_in[i]:
            if u < i:
                mu = self.match[u]
                if mu == _DELETED or (mu, j) not in inst.b_edges:
                    cost += 1
        # b-edges between j and already-used b-nodes that no a-edge covers
        for w in inst.b_out[j]:
            if w == j:
                if (i, i) not in inst.a_edges:
                    cost += 1
                continue
            u = self.inv[w]
            if u >= 0 and (i, u) not in inst.a_edges:
                cost += 1
        for w in inst.b_in[j]:
            if w != j:
                u = self.inv[w]
                if u >= 0 and (u, i) not in inst.a_edges:
                    cost += 1
        return cost

    def _delete_cost(self, i: int) -> int:
        """Cost added by deleting a-node i: 1 plus its edges to decided nodes."""
        inst = self.inst
        cost = 1
        for v in inst.a_out[i]:
            if v <= i:
                cost += 1
        for u in inst.a_in[i]:
            if u < i:
                cost += 1
        return cost

    # -- admissible lower bound -------------------------------------------

    def _lower_bound(self, level: int) -> int:
        inst = self.inst
        rem_a = [inst.a_labels[i] for i in range(level, inst.n_a)]
        unused_b = [j for j in range(inst.n_b) if self.inv[j] == _UNDECIDED]
        common = len(set(rem_a) & {inst.b_labels[j] for j in unused_b})
        bound = max(len(rem_a), len(unused_b)) - common

        b_rem_edges = sum(1 for (u, v) in inst.b_edges
                          if self.inv[u] == _UNDECIDED and self.inv[v] == _UNDECIDED)
        bound += abs(self.a_rem_edges[level] - b_rem_edges)

        # Frontier edges: per decided a-node, out/in counts toward the
        # undecided region must pair up with its partner's counts.
        for i in range(level):
            j = self.match[i]
            a_out_cross = sum(1 for v in inst.a_out[i] if v >= level)
            a_in_cross = sum(1 for u in inst.a_in[i] if u >= level)
            if j == _DELETED:
                bound += a_out_cross + a_in_cross  # certain future deletions
            else:
                b_out_cross = sum(1 for w in inst.b_out[j]
                                  if self.inv[w] == _UNDECIDED)
                b_in_cross = sum(1 for w in inst.b_in[j]
                                 if self.inv[w] == _UNDECIDED)
                bound += abs(a_out_cross - b_out_cross)
                bound += abs(a_in_cross - b_in_cross)
        return bound

    def _expand(self, level: int, cost: int) -> None:
        inst = self.inst
        if cost + self._lower_bound(level) >= self.best:
            return
        if level == inst.n_a:
            total = cost + sum(1 for j in range(inst.n_b) if self.inv[j] == _UNDECIDED)
            for u, v in inst.b_edges:
                if self.inv[u] == _UNDECIDED or self.inv[v] == _UNDECIDED:
                    total += 1
            if total < self.best:
                self.best = total
            return
        candidates = []
        for j in range(inst.n_b):
            if self.inv[j] == _UNDECIDED:
                candidates.append((self._assign_cost(level, j), j))
        candidates.sort()
        for step_cost, j in candidates:
            self.match[level] = j
            self.inv[j] = level
            self._expand(level + 1, cost + step_cost)
            self.inv[j] = _UNDECIDED
        self.match[level] = _DELETED
        self._expand(level + 1, cost + self._delete_cost(level))
        self.match[level] = _UNDECIDED


def graph_edit_distance(a: NormalizedGraph, b: NormalizedGraph,
                        exact_limit: int = EXACT_NODE_LIMIT) -> int:
    """Edit distance between two normalized graphs under unit costs.

    Exact when both graphs have at most ``exact_limit`` nodes, otherwise
    the greedy upper bound.
    """
    inst = _Instance(a, b)
    greedy = inst.mapping_cost(inst.greedy_match())
    if max(inst.n_a, inst.n_b) > exact_limit:
        return greedy
    return _Search(inst, greedy + 1).run()
