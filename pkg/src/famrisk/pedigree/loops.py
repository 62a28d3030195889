"""Loop detection and clone-based loop breaking.

The engine peels nuclear families, which requires the marriage graph to
be acyclic.  Nodes are individuals plus one node per union that has
children; edges join partners and children to the union.  A cycle in this
graph (consanguineous union, double mating between two sibships) is
broken by duplicating one individual on the cycle: the clone is a founder
carrying identical phenotype data and takes the original's place as a
partner in exactly one union on the cycle.  The lowest individual id on
the cycle is cloned, and ties between its unions break toward the
smaller partner pair, so breaking is deterministic.
"""

from __future__ import annotations

from dataclasses import replace

from famrisk.pedigree.model import Individual, Pedigree, _norm_union

_MAX_ROUNDS = 64


def _family_unions(p: Pedigree) -> list[tuple[int, int]]:
    """Partner pairs that have at least one child (sorted for determinism)."""
    pairs = {
        _norm_union(m.father_id, m.mother_id)
        for m in p.members
        if m.has_parents
    }
    return sorted(pairs)


def _find_cycle(p: Pedigree) -> list | None:
    """One cycle in the marriage graph as an alternating node list
    [ind, union, ind, union, ...], or None if the graph is a forest."""
    adj: dict[object, list] = {}

    def link(a, b):
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)

    for pair in _family_unions(p):
        u = ("u", pair)
        link(pair[0], u)
        link(pair[1], u)
        for child in p.children_of_union(pair):
            link(child.id, u)

    visited: set = set()
    parent: dict = {}
    for root in sorted(adj, key=str):
        if root in visited:
            continue
        visited.add(root)
        stack = [root]
        while stack:
            node = stack.pop()
            for nxt in adj[node]:
                if nxt not in visited:
                    visited.add(nxt)
                    parent[nxt] = node
                    stack.append(nxt)
                elif parent.get(node) != nxt and parent.get(nxt) != node:
                    # back edge: walk both endpoints up to their junction
                    path_a, path_b = [node], [nxt]
                    seen_a = {node}
                    cur = node
                    while cur in parent:
                        cur = parent[cur]
                        path_a.append(cur)
                        seen_a.add(cur)
                    cur = nxt
                    while cur not in seen_a:
                        cur = parent[cur]
                        path_b.append(cur)
                    junction = path_b[-1]
                    cycle = path_a[: path_a.index(junction) + 1]
                    cycle.extend(reversed(path_b[:-1]))
                    return cycle
    return None


def detect_and_break_loops(p: Pedigree) -> tuple[Pedigree, list[tuple[int, int]]]:
    """Return a loop-free pedigree plus (original, clone) id pairs.

    Idempotent: a loop-free input comes back unchanged with no pairs.
    """
    clone_pairs: list[tuple[int, int]] = []
    current = p
    for _ in range(_MAX_ROUNDS):
        cycle = _find_cycle(current)
        if cycle is None:
            break
        current = _break_one(current, cycle, clone_pairs)
    else:
        raise AssertionError("loop breaking did not converge")
    if not clone_pairs:
        return p, []
    return current, clone_pairs


def _break_one(
    p: Pedigree, cycle: list, clone_pairs: list[tuple[int, int]]
) -> Pedigree:
    individuals = [n for n in cycle if not isinstance(n, tuple)]
    target_id = min(individuals)
    target = p.member(target_id)

    # the union (on the cycle) where the clone substitutes as partner
    n = len(cycle)
    i = cycle.index(target_id)
    adjacent = [cycle[(i - 1) % n], cycle[(i + 1) % n]]
    partner_unions = sorted(
        u[1] for u in adjacent if isinstance(u, tuple) and target_id in u[1]
    )
    pair = partner_unions[0]

    clone = replace(
        target,
        id=p.next_id,
        mother_id=None,
        father_id=None,
        is_clone_of=target.is_clone_of if target.is_clone_of else target_id,
    )
    members = p.member_map()
    members[clone.id] = clone

    for child in p.children_of_union(pair):
        field = "father_id" if child.father_id == target_id else "mother_id"
        members[child.id] = replace(members[child.id], **{field: clone.id})

    other = pair[0] if pair[1] == target_id else pair[1]
    unions = [u for u in p.unions if u != pair]
    unions.append(_norm_union(other, clone.id))
    clone_pairs.append((target_id, clone.id))
    return p.with_members(members, unions, p.next_id + 1)
