"""Integer max-flow on graphs with single terminal arcs per node.

Both solvers operate on a :class:`FlowNetwork` in place: paired arcs
``2e`` / ``2e + 1`` hold the residual capacities of the two directions of
edge ``e`` and ``terminal[v]`` holds the residual terminal capacity of
node ``v`` (positive: from the source, negative: to the sink).  Python
integers keep every capacity exact.
"""
from __future__ import annotations

from collections import deque

__all__ = ["FlowNetwork", "boykov_kolmogorov", "edmonds_karp", "source_reachable"]

_TERMINAL = -1
_ORPHAN = -2
_NONE = -3

_FREE, _SRC, _SNK = 0, 1, 2


class FlowNetwork:
    """Residual network of paired arcs plus per-node terminal capacities."""

    def __init__(self, n_nodes: int, edges, capacities, terminal):
        self.n = n_nodes
        self.head: list[int] = []
        self.rcap: list[int] = []
        self.out: list[list[int]] = [[] for _ in range(n_nodes)]
        for (a, b), c in zip(edges, capacities):
            c = int(c)
            if c < 0:
                raise ValueError("negative capacity")
            k = len(self.head)
            self.head += [b, a]
            self.rcap += [c, c]
            self.out[a].append(k)
            self.out[b].append(k + 1)
        self.terminal = [int(t) for t in terminal]
        if len(self.terminal) != n_nodes:
            raise ValueError("one terminal capacity per node required")
        self.flow = 0

    def copy(self) -> "FlowNetwork":
        new = FlowNetwork.__new__(FlowNetwork)
        new.n = self.n
        new.head = self.head
        new.out = self.out
        new.rcap = list(self.rcap)
        new.terminal = list(self.terminal)
        new.flow = self.flow
        return new


def source_reachable(net: FlowNetwork) -> list[bool]:
    """Nodes reachable from the source through positive residual capacity."""
    seen = [t > 0 for t in net.terminal]
    queue = deque(v for v in range(net.n) if seen[v])
    head, rcap, out = net.head, net.rcap, net.out
    while queue:
        v = queue.popleft()
        for a in out[v]:
            u = head[a]
            if not seen[u] and rcap[a] > 0:
                seen[u] = True
                queue.append(u)
    return seen


def edmonds_karp(net: FlowNetwork) -> int:
    """Shortest augmenting paths; slow but simple, kept as a cross-check."""
    head, rcap, out, term = net.head, net.rcap, net.out, net.terminal
    n = net.n
    while True:
        parent = [_NONE] * n
        queue = deque()
        for v in range(n):
            if term[v] > 0:
                parent[v] = _TERMINAL
                queue.append(v)
        end = -1
        while queue and end < 0:
            v = queue.popleft()
            if term[v] < 0:
                end = v
                break
            for a in out[v]:
                u = head[a]
                if parent[u] == _NONE and rcap[a] > 0:
                    parent[u] = a
                    queue.append(u)
        if end < 0:
            return net.flow
        b = -term[end]
        v = end
        while parent[v] != _TERMINAL:
            a = parent[v]
            b = min(b, rcap[a])
            v = head[a ^ 1]
        b = min(b, term[v])
        term[v] -= b
        v = end
        while parent[v] != _TERMINAL:
            a = parent[v]
            rcap[a] -= b
            rcap[a ^ 1] += b
            v = head[a ^ 1]
        term[end] += b
        net.flow += b


def boykov_kolmogorov(net: FlowNetwork) -> int:
    """Max-flow with two search trees that are reused between augmentations.

    Follows Boykov & Kolmogorov (2004): grow source/sink trees from the
    terminals, augment along the path found where they touch, then re-adopt
    the orphans created by saturated arcs instead of restarting the search.
    Distance/timestamp marks keep the root checks during adoption cheap.
    """
    n = net.n
    head, rcap, out, term = net.head, net.rcap, net.out, net.terminal

    # a node with both terminal arcs would push through directly; the network
    # stores the net value, so no such nodes exist here
    tree = [_FREE] * n
    parent = [_NONE] * n
    dist = [0] * n
    stamp = [0] * n
    active = deque()
    in_active = [False] * n
    for v in range(n):
        if term[v] > 0:
            tree[v] = _SRC
        elif term[v] < 0:
            tree[v] = _SNK
        else:
            continue
        parent[v] = _TERMINAL
        dist[v] = 1
        active.append(v)
        in_active[v] = True

    time = 0
    orphans: deque[int] = deque()

    while True:
        # growth
        meet = -1
        while active:
            v = active[0]
            if tree[v] == _FREE:
                active.popleft()
                in_active[v] = False
                continue
            if tree[v] == _SRC:
                for a in out[v]:
                    if rcap[a] == 0:
                        continue
                    u = head[a]
                    tu = tree[u]
                    if tu == _FREE:
                        tree[u] = _SRC
                        parent[u] = a
                        dist[u] = dist[v] + 1
                        stamp[u] = stamp[v]
                        if not in_active[u]:
                            active.append(u)
                            in_active[u] = True
                    elif tu == _SNK:
                        meet = a
                        break
            else:
                for a in out[v]:
                    if rcap[a ^ 1] == 0:
                        continue
                    u = head[a]
                    tu = tree[u]
                    if tu == _FREE:
                        tree[u] = _SNK
                        parent[u] = a ^ 1
                        dist[u] = dist[v] + 1
                        stamp[u] = stamp[v]
                        if not in_active[u]:
                            active.append(u)
                            in_active[u] = True
                    elif tu == _SRC:
                        meet = a ^ 1
                        break
            if meet >= 0:
                break
            active.popleft()
            in_active[v] = False

        if meet < 0:
            return net.flow

        time += 1

        # augmentation along source-path + meet + sink-path
        x, y = head[meet ^ 1], head[meet]
        b = rcap[meet]
        v = x
        while parent[v] != _TERMINAL:
            a = parent[v]
            if rcap[a] < b:
                b = rcap[a]
            v = head[a ^ 1]
        if term[v] < b:
            b = term[v]
        v = y
        while parent[v] != _TERMINAL:
            a = parent[v]
            if rcap[a] < b:
                b = rcap[a]
            v = head[a]
        if -term[v] < b:
            b = -term[v]

        rcap[meet] -= b
        rcap[meet ^ 1] += b
        v = x
        while parent[v] != _TERMINAL:
            a = parent[v]
            rcap[a ^ 1] += b
            rcap[a] -= b
            w = head[a ^ 1]
            if rcap[a] == 0:
                parent[v] = _ORPHAN
                orphans.append(v)
            v = w
        term[v] -= b
        if term[v] == 0:
            parent[v] = _ORPHAN
            orphans.append(v)
        v = y
        while parent[v] != _TERMINAL:
            a = parent[v]
            rcap[a ^ 1] += b
            rcap[a] -= b
            w = head[a]
            if rcap[a] == 0:
                parent[v] = _ORPHAN
                orphans.append(v)
            v = w
        term[v] += b
        if term[v] == 0:
            parent[v] = _ORPHAN
            orphans.append(v)
        net.flow += b

        # adoption
        while orphans:
            v = orphans.popleft()
            side = tree[v]
            best_arc = _NONE
            best_d = None
            for a in out[v]:
                # candidate parent u with residual arc into v (source tree)
                # or from v (sink tree)
                u = head[a]
                if tree[u] != side:
                    continue
                if side == _SRC:
                    if rcap[a ^ 1] == 0:
                        continue
                    cand = a ^ 1
                else:
                    if rcap[a] == 0:
                        continue
                    cand = a
                # walk to the root, reusing stamped distances
                d = 0
                w = u
                ok = False
                while True:
                    if stamp[w] == time:
                        d += dist[w]
                        ok = True
                        break
                    pw = parent[w]
                    d += 1
                    if pw == _TERMINAL:
                        stamp[w] = time
                        dist[w] = 1
                        ok = True
                        break
                    if pw == _ORPHAN or pw == _NONE:
                        break
                    w = head[pw ^ 1] if side == _SRC else head[pw]
                if not ok:
                    continue
                if best_d is None or d < best_d:
                    best_d = d
                    best_arc = cand
                # stamp the path just verified
                w = u
                while stamp[w] != time:
                    stamp[w] = time
                    dist[w] = d
                    d -= 1
                    pw = parent[w]
                    w = head[pw ^ 1] if side == _SRC else head[pw]
            if best_arc != _NONE:
                parent[v] = best_arc
                stamp[v] = time
                dist[v] = best_d + 1
                continue
            # no valid parent: free v, reactivate neighbours, orphan children
            for a in out[v]:
                u = head[a]
                if tree[u] != side:
                    continue
                pu = parent[u]
                if side == _SRC:
                    if rcap[a ^ 1] > 0 and not in_active[u]:
                        active.append(u)
                        in_active[u] = True
                    if pu >= 0 and pu == a:
                        parent[u] = _ORPHAN
                        orphans.append(u)
                else:
                    if rcap[a] > 0 and not in_active[u]:
                        active.append(u)
                        in_active[u] = True
                    if pu >= 0 and pu == a ^ 1:
                        parent[u] = _ORPHAN
                        orphans.append(u)
            tree[v] = _FREE
            parent[v] = _NONE
