"""Small shortest-path helpers over adjacency dicts."""
from __future__ import annotations

import heapq
from typing import Hashable, Mapping


def hop_shortest_paths(source, adj: Mapping) -> dict:
    """Hop-count shortest paths from ``source``.

    Ties are broken towards the smallest next hop, then the smallest parent.
    Returns ``{dst: [source, ..., dst]}`` for every reachable dst (source excluded).
    """
    first = {source: None}
    parent = {source: None}
    frontier = [source]
    while frontier:
        best: dict = {}
        for u in frontier:
            fu = first[u]
            for v in adj.get(u, ()):
                if v in first:
                    continue
                key = (v if fu is None else fu, u)
                cur = best.get(v)
                if cur is None or key < cur:
                    best[v] = key
        for v, (f, p) in best.items():
            first[v] = f
            parent[v] = p
        frontier = list(best)
    paths = {}
    for node in parent:
        if node == source:
            continue
        path = [node]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]])
        path.reverse()
        paths[node] = path
    return paths


def weighted_shortest_path(src, dst, adj: Mapping[Hashable, Mapping[Hashable, float]]):
    """Dijkstra on positive edge weights; ``None`` if dst is unreachable."""
    dist = {src: 0.0}
    parent = {src: None}
    heap = [(0.0, src)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        if u == dst:
            path = [u]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        done.add(u)
        for v, w in adj.get(u, {}).items():
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    return None


def path_edges(path) -> list[tuple]:
    return list(zip(path, path[1:]))


def contains_edge(path, u, v) -> bool:
    for a, b in zip(path, path[1:]):
        if (a == u and b == v) or (a == v and b == u):
            return True
    return False


def undirected(edges) -> dict:
    adj: dict = {}
    for u, v in edges:
        if u == v:
            continue
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    return adj
