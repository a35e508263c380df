"""Pure Python grid Dijkstra, used when the compiled kernel is unavailable."""
import heapq

import numpy as np


def grid_dijkstra(mask, inv_d, offsets, lengths, source):
    """Shortest path lengths on the masked grid graph.

    Same contract and tie-breaking as the compiled kernel: heap entries are
    ``(distance, flat index)`` and predecessors change only on strict
    improvement, so both produce identical arrays.
    """
    ncell = len(mask)
    if not mask[source]:
        raise ValueError("source cell is outside the mask")
    mask_l = mask.tolist()
    inv = inv_d.tolist()
    nbrs = list(zip([int(o) for o in offsets], [float(x) for x in lengths]))
    dist = [float("inf")] * ncell
    pred = [-1] * ncell
    done = [False] * ncell
    dist[source] = 0.0
    heap = [(0.0, source)]
    pop, push = heapq.heappop, heapq.heappush
    while heap:
        du, u = pop(heap)
        if done[u] or du > dist[u]:
            continue
        done[u] = True
        iu = inv[u]
        for off, ln in nbrs:
            v = u + off
            if not mask_l[v] or done[v]:
                continue
            nd = dist[u] + ln * 0.5 * (iu + inv[v])
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                push(heap, (nd, v))
    return np.array(dist), np.array(pred, dtype=np.intp)
