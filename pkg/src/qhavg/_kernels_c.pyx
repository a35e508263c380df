# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled grid Dijkstra; mirrors ``_kernels_py.grid_dijkstra`` operation for operation."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, realloc, free
from libc.math cimport INFINITY

cnp.import_array()


cdef struct Entry:
    double key
    Py_ssize_t idx


cdef inline bint _less(Entry a, Entry b) noexcept nogil:
    return a.key < b.key or (a.key == b.key and a.idx < b.idx)


cdef int _push(Entry** heap, Py_ssize_t* size, Py_ssize_t* cap, double key, Py_ssize_t idx) noexcept nogil:
    cdef Entry* h = heap[0]
    cdef Entry* grown
    cdef Py_ssize_t i, parent
    cdef Entry item
    if size[0] == cap[0]:
        grown = <Entry*> realloc(h, 2 * cap[0] * sizeof(Entry))
        if grown == NULL:
            return -1
        heap[0] = grown
        h = grown
        cap[0] = 2 * cap[0]
    item.key = key
    item.idx = idx
    i = size[0]
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if _less(item, h[parent]):
            h[i] = h[parent]
            i = parent
        else:
            break
    h[i] = item
    return 0


cdef Entry _pop(Entry* h, Py_ssize_t* size) noexcept nogil:
    cdef Entry top = h[0]
    cdef Entry last
    cdef Py_ssize_t i = 0, child, n
    size[0] -= 1
    n = size[0]
    if n > 0:
        last = h[n]
        while True:
            child = 2 * i + 1
            if child >= n:
                break
            if child + 1 < n and _less(h[child + 1], h[child]):
                child += 1
            if _less(h[child], last):
                h[i] = h[child]
                i = child
            else:
                break
        h[i] = last
    return top


def grid_dijkstra(const unsigned char[::1] mask,
                  const double[::1] inv_d,
                  const Py_ssize_t[::1] offsets,
                  const double[::1] lengths,
                  Py_ssize_t source):
    """Shortest path lengths on the masked grid graph.

    Edge (u, u + offsets[k]) has weight lengths[k] * 0.5 * (inv_d[u] + inv_d[v]).
    Returns (dist, pred) with dist = inf and pred = -1 off the reached set.
    """
    cdef Py_ssize_t ncell = mask.shape[0]
    cdef Py_ssize_t nnb = offsets.shape[0]
    dist_arr = np.full(ncell, np.inf)
    pred_arr = np.full(ncell, -1, dtype=np.intp)
    done_arr = np.zeros(ncell, dtype=np.uint8)
    cdef double[::1] dist = dist_arr
    cdef Py_ssize_t[::1] pred = pred_arr
    cdef unsigned char[::1] done = done_arr
    cdef Py_ssize_t cap = 1024, size = 0
    cdef Entry* heap = <Entry*> malloc(cap * sizeof(Entry))
    cdef Entry cur
    cdef Py_ssize_t u, v, k
    cdef double nd
    cdef int err = 0
    if heap == NULL:
        raise MemoryError()
    if not mask[source]:
        free(heap)
        raise ValueError("source cell is outside the mask")
    with nogil:
        dist[source] = 0.0
        err = _push(&heap, &size, &cap, 0.0, source)
        while size > 0 and err == 0:
            cur = _pop(heap, &size)
            u = cur.idx
            if done[u] or cur.key > dist[u]:
                continue
            done[u] = 1
            for k in range(nnb):
                v = u + offsets[k]
                if not mask[v] or done[v]:
                    continue
                nd = dist[u] + lengths[k] * 0.5 * (inv_d[u] + inv_d[v])
                if nd < dist[v]:
                    dist[v] = nd
                    pred[v] = u
                    err = _push(&heap, &size, &cap, nd, v)
                    if err != 0:
                        break
    free(heap)
    if err != 0:
        raise MemoryError()
    return dist_arr, pred_arr
