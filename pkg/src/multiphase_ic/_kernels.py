"""Compiled reachability kernels over packed live-graph edge bitmaps.

Live graph ``j`` keeps edge ``e`` iff bit ``e`` of ``packed[j]`` is set, with
the big-endian bit order used by ``np.packbits``. Edges are walked through the
base graph's out-CSR ``(indptr, targets, eids)``.

Every kernel writes one result per live graph; callers reduce with integer
sums, so outputs do not depend on the thread count.
"""

import numpy as np
from numba import config, njit, prange

# TBB on this platform is often too old and only triggers warnings.
if config.THREADING_LAYER == "default":
    config.THREADING_LAYER = "workqueue"


@njit(inline="always")
def _live(packed, j, e):
    return (packed[j, e >> 3] >> (7 - (e & 7))) & 1


@njit(inline="always")
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(parallel=True, cache=True)
def close_states(indptr, targets, eids, packed, influenced, seeds, seed_ptr):
    """Add ``seeds[seed_ptr[j]:seed_ptr[j+1]]`` to row ``j`` and close under reachability.

    ``influenced`` must already be reachability-closed; it is updated in place.
    Returns the number of nodes added per live graph.
    """
    m_graphs, n = influenced.shape
    added = np.zeros(m_graphs, np.int64)
    for j in prange(m_graphs):
        stack = np.empty(n, np.int64)
        top = 0
        count = 0
        for t in range(seed_ptr[j], seed_ptr[j + 1]):
            s = seeds[t]
            if not influenced[j, s]:
                influenced[j, s] = True
                stack[top] = s
                top += 1
                count += 1
        while top > 0:
            top -= 1
            u = stack[top]
            for k in range(indptr[u], indptr[u + 1]):
                if _live(packed, j, eids[k]):
                    w = targets[k]
                    if not influenced[j, w]:
                        influenced[j, w] = True
                        stack[top] = w
                        top += 1
                        count += 1
        added[j] = count
    return added


@njit(parallel=True, cache=True)
def residual_gain(indptr, targets, eids, packed, blocked, covered, v, commit):
    """Nodes newly reachable from ``v`` in each live graph.

    The walk avoids ``blocked`` nodes (shared by all graphs) and the per-graph
    ``covered`` rows. With ``commit`` the reached nodes are added to ``covered``;
    otherwise ``covered`` is left untouched. Returns per-graph counts.
    """
    m_graphs, n = covered.shape
    gains = np.zeros(m_graphs, np.int64)
    if blocked[v]:
        return gains
    for j in prange(m_graphs):
        if covered[j, v]:
            continue
        queue = np.empty(n, np.int64)
        queue[0] = v
        covered[j, v] = True
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            for k in range(indptr[u], indptr[u + 1]):
                if _live(packed, j, eids[k]):
                    w = targets[k]
                    if not blocked[w] and not covered[j, w]:
                        covered[j, w] = True
                        queue[tail] = w
                        tail += 1
        gains[j] = tail
        if not commit:
            for t in range(tail):
                covered[j, queue[t]] = False
    return gains


@njit(cache=True)
def strong_components(indptr, targets, eids, packed, j, blocked):
    """Tarjan SCCs of live graph ``j`` restricted to unblocked nodes.

    Components are numbered in reverse topological order: every component
    reachable from ``c`` has an id ``<= c``. Blocked nodes get id -1.
    """
    n = len(indptr) - 1
    index = np.full(n, -1, np.int64)
    low = np.zeros(n, np.int64)
    onstack = np.zeros(n, np.bool_)
    stack = np.empty(n, np.int64)
    call_node = np.empty(n, np.int64)
    call_edge = np.empty(n, np.int64)
    comp = np.full(n, -1, np.int64)
    sp = 0
    counter = 0
    ncomp = 0
    for s in range(n):
        if blocked[s] or index[s] != -1:
            continue
        index[s] = counter
        low[s] = counter
        counter += 1
        stack[sp] = s
        sp += 1
        onstack[s] = True
        call_node[0] = s
        call_edge[0] = indptr[s]
        csp = 1
        while csp > 0:
            u = call_node[csp - 1]
            k = call_edge[csp - 1]
            if k < indptr[u + 1]:
                call_edge[csp - 1] = k + 1
                if not _live(packed, j, eids[k]):
                    continue
                w = targets[k]
                if blocked[w]:
                    continue
                if index[w] == -1:
                    index[w] = counter
                    low[w] = counter
                    counter += 1
                    stack[sp] = w
                    sp += 1
                    onstack[w] = True
                    call_node[csp] = w
                    call_edge[csp] = indptr[w]
                    csp += 1
                elif onstack[w] and index[w] < low[u]:
                    low[u] = index[w]
            else:
                csp -= 1
                if low[u] == index[u]:
                    while True:
                        sp -= 1
                        x = stack[sp]
                        onstack[x] = False
                        comp[x] = ncomp
                        if x == u:
                            break
                    ncomp += 1
                if csp > 0:
                    parent = call_node[csp - 1]
                    if low[u] < low[parent]:
                        low[parent] = low[u]
    return comp, ncomp


@njit(cache=True)
def _reach_sizes_one(indptr, targets, eids, packed, j, blocked, out):
    n = len(indptr) - 1
    comp, ncomp = strong_components(indptr, targets, eids, packed, j, blocked)
    words = (n + 63) // 64
    bits = np.zeros((ncomp, words), np.uint64)
    # members grouped by component id
    counts = np.zeros(ncomp + 1, np.int64)
    for u in range(n):
        if comp[u] >= 0:
            counts[comp[u] + 1] += 1
    for c in range(ncomp):
        counts[c + 1] += counts[c]
    fill = counts[:-1].copy()
    members = np.empty(counts[ncomp], np.int64)
    for u in range(n):
        c = comp[u]
        if c >= 0:
            members[fill[c]] = u
            fill[c] += 1
            bits[c, u >> 6] |= np.uint64(1) << np.uint64(u & 63)
    sizes = np.zeros(ncomp, np.int64)
    for c in range(ncomp):
        for t in range(counts[c], counts[c + 1]):
            u = members[t]
            for k in range(indptr[u], indptr[u + 1]):
                if _live(packed, j, eids[k]):
                    w = targets[k]
                    cw = comp[w]
                    if cw >= 0 and cw != c:
                        for q in range(words):
                            bits[c, q] |= bits[cw, q]
        total = 0
        for q in range(words):
            total += _popcount(bits[c, q])
        sizes[c] = total
    for u in range(n):
        if comp[u] >= 0:
            out[u] = sizes[comp[u]]


@njit(parallel=True, cache=True)
def reach_sizes(indptr, targets, eids, packed, blocked):
    """Per live graph, number of unblocked nodes reachable from each node.

    Returns an ``(M, n)`` array; blocked nodes report 0.
    """
    m_graphs = packed.shape[0]
    n = len(indptr) - 1
    out = np.zeros((m_graphs, n), np.int64)
    for j in prange(m_graphs):
        _reach_sizes_one(indptr, targets, eids, packed, j, blocked, out[j])
    return out


@njit(cache=True)
def _live_adjacency(indptr, targets, eids, packed, j, blocked):
    """Compact CSR of live edges of graph ``j`` between unblocked nodes."""
    n = len(indptr) - 1
    ptr = np.zeros(n + 1, np.int64)
    adj = np.empty(len(targets), np.int64)
    t = 0
    for u in range(n):
        if not blocked[u]:
            for k in range(indptr[u], indptr[u + 1]):
                w = targets[k]
                if not blocked[w] and _live(packed, j, eids[k]):
                    adj[t] = w
                    t += 1
        ptr[u + 1] = t
    return ptr, adj


@njit(cache=True)
def _tarjan_csr(ptr, adj, blocked):
    n = len(ptr) - 1
    index = np.full(n, -1, np.int64)
    low = np.zeros(n, np.int64)
    onstack = np.zeros(n, np.bool_)
    stack = np.empty(n, np.int64)
    call_node = np.empty(n, np.int64)
    call_edge = np.empty(n, np.int64)
    comp = np.full(n, -1, np.int64)
    sp = 0
    counter = 0
    ncomp = 0
    for s in range(n):
        if blocked[s] or index[s] != -1:
            continue
        index[s] = counter
        low[s] = counter
        counter += 1
        stack[sp] = s
        sp += 1
        onstack[s] = True
        call_node[0] = s
        call_edge[0] = ptr[s]
        csp = 1
        while csp > 0:
            u = call_node[csp - 1]
            k = call_edge[csp - 1]
            if k < ptr[u + 1]:
                call_edge[csp - 1] = k + 1
                w = adj[k]
                if index[w] == -1:
                    index[w] = counter
                    low[w] = counter
                    counter += 1
                    stack[sp] = w
                    sp += 1
                    onstack[w] = True
                    call_node[csp] = w
                    call_edge[csp] = ptr[w]
                    csp += 1
                elif onstack[w] and index[w] < low[u]:
                    low[u] = index[w]
            else:
                csp -= 1
                if low[u] == index[u]:
                    while True:
                        sp -= 1
                        x = stack[sp]
                        onstack[x] = False
                        comp[x] = ncomp
                        if x == u:
                            break
                    ncomp += 1
                if csp > 0:
                    parent = call_node[csp - 1]
                    if low[u] < low[parent]:
                        low[parent] = low[u]
    return comp, ncomp


@njit(cache=True)
def _node_bits_one(indptr, targets, eids, packed, j, blocked, out):
    """Write the residual reach bitset of every node of live graph ``j`` into ``out``."""
    n = len(indptr) - 1
    words = out.shape[1]
    ptr, adj = _live_adjacency(indptr, targets, eids, packed, j, blocked)
    comp, ncomp = _tarjan_csr(ptr, adj, blocked)
    counts = np.zeros(ncomp + 1, np.int64)
    for u in range(n):
        if comp[u] >= 0:
            counts[comp[u] + 1] += 1
    for c in range(ncomp):
        counts[c + 1] += counts[c]
    fill = counts[:-1].copy()
    members = np.empty(counts[ncomp], np.int64)
    for u in range(n):
        c = comp[u]
        if c >= 0:
            members[fill[c]] = u
            fill[c] += 1
    for c in range(ncomp):
        lead = members[counts[c]]
        for t in range(counts[c], counts[c + 1]):
            u = members[t]
            out[lead, u >> 6] |= np.uint64(1) << np.uint64(u & 63)
        for t in range(counts[c], counts[c + 1]):
            u = members[t]
            for k in range(ptr[u], ptr[u + 1]):
                cw = comp[adj[k]]
                if cw != c:
                    src = members[counts[cw]]
                    for q in range(words):
                        out[lead, q] |= out[src, q]
        for t in range(counts[c] + 1, counts[c + 1]):
            u = members[t]
            for q in range(words):
                out[u, q] = out[lead, q]


@njit(parallel=True, cache=True)
def residual_bitsets(indptr, targets, eids, packed, blocked):
    """``(M, n, words)`` residual reach bitsets; blocked nodes get empty rows."""
    m_graphs = packed.shape[0]
    n = len(indptr) - 1
    words = (n + 63) // 64
    bits = np.zeros((m_graphs, n, words), np.uint64)
    for j in prange(m_graphs):
        _node_bits_one(indptr, targets, eids, packed, j, blocked, bits[j])
    return bits


@njit(cache=True)
def _masked_total(bits, covered, v):
    total = 0
    for j in range(bits.shape[0]):
        for q in range(bits.shape[2]):
            total += _popcount(bits[j, v, q] & ~covered[j, q])
    return total


@njit(cache=True)
def lazy_greedy_bitsets(bits, blocked, budget):
    """Lazy greedy on precomputed reach bitsets.

    Returns ``(seeds, gains)``. Picks the largest exact marginal coverage,
    lowest node id on ties, re-evaluating stale bounds only when they reach
    the top.
    """
    m_graphs, n, words = bits.shape
    bound = np.full(n, -1, np.int64)
    stamp = np.zeros(n, np.int64)
    for v in range(n):
        if not blocked[v]:
            total = 0
            for j in range(m_graphs):
                for q in range(words):
                    total += _popcount(bits[j, v, q])
            bound[v] = total
    covered = np.zeros((m_graphs, words), np.uint64)
    seeds = np.empty(budget, np.int64)
    gains = np.empty(budget, np.int64)
    picked = 0
    while picked < budget:
        best = -1
        for v in range(n):
            if bound[v] >= 0 and (best < 0 or bound[v] > bound[best]):
                best = v
        if stamp[best] == picked:
            seeds[picked] = best
            gains[picked] = bound[best]
            for j in range(m_graphs):
                for q in range(words):
                    covered[j, q] |= bits[j, best, q]
            bound[best] = -1
            picked += 1
        else:
            bound[best] = _masked_total(bits, covered, best)
            stamp[best] = picked
    return seeds, gains
