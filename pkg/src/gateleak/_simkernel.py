"""Compiled event loop for the gate-level simulator.

All timestamps are integer picoseconds. Events scheduled for the same time
are applied as one batch before any cell is re-evaluated; flip-flops sample
their D/EN pins and the global reset with the values held just before the
batch. Combinational outputs use inertial delay: a pending transition is
cancelled when the cell re-evaluates to the current output value before the
transition fires.
"""

import numpy as np
from numba import njit

INF = np.iinfo(np.int64).max


@njit(cache=True, nogil=True)
def _heap_push(ht, hn, hg, size, t, n, g):
    if size == ht.shape[0]:
        nt = np.empty(size * 2, np.int64)
        nn = np.empty(size * 2, np.int32)
        ng = np.empty(size * 2, np.int64)
        nt[:size] = ht
        nn[:size] = hn
        ng[:size] = hg
        ht, hn, hg = nt, nn, ng
    i = size
    while i > 0:
        p = (i - 1) >> 1
        if ht[p] <= t:
            break
        ht[i] = ht[p]
        hn[i] = hn[p]
        hg[i] = hg[p]
        i = p
    ht[i] = t
    hn[i] = n
    hg[i] = g
    return ht, hn, hg, size + 1


@njit(cache=True, nogil=True)
def _heap_pop(ht, hn, hg, size):
    t, n, g = ht[0], hn[0], hg[0]
    size -= 1
    if size > 0:
        lt, ln, lg = ht[size], hn[size], hg[size]
        i = 0
        while True:
            c = 2 * i + 1
            if c >= size:
                break
            if c + 1 < size and ht[c + 1] < ht[c]:
                c += 1
            if ht[c] >= lt:
                break
            ht[i] = ht[c]
            hn[i] = hn[c]
            hg[i] = hg[c]
            i = c
        ht[i] = lt
        hn[i] = ln
        hg[i] = lg
    return t, n, g, size


@njit(cache=True, nogil=True)
def settle(cell_class, cell_out, cell_nin, cell_in, cell_tt, topo, val):
    """Zero-delay evaluation of constant and combinational cells in topological order."""
    for k in range(topo.shape[0]):
        c = topo[k]
        idx = 0
        for p in range(cell_nin[c]):
            idx |= np.int64(val[cell_in[c, p]]) << p
        val[cell_out[c]] = (cell_tt[c] >> idx) & 1


@njit(cache=True, nogil=True)
def simulate(cell_class, cell_out, cell_nin, cell_in, cell_delay, cell_tt,
             fan_ptr, fan_cell, clock, reset, val,
             ext_t, ext_net, ext_val, t_end, rec_start, rec_end):
    """Run the event loop; ``val`` holds the settled initial net values and is updated in place.

    Returns (times, nets, values, snapshot): the recorded events with
    rec_start <= t < rec_end and the net values at rec_start.
    """
    n_nets = val.shape[0]
    n_cells = cell_out.shape[0]
    pend_t = np.full(n_nets, -1, np.int64)
    pend_v = np.zeros(n_nets, np.uint8)
    pend_g = np.zeros(n_nets, np.int64)
    changed_t = np.full(n_nets, -1, np.int64)
    old_v = np.zeros(n_nets, np.uint8)
    mark = np.full(n_cells, -1, np.int64)

    cap = 1024
    ht = np.empty(cap, np.int64)
    hn = np.empty(cap, np.int32)
    hg = np.empty(cap, np.int64)
    hsize = 0

    rcap = 4096
    rt = np.empty(rcap, np.int64)
    rn = np.empty(rcap, np.int32)
    rv = np.empty(rcap, np.uint8)
    nrec = 0
    snapshot = val.copy()
    snapped = False

    batch = np.empty(n_nets, np.int32)
    n_ext = ext_t.shape[0]
    ei = 0
    while True:
        t = INF
        if ei < n_ext:
            t = ext_t[ei]
        if hsize > 0 and ht[0] < t:
            t = ht[0]
        if t >= t_end:
            break
        if not snapped and t >= rec_start:
            snapshot[:] = val
            snapped = True

        nb = 0
        while ei < n_ext and ext_t[ei] == t:
            n = ext_net[ei]
            v = ext_val[ei]
            ei += 1
            if val[n] != v:
                old_v[n] = val[n]
                changed_t[n] = t
                val[n] = v
                batch[nb] = n
                nb += 1
        while hsize > 0 and ht[0] == t:
            _, n, g, hsize = _heap_pop(ht, hn, hg, hsize)
            if pend_g[n] != g or pend_t[n] != t:
                continue
            pend_t[n] = -1
            v = pend_v[n]
            if val[n] != v:
                old_v[n] = val[n]
                changed_t[n] = t
                val[n] = v
                batch[nb] = n
                nb += 1
        if nb == 0:
            continue
        order = np.sort(batch[:nb])

        if rec_start <= t < rec_end:
            if nrec + nb > rcap:
                while nrec + nb > rcap:
                    rcap *= 2
                nt = np.empty(rcap, np.int64)
                nn = np.empty(rcap, np.int32)
                nv = np.empty(rcap, np.uint8)
                nt[:nrec] = rt[:nrec]
                nn[:nrec] = rn[:nrec]
                nv[:nrec] = rv[:nrec]
                rt, rn, rv = nt, nn, nv
            for k in range(nb):
                n = order[k]
                rt[nrec] = t
                rn[nrec] = n
                rv[nrec] = val[n]
                nrec += 1

        clock_rose = clock >= 0 and changed_t[clock] == t and val[clock] == 1
        for k in range(nb):
            n = order[k]
            for j in range(fan_ptr[n], fan_ptr[n + 1]):
                c = fan_cell[j]
                if mark[c] == t:
                    continue
                mark[c] = t
                cls = cell_class[c]
                out = cell_out[c]
                if cls == 0:
                    idx = 0
                    for p in range(cell_nin[c]):
                        idx |= np.int64(val[cell_in[c, p]]) << p
                    nv_ = np.uint8((cell_tt[c] >> idx) & 1)
                elif cls == 1 or cls == 2:
                    if not clock_rose:
                        continue
                    rst = 0
                    if reset >= 0:
                        rst = old_v[reset] if changed_t[reset] == t else val[reset]
                    d = cell_in[c, 0]
                    dv = old_v[d] if changed_t[d] == t else val[d]
                    if rst == 1:
                        nv_ = np.uint8(0)
                    else:
                        if cls == 2:
                            e = cell_in[c, 1]
                            ev = old_v[e] if changed_t[e] == t else val[e]
                            if ev == 0:
                                continue
                        nv_ = dv
                else:
                    continue
                # inertial scheduling on the output net
                if pend_t[out] >= 0:
                    if nv_ != pend_v[out]:
                        pend_t[out] = -1
                        pend_g[out] += 1
                elif nv_ != val[out]:
                    tf = t + cell_delay[c]
                    pend_g[out] += 1
                    pend_t[out] = tf
                    pend_v[out] = nv_
                    ht, hn, hg, hsize = _heap_push(ht, hn, hg, hsize, tf, out, pend_g[out])

    if not snapped:
        snapshot[:] = val
    return rt[:nrec].copy(), rn[:nrec].copy(), rv[:nrec].copy(), snapshot
