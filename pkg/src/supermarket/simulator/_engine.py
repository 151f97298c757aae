"""Event-loop kernel for the finite-n d-choices system.

Single source for both backends: ``run_replication_numba`` is the
numba-compiled version of the same function that ``run_replication_python``
runs in plain Python/numpy.  All randomness comes from an explicit
splitmix64 state threaded through the loop, so the two backends produce
bit-identical results and a replication is reproducible from its 64-bit
seed alone.

State per queue: length, FIFO ring of arrival times (for sojourns), plus
lazy per-queue census accumulation into a time-at-length histogram.  The
event heap is keyed by (time, sequence number) and holds at most one
pending arrival plus one pending departure per busy server.
"""

import math

import numpy as np

U64 = np.uint64

# service family codes
FAM_EXP = 0
FAM_ERLANG = 1
FAM_WEIBULL = 2
FAM_POWERLAW = 3
FAM_PH = 4

# kernel status codes
OK = 0
RING_OVERFLOW = 1
CENSUS_OVERFLOW = 2


def derive_seed(seed: int, index: int) -> np.uint64:
    """Per-replication stream seed: splitmix64 finalizer of base + index step."""
    gold = U64(0x9E3779B97F4A7C15)
    with np.errstate(over="ignore"):
        z = U64(seed) + U64(index + 1) * gold
        z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
        return z ^ (z >> U64(31))


def _replication(n, lam_total, d, without_replacement,
                 fam, p1, p2, ph_alpha, ph_T, ph_T0,
                 horizon, warmup, seed,
                 initial_tails, sample_times, snap_kmax,
                 maxlen, ring_cap):
    """One replication.

    Returns (status, tlen, area, sojourn_sum, sojourn_count, snapshots):
    tlen[L] is total queue-time at exact length L inside [warmup, horizon],
    area the matching integral of total length, snapshots[i, k-1] the
    instantaneous fraction of queues with >= k customers at sample_times[i].
    """
    gold = U64(0x9E3779B97F4A7C15)
    mix1 = U64(0xBF58476D1CE4E5B9)
    mix2 = U64(0x94D049BB133111EB)

    def u01(state):
        # splitmix64 step; output strictly inside (0, 1)
        state = state + gold
        z = state
        z = (z ^ (z >> U64(30))) * mix1
        z = (z ^ (z >> U64(27))) * mix2
        z = z ^ (z >> U64(31))
        return state, (np.float64(z >> U64(11)) + 0.5) * (2.0 ** -53)

    def uint_below(state, bound):
        state = state + gold
        z = state
        z = (z ^ (z >> U64(30))) * mix1
        z = (z ^ (z >> U64(27))) * mix2
        z = z ^ (z >> U64(31))
        return state, np.int64(z % U64(bound))

    def sample_service(state):
        if fam == FAM_EXP:
            state, u = u01(state)
            return state, -math.log(u) / p1
        if fam == FAM_ERLANG:
            total = 0.0
            for _ in range(int(p1)):
                state, u = u01(state)
                total += -math.log(u) / p2
            return state, total
        if fam == FAM_WEIBULL:
            state, u = u01(state)
            return state, (-math.log(u)) ** (1.0 / p1) / p2
        if fam == FAM_POWERLAW:
            state, u = u01(state)
            x = u ** (-1.0 / p2) - p1
            return state, (x if x > 0.0 else 0.0)
        # phase walk: initial phase from ph_alpha, exp sojourns, jump or exit
        state, u = u01(state)
        m = ph_alpha.shape[0]
        phase = m - 1
        acc = 0.0
        for i in range(m):
            acc += ph_alpha[i]
            if u < acc:
                phase = i
                break
        total = 0.0
        while True:
            rate = -ph_T[phase, phase]
            state, u = u01(state)
            total += -math.log(u) / rate
            state, u = u01(state)
            target = u * rate
            acc = ph_T0[phase]
            if target < acc:
                return state, total
            nxt = -1
            for j in range(m):
                if j == phase:
                    continue
                acc += ph_T[phase, j]
                if target < acc:
                    nxt = j
                    break
            if nxt < 0:
                return state, total
            phase = nxt

    qlen = np.zeros(n, dtype=np.int64)
    last_change = np.zeros(n, dtype=np.float64)
    tlen = np.zeros(maxlen, dtype=np.float64)
    ring = np.zeros((n, ring_cap), dtype=np.float64)
    head = np.zeros(n, dtype=np.int64)
    count = np.zeros(n, dtype=np.int64)
    ge_counts = np.zeros(snap_kmax + 1, dtype=np.int64)
    n_samples = sample_times.shape[0]
    snaps = np.zeros((n_samples, snap_kmax), dtype=np.float64)

    heap_cap = n + 2
    h_time = np.zeros(heap_cap, dtype=np.float64)
    h_seq = np.zeros(heap_cap, dtype=np.int64)
    h_kind = np.zeros(heap_cap, dtype=np.int8)   # 0 arrival, 1 departure
    h_srv = np.zeros(heap_cap, dtype=np.int64)
    h_size = 0
    seq = 0

    def heap_push(h_size, seq, t, kind, srv):
        i = h_size
        h_time[i] = t
        h_seq[i] = seq
        h_kind[i] = kind
        h_srv[i] = srv
        while i > 0:
            p = (i - 1) // 2
            if h_time[p] > h_time[i] or (h_time[p] == h_time[i] and h_seq[p] > h_seq[i]):
                h_time[p], h_time[i] = h_time[i], h_time[p]
                h_seq[p], h_seq[i] = h_seq[i], h_seq[p]
                h_kind[p], h_kind[i] = h_kind[i], h_kind[p]
                h_srv[p], h_srv[i] = h_srv[i], h_srv[p]
                i = p
            else:
                break
        return h_size + 1, seq + 1

    def heap_pop(h_size):
        t = h_time[0]
        kind = h_kind[0]
        srv = h_srv[0]
        h_size -= 1
        h_time[0] = h_time[h_size]
        h_seq[0] = h_seq[h_size]
        h_kind[0] = h_kind[h_size]
        h_srv[0] = h_srv[h_size]
        i = 0
        while True:
            l = 2 * i + 1
            r = l + 1
            sm = i
            if l < h_size and (h_time[l] < h_time[sm] or (h_time[l] == h_time[sm] and h_seq[l] < h_seq[sm])):
                sm = l
            if r < h_size and (h_time[r] < h_time[sm] or (h_time[r] == h_time[sm] and h_seq[r] < h_seq[sm])):
                sm = r
            if sm == i:
                break
            h_time[i], h_time[sm] = h_time[sm], h_time[i]
            h_seq[i], h_seq[sm] = h_seq[sm], h_seq[i]
            h_kind[i], h_kind[sm] = h_kind[sm], h_kind[i]
            h_srv[i], h_srv[sm] = h_srv[sm], h_srv[i]
            i = sm
        return h_size, t, kind, srv

    def census(srv, now):
        # lazily account the time this queue spent at its current length
        lo = last_change[srv]
        if lo < warmup:
            lo = warmup
        hi = now
        if hi > horizon:
            hi = horizon
        if hi > lo:
            length = qlen[srv]
            if length < maxlen:
                tlen[length] += hi - lo
            return length * (hi - lo)
        return 0.0

    state = U64(seed)
    status = OK
    sojourn_sum = 0.0
    sojourn_count = 0
    area = 0.0
    picks = np.empty(d, dtype=np.int64)

    # non-empty start: queue i begins at the number of levels whose target
    # count round(n * u_k) still covers i; fresh service sampled at t = 0
    k_init = initial_tails.shape[0]
    for i in range(n):
        length = 0
        for k in range(k_init):
            if i < int(round(initial_tails[k] * n)):
                length = k + 1
        if length > 0:
            if length >= ring_cap or length >= maxlen:
                return RING_OVERFLOW, tlen, area, sojourn_sum, sojourn_count, snaps
            qlen[i] = length
            count[i] = length
            top = length if length < snap_kmax else snap_kmax
            for k in range(1, top + 1):
                ge_counts[k] += 1
            state, svc = sample_service(state)
            h_size, seq = heap_push(h_size, seq, svc, 1, i)

    state, u = u01(state)
    h_size, seq = heap_push(h_size, seq, -math.log(u) / lam_total, 0, -1)

    sample_i = 0
    while h_size > 0:
        h_size, now, kind, srv = heap_pop(h_size)
        while sample_i < n_samples and sample_times[sample_i] < now:
            for k in range(1, snap_kmax + 1):
                snaps[sample_i, k - 1] = ge_counts[k] / n
            sample_i += 1
        if kind == 0:
            if now > horizon:
                continue
            for j in range(d):
                state, idx = uint_below(state, n)
                if without_replacement:
                    while True:
                        dup = False
                        for jj in range(j):
                            if picks[jj] == idx:
                                dup = True
                                break
                        if not dup:
                            break
                        state, idx = uint_below(state, n)
                picks[j] = idx
            best = picks[0]
            best_len = qlen[best]
            ties = 1
            for j in range(1, d):
                lj = qlen[picks[j]]
                if lj < best_len:
                    best = picks[j]
                    best_len = lj
                    ties = 1
                elif lj == best_len:
                    ties += 1
            if ties > 1:
                state, pick = uint_below(state, ties)
                c = 0
                for j in range(d):
                    if qlen[picks[j]] == best_len:
                        if c == pick:
                            best = picks[j]
                            break
                        c += 1
            area += census(best, now)
            last_change[best] = now
            if count[best] >= ring_cap:
                status = RING_OVERFLOW
                break
            ring[best, (head[best] + count[best]) % ring_cap] = now
            count[best] += 1
            qlen[best] += 1
            if qlen[best] >= maxlen:
                status = CENSUS_OVERFLOW
                break
            if qlen[best] <= snap_kmax:
                ge_counts[qlen[best]] += 1
            if qlen[best] == 1:
                state, svc = sample_service(state)
                h_size, seq = heap_push(h_size, seq, now + svc, 1, best)
            state, u = u01(state)
            t_next = now - math.log(u) / lam_total
            if t_next <= horizon:
                h_size, seq = heap_push(h_size, seq, t_next, 0, -1)
        else:
            area += census(srv, now)
            last_change[srv] = now
            arrived = ring[srv, head[srv]]
            head[srv] = (head[srv] + 1) % ring_cap
            count[srv] -= 1
            if qlen[srv] <= snap_kmax:
                ge_counts[qlen[srv]] -= 1
            qlen[srv] -= 1
            if arrived >= warmup:
                sojourn_sum += now - arrived
                sojourn_count += 1
            if qlen[srv] > 0:
                state, svc = sample_service(state)
                h_size, seq = heap_push(h_size, seq, now + svc, 1, srv)

    while sample_i < n_samples:
        for k in range(1, snap_kmax + 1):
            snaps[sample_i, k - 1] = ge_counts[k] / n
        sample_i += 1
    for srv in range(n):
        area += census(srv, horizon)
    return status, tlen, area, sojourn_sum, sojourn_count, snaps


run_replication_python = _replication

try:
    import numba

    run_replication_numba = numba.njit(cache=True, nogil=True)(_replication)
except ImportError:  # pragma: no cover - numba is an install-time dependency
    run_replication_numba = None
