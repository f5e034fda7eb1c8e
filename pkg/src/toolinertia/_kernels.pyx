# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled versions of the hot loops in ``_pykernels``; same signatures, same results."""


cpdef list occurrences(const int[::1] path, const int[::1] window):
    cdef Py_ssize_t n = path.shape[0], k = window.shape[0]
    cdef Py_ssize_t start, j
    cdef int first
    cdef list hits = []
    if k == 0:
        return hits
    first = window[0]
    for start in range(n - k + 1):
        if path[start] != first:
            continue
        j = 1
        while j < k and path[start + j] == window[j]:
            j += 1
        if j == k:
            hits.append(start)
    return hits


cpdef list successor_hits(list paths, const int[::1] window):
    cdef Py_ssize_t k = window.shape[0]
    cdef Py_ssize_t pos, n, start, j
    cdef const int[::1] path
    cdef int first
    cdef list out = []
    if k == 0:
        return out
    first = window[0]
    for pos in range(len(paths)):
        path = paths[pos]
        n = path.shape[0]
        for start in range(n - k):
            if path[start] != first:
                continue
            j = 1
            while j < k and path[start + j] == window[j]:
                j += 1
            if j == k:
                out.append((pos, path[start + k]))
    return out


def ngram_counts(list sequences, int order, int skip):
    cdef dict codes = {}
    cdef const int[::1] seq
    cdef Py_ssize_t n, t, j
    cdef long long code, base = 1
    cdef int alphabet = 1
    for s in sequences:
        seq = s
        for t in range(seq.shape[0]):
            if seq[t] + 1 > alphabet:
                alphabet = seq[t] + 1
    # Fold each (order+1)-gram into one integer when it fits in 63 bits.
    cdef bint packed = True
    for j in range(order + 1):
        if base > (1LL << 62) // alphabet:
            packed = False
            break
        base *= alphabet
    if not packed:
        out = {}
        for s in sequences:
            seq = s
            for t in range(skip, seq.shape[0]):
                key = tuple([seq[j] for j in range(t - order, t + 1)])
                out[key] = out.get(key, 0) + 1
        return out
    for s in sequences:
        seq = s
        n = seq.shape[0]
        for t in range(skip, n):
            code = 0
            for j in range(t - order, t + 1):
                code = code * alphabet + seq[j]
            codes[code] = codes.get(code, 0) + 1
    out = {}
    for c, count in codes.items():
        code = c
        key = [0] * (order + 1)
        for j in range(order, -1, -1):
            key[j] = code % alphabet
            code //= alphabet
        out[tuple(key)] = count
    return out
