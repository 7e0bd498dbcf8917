# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: all-sources BFS and packed GF(2) elimination."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t, uint64_t

cnp.import_array()


cdef extern from *:
    int __builtin_ctzll(unsigned long long) nogil


def bfs_all(indptr, indices, int n):
    cdef int32_t[::1] ptr = np.ascontiguousarray(indptr, dtype=np.int32)
    cdef int32_t[::1] idx = np.ascontiguousarray(indices, dtype=np.int32)
    parent_a = np.full((n, n), -1, dtype=np.int32)
    dist_a = np.full((n, n), -1, dtype=np.int32)
    branch_a = np.full((n, n), -1, dtype=np.int32)
    order_a = np.full((n, n), -1, dtype=np.int32)
    cdef int32_t[:, ::1] parent = parent_a
    cdef int32_t[:, ::1] dist = dist_a
    cdef int32_t[:, ::1] branch = branch_a
    cdef int32_t[:, ::1] order = order_a
    cdef int v, u, w, k, head, tail, du
    with nogil:
        for v in range(n):
            dist[v, v] = 0
            order[v, 0] = v
            head = 0
            tail = 1
            while head < tail:
                u = order[v, head]
                head += 1
                du = dist[v, u] + 1
                for k in range(ptr[u], ptr[u + 1]):
                    w = idx[k]
                    if dist[v, w] < 0:
                        dist[v, w] = du
                        parent[v, w] = u
                        if u == v:
                            branch[v, w] = w
                        else:
                            branch[v, w] = branch[v, u]
                        order[v, tail] = w
                        tail += 1
    return parent_a, dist_a, branch_a, order_a


cdef class Gf2Eliminator:
    """Incremental GF(2) row echelon form over packed 64-bit words."""

    cdef readonly int m
    cdef int words
    cdef int _rank
    cdef uint64_t[:, ::1] rows
    cdef int32_t[::1] pivot_row
    cdef uint64_t[::1] buf
    cdef object _rows_owner, _pivot_owner, _buf_owner

    def __init__(self, int m):
        self.m = m
        self.words = (m + 63) // 64 if m > 0 else 1
        self._rank = 0
        self._rows_owner = np.zeros((max(m, 1), self.words), dtype=np.uint64)
        self._pivot_owner = np.full(max(m, 1), -1, dtype=np.int32)
        self._buf_owner = np.zeros(self.words, dtype=np.uint64)
        self.rows = self._rows_owner
        self.pivot_row = self._pivot_owner
        self.buf = self._buf_owner

    @property
    def rank(self):
        return self._rank

    cdef int _reduce(self) nogil:
        # returns the lowest set bit of the reduced buffer, or -1 if it vanished
        cdef int w = 0, j, bit, r
        cdef uint64_t word
        while w < self.words:
            word = self.buf[w]
            if word == 0:
                w += 1
                continue
            bit = w * 64 + __builtin_ctzll(word)
            r = self.pivot_row[bit]
            if r < 0:
                return bit
            for j in range(w, self.words):
                self.buf[j] ^= self.rows[r, j]
        return -1

    cdef void _load(self, const int64_t[::1] ids, int64_t lo, int64_t hi):
        cdef int64_t k, e
        cdef int j
        for j in range(self.words):
            self.buf[j] = 0
        for k in range(lo, hi):
            e = ids[k]
            self.buf[e >> 6] ^= (<uint64_t>1) << (e & 63)

    cdef bint _push(self, int bit):
        cdef int j
        if bit < 0:
            return False
        for j in range(self.words):
            self.rows[self._rank, j] = self.buf[j]
        self.pivot_row[bit] = self._rank
        self._rank += 1
        return True

    def insert(self, edge_ids):
        cdef int64_t[::1] ids = np.ascontiguousarray(edge_ids, dtype=np.int64)
        self._load(ids, 0, ids.shape[0])
        return self._push(self._reduce())

    def is_independent(self, edge_ids):
        cdef int64_t[::1] ids = np.ascontiguousarray(edge_ids, dtype=np.int64)
        self._load(ids, 0, ids.shape[0])
        return self._reduce() >= 0

    def insert_many(self, indptr, ids, int limit=-1):
        cdef int64_t[::1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
        cdef int64_t[::1] flat = np.ascontiguousarray(ids, dtype=np.int64)
        cdef Py_ssize_t count = ptr.shape[0] - 1, k
        out = np.zeros(count, dtype=bool)
        cdef cnp.npy_bool[::1] acc = out
        for k in range(count):
            if 0 <= limit <= self._rank:
                break
            self._load(flat, ptr[k], ptr[k + 1])
            acc[k] = self._push(self._reduce())
        return out
