# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled epsilon-ball enumerator.

Byte-for-byte the same candidate stream as _ballenum_py.BallEnumerator,
just with the depth-first loop in C.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef class BallEnumerator:
    cdef double[::1] cur
    cdef cnp.int64_t[::1] pos
    cdef double[::1] vals_flat
    cdef double[::1] costs_flat
    cdef cnp.int64_t[::1] off
    cdef cnp.int64_t[::1] idx
    cdef double[::1] partial
    cdef double budget
    cdef Py_ssize_t nf, m, depth
    cdef bint done

    def __init__(self, base, free_positions, values, costs, budget):
        base_arr = np.ascontiguousarray(base, dtype=np.float64)
        self.cur = base_arr.copy()
        self.m = base_arr.shape[0]
        self.pos = np.ascontiguousarray(free_positions, dtype=np.int64)
        self.nf = self.pos.shape[0]
        if len(values) != self.nf or len(costs) != self.nf:
            raise ValueError("values/costs must match the free positions")
        lens = []
        flat_v = []
        flat_c = []
        for lv, lc in zip(values, costs):
            lv = list(lv)
            lc = list(lc)
            if len(lv) != len(lc) or not lv:
                raise ValueError("each level needs matching non-empty values and costs")
            lens.append(len(lv))
            flat_v.extend(float(x) for x in lv)
            flat_c.extend(float(x) for x in lc)
        self.off = np.concatenate(([0], np.cumsum(lens))).astype(np.int64) \
            if lens else np.zeros(1, dtype=np.int64)
        self.vals_flat = np.asarray(flat_v, dtype=np.float64) \
            if flat_v else np.zeros(0, dtype=np.float64)
        self.costs_flat = np.asarray(flat_c, dtype=np.float64) \
            if flat_c else np.zeros(0, dtype=np.float64)
        self.budget = float(budget)
        self.idx = np.zeros(max(self.nf, 1), dtype=np.int64)
        self.partial = np.zeros(max(self.nf, 1), dtype=np.float64)
        self.idx[0] = -1
        self.depth = 0
        self.done = False

    def next_chunk(self, Py_ssize_t max_rows):
        """Up to max_rows candidate points as a float array, or None."""
        if self.done:
            return None
        if self.nf == 0:
            self.done = True
            return np.asarray(self.cur).copy().reshape(1, self.m)
        out_arr = np.empty((max_rows, self.m), dtype=np.float64)
        cdef double[:, ::1] out = out_arr
        cdef Py_ssize_t n = 0
        cdef Py_ssize_t d = self.depth
        cdef Py_ssize_t last = self.nf - 1
        cdef Py_ssize_t j, k
        cdef double cost
        while n < max_rows:
            self.idx[d] += 1
            j = self.off[d] + self.idx[d]
            if j >= self.off[d + 1]:
                d -= 1
                if d < 0:
                    self.done = True
                    break
                continue
            cost = (self.partial[d - 1] if d > 0 else 0.0) + self.costs_flat[j]
            if cost > self.budget:
                continue
            self.cur[self.pos[d]] = self.vals_flat[j]
            if d == last:
                for k in range(self.m):
                    out[n, k] = self.cur[k]
                n += 1
            else:
                self.partial[d] = cost
                d += 1
                self.idx[d] = -1
        self.depth = d
        if n == 0:
            return None
        return out_arr[:n]
