"""Pure-Python epsilon-ball enumerator.

Reference implementation of the depth-first candidate generator; the
compiled module _ballenum mirrors it exactly.  Candidates are the
points obtained by assigning each free feature one of its admissible
values while the accumulated cost stays within budget.  Enumeration is
lexicographic: free features in ascending position, values in the
order given (domain file order), so the first emitted adversarial
point is a deterministic witness.
"""

import numpy as np


class BallEnumerator:
    """Resumable enumerator; next_chunk yields blocks of candidate rows."""

    def __init__(self, base, free_positions, values, costs, budget):
        # base: full point; free_positions: 0-based columns being varied;
        # values[d] / costs[d]: admissible values of level d and their
        # additive cost contributions; budget: maximum total cost.
        self._base = [float(x) for x in base]
        self._pos = [int(p) for p in free_positions]
        self._vals = [[float(v) for v in level] for level in values]
        self._costs = [[float(c) for c in level] for level in costs]
        self._budget = float(budget)
        self._m = len(self._base)
        self._nf = len(self._pos)
        if len(self._vals) != self._nf or len(self._costs) != self._nf:
            raise ValueError("values/costs must match the free positions")
        for lv, lc in zip(self._vals, self._costs):
            if len(lv) != len(lc) or not lv:
                raise ValueError("each level needs matching non-empty values and costs")
        self._cur = list(self._base)
        self._idx = [0] * max(self._nf, 1)
        self._partial = [0.0] * max(self._nf, 1)
        self._idx[0] = -1
        self._depth = 0
        self._done = False

    def next_chunk(self, max_rows):
        """Up to max_rows candidate points as a float array, or None."""
        if self._done:
            return None
        if self._nf == 0:
            self._done = True
            return np.array([self._base], dtype=float)
        rows = []
        d = self._depth
        idx = self._idx
        vals = self._vals
        costs = self._costs
        partial = self._partial
        cur = self._cur
        pos = self._pos
        last = self._nf - 1
        budget = self._budget
        while len(rows) < max_rows:
            idx[d] += 1
            if idx[d] >= len(vals[d]):
                d -= 1
                if d < 0:
                    self._done = True
                    break
                continue
            cost = (partial[d - 1] if d else 0.0) + costs[d][idx[d]]
            if cost > budget:
                continue
            cur[pos[d]] = vals[d][idx[d]]
            if d == last:
                rows.append(list(cur))
            else:
                partial[d] = cost
                d += 1
                idx[d] = -1
        self._depth = d
        if not rows:
            return None
        return np.array(rows, dtype=float)
