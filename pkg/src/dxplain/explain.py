"""Search algorithms computing one explanation at a time.

All of them shrink a weak CXp to a subset-minimal one (or dually grow
nothing and delete from a fixed set, for AXps) while asking the oracle
monotone weak-CXp questions.  Results are deterministic for a fixed
(order, seed, oracle) triple: parallel probe answers are merged by
probe index, never by arrival time.
"""

import math
import random
import threading
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .core import (CancelToken, Explanation, ExplanationStats, FeatureSet,
                   FiniteSet, NoAdvExample, Norm, OracleError, check_waxp,
                   check_wcxp, validate_epsilon)
from .models import ModelCapabilityError


class _Run:
    """Per-call bookkeeping: counting session wrapper plus stats."""

    def __init__(self):
        self.stats = ExplanationStats()
        self._lock = threading.Lock()
        self._t0 = time.perf_counter()

    def count(self, n=1):
        with self._lock:
            self.stats.calls += n

    def cancelled(self, n):
        with self._lock:
            self.stats.cancelled += n

    def round(self):
        with self._lock:
            self.stats.rounds += 1

    def finish(self):
        self.stats.elapsed = time.perf_counter() - self._t0
        return self.stats


class _CountingSession:
    def __init__(self, session, run):
        self._session = session
        self._run = run

    def find_adv_ex(self, query):
        self._run.count()
        return self._session.find_adv_ex(query)

    def close(self):
        self._session.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def _check_order(problem, order):
    if order is None:
        return list(range(1, problem.m + 1))
    order = [int(i) for i in order]
    if sorted(order) != list(range(1, problem.m + 1)):
        raise ValueError("order must be a permutation of 1..%d" % problem.m)
    return order


def order_features(problem, strategy="natural", epsilon=None, norm=None,
                   permutation=None):
    """Inspection order for the search algorithms.

    natural keeps file order; file takes an explicit permutation;
    sensitivity ranks features by the largest class-score swing
    obtained by clamping one coordinate to an epsilon-reachable domain
    extreme, ascending, so low-impact features are dropped early.
    Models without scores fall back to natural with a warning.
    """
    if strategy == "natural":
        return list(range(1, problem.m + 1))
    if strategy == "file":
        if permutation is None:
            raise ValueError("file ordering needs an explicit permutation")
        return _check_order(problem, permutation)
    if strategy != "sensitivity":
        raise ValueError("unknown ordering strategy %r" % (strategy,))
    if epsilon is None or norm is None:
        raise ValueError("sensitivity ordering needs epsilon and norm")
    epsilon = validate_epsilon(epsilon, norm)
    v = problem.instance.point
    label = problem.instance.label
    base = None
    try:
        base = problem.model.score(v, label)
    except ModelCapabilityError:
        warnings.warn("model has no class scores; falling back to natural order")
        return list(range(1, problem.m + 1))
    scores = []
    for i in range(1, problem.m + 1):
        swing = 0.0
        for val in _reach_extremes(problem.space.domains[i - 1], v[i - 1], epsilon, norm):
            clamped = list(v)
            clamped[i - 1] = val
            swing = max(swing, abs(problem.model.score(clamped, label) - base))
        scores.append((swing, i))
    scores.sort()
    return [i for _, i in scores]


def _reach_extremes(dom, value, epsilon, norm):
    """Domain extremes reachable by changing this one coordinate."""
    if norm is Norm.L0:
        if epsilon < 1:
            return []
        if isinstance(dom, FiniteSet):
            return [min(dom.values), max(dom.values)]
        # probe one unit out when the interval is unbounded
        lo = dom.lower if dom.lower is not None else value - 1.0
        hi = dom.upper if dom.upper is not None else value + 1.0
        return [lo, hi]
    if isinstance(dom, FiniteSet):
        reach = [val for val in dom.values if abs(val - value) <= epsilon]
        return [min(reach), max(reach)] if reach else []
    lo = value - epsilon if dom.lower is None else max(dom.lower, value - epsilon)
    hi = value + epsilon if dom.upper is None else min(dom.upper, value + epsilon)
    return [lo, hi]


def seed_weak_cxp(problem, session, epsilon, norm):
    """Guard call: establish that some adversarial example exists.

    Returns (free_set, witness).  When the oracle supplies a witness,
    the features on which it differs from the instance already form a
    weak CXp, so only those need inspecting; without a witness the
    whole feature set is returned.  Raises NoAdvExample otherwise.
    """
    epsilon = validate_epsilon(epsilon, norm)
    answer = check_wcxp(problem, session, problem.all_features(), epsilon, norm)
    if answer.cancelled:
        raise OracleError("guard oracle call was cancelled")
    if not answer.found:
        raise NoAdvExample(epsilon, norm)
    if answer.witness is None:
        return problem.all_features(), None
    v = problem.instance.point
    mask = FeatureSet(i for i in range(1, problem.m + 1)
                      if answer.witness[i - 1] != v[i - 1])
    return mask, answer.witness


def shrink_to_cxp(problem, session, free, epsilon, norm, order):
    """Deletion pass: drop each free feature whose removal keeps a weak CXp."""
    keep = set(free)
    for i in order:
        if i not in keep:
            continue
        trial = FeatureSet(keep - {i})
        if check_wcxp(problem, session, trial, epsilon, norm).found:
            keep.discard(i)
    return FeatureSet(keep)


def shrink_to_axp(problem, session, fixed, epsilon, norm, order):
    """Deletion pass over a fixed set: drop features that stay redundant."""
    keep = set(fixed)
    for i in order:
        if i not in keep:
            continue
        if check_waxp(problem, session, FeatureSet(keep - {i}), epsilon, norm):
            keep.discard(i)
    return FeatureSet(keep)


def deletion_cxp(problem, oracle, epsilon, norm, order=None):
    """Baseline linear search: one oracle call per feature after the guard."""
    epsilon = validate_epsilon(epsilon, norm)
    order = _check_order(problem, order)
    run = _Run()
    with oracle.session() as raw:
        session = _CountingSession(raw, run)
        answer = check_wcxp(problem, session, problem.all_features(), epsilon, norm)
        if not answer.found:
            raise NoAdvExample(epsilon, norm)
        result = shrink_to_cxp(problem, session, problem.all_features(),
                               epsilon, norm, order)
    return Explanation("cxp", result, epsilon, norm, run.finish())


def extract_axp(problem, oracle, epsilon, norm, seed_fixed=None, order=None):
    """Deletion-based AXp extraction from a weak AXp seed (default: all)."""
    epsilon = validate_epsilon(epsilon, norm)
    order = _check_order(problem, order)
    seed = problem.all_features() if seed_fixed is None \
        else problem.check_feature_set(seed_fixed)
    run = _Run()
    with oracle.session() as raw:
        session = _CountingSession(raw, run)
        if not check_waxp(problem, session, seed, epsilon, norm):
            raise ValueError("seed set is not a weak abductive explanation")
        result = shrink_to_axp(problem, session, seed, epsilon, norm, order)
    return Explanation("axp", result, epsilon, norm, run.finish())


def dichotomic_cxp(problem, oracle, epsilon, norm, order=None,
                   use_witness_seed=False):
    """Transition-feature search by binary probing.

    Each round locates, by bisection over prefixes of the pending list,
    the first feature whose inclusion turns the freed prefix into a
    weak CXp; that feature is confirmed and everything after it is
    discarded.  Oracle calls stay within
    |result| * (ceil(log2 m) + 2) + 2.
    """
    epsilon = validate_epsilon(epsilon, norm)
    order = _check_order(problem, order)
    run = _Run()
    with oracle.session() as raw:
        session = _CountingSession(raw, run)
        pending = _guarded_pending(problem, session, epsilon, norm, order,
                                   use_witness_seed)

        def wcxp(features):
            return check_wcxp(problem, session, FeatureSet(features),
                              epsilon, norm).found

        confirmed = []
        while pending:
            run.round()
            lo, hi = 0, len(pending)
            # invariant: confirmed + pending[:hi] is a weak CXp and, when
            # lo > 0, confirmed + pending[:lo] is not
            while hi - lo > 1:
                mid = lo + (hi - lo + 1) // 2
                if wcxp(confirmed + pending[:mid]):
                    hi = mid
                else:
                    lo = mid
            if lo == 0 and wcxp(confirmed):
                pending = []
                break
            confirmed.append(pending[hi - 1])
            pending = pending[:hi - 1]
    return Explanation("cxp", FeatureSet(confirmed), epsilon, norm, run.finish())


def _guarded_pending(problem, session, epsilon, norm, order, use_witness_seed):
    """Run the guard call; return the ordered feature list to inspect."""
    if use_witness_seed:
        mask, _ = seed_weak_cxp(problem, session, epsilon, norm)
        return [i for i in order if i in mask]
    answer = check_wcxp(problem, session, problem.all_features(), epsilon, norm)
    if not answer.found:
        raise NoAdvExample(epsilon, norm)
    return list(order)


@dataclass
class SearchState:
    """Mutable state shared by the parallel search rounds."""

    confirmed: list
    pending: list
    epsilon: float
    norm: Norm
    lo: int = 0
    hi: int = 0


def _split_indices(lo, hi, width_limit):
    """Prefix lengths to probe inside (lo, hi).

    Splitting points are lo + ceil(j * (hi - lo) / w); the last one is
    hi itself, whose probe outcome is already known from the invariant,
    so it is not queried.  With one worker that leaves nothing, and the
    plain bisection midpoint is probed instead.
    """
    span = hi - lo
    w = min(width_limit, span)
    points = sorted({lo + (j * span + w - 1) // w for j in range(1, w + 1)})
    points = [t for t in points if t < hi]
    if not points:
        points = [lo + (span + 1) // 2]
    return points


def _probe_map(pool, session_factory, problem, frees, epsilon, norm, run):
    """Launch one concurrent weak-CXp probe per entry of frees.

    Returns (tokens, futures); every probe runs in its own session.
    """
    tokens = [CancelToken() for _ in frees]

    def task(free, token):
        with session_factory.session() as session:
            return check_wcxp(problem, session, free, epsilon, norm, cancel=token)

    futures = []
    for free, token in zip(frees, tokens):
        run.count()
        futures.append(pool.submit(task, FeatureSet(free), token))
    return tokens, futures


def _collect_ascending(tokens, futures, run):
    """Resolve probes in index order; cancel everything past the first hit.

    Probes below the first true index must complete, so the answer set
    the algorithm consumes is independent of scheduling.  Returns the
    position of the first true probe, or None if all answered false.
    """
    found_pos = None
    for pos, future in enumerate(futures):
        if found_pos is not None:
            break
        try:
            answer = future.result()
        except Exception:
            for token in tokens[pos + 1:]:
                token.cancel()
            for later in futures[pos + 1:]:
                later.cancel()
            raise
        if answer.cancelled:
            raise OracleError("probe %d was cancelled unexpectedly" % pos)
        if answer.found:
            found_pos = pos
            for token in tokens[pos + 1:]:
                token.cancel()
            for later in futures[pos + 1:]:
                later.cancel()
            run.cancelled(len(futures) - pos - 1)
    return found_pos


def feat_disjunct(problem, oracle, state, workers=1, rng=None, pool=None,
                  run=None):
    """One feature-disjunction round over the tail of the pending list.

    Probes, for each candidate i in the tail chunk T, whether freeing
    everything under inspection except i still admits an adversarial
    example.  If no probe succeeds every member of T sits in every
    remaining explanation and the whole chunk is confirmed at once;
    otherwise one droppable candidate is picked (seeded choice) and
    dropped.  All probes complete before the round is decided.
    """
    if rng is None:
        rng = random.Random(0)
    if run is None:
        run = _Run()
    chunk = min(workers, len(state.pending))
    if chunk == 0:
        return state
    tail = state.pending[-chunk:]
    everything = set(state.confirmed) | set(state.pending)
    frees = [everything - {i} for i in tail]

    own_pool = None
    if pool is None:
        own_pool = ThreadPoolExecutor(max_workers=max(workers, 1))
        pool = own_pool
    try:
        tokens, futures = _probe_map(pool, oracle, problem, frees,
                                     state.epsilon, state.norm, run)
        answers = []
        first_error = None
        for future in futures:
            try:
                answers.append(future.result())
            except Exception as exc:
                if first_error is None:
                    first_error = exc
        if first_error is not None:
            raise first_error
        droppable = [i for i, ans in zip(tail, answers) if ans.found]
        if not droppable:
            state.confirmed.extend(tail)
            state.pending = state.pending[:-chunk]
        else:
            victim = rng.choice(droppable)
            state.pending = [i for i in state.pending if i != victim]
    finally:
        if own_pool is not None:
            own_pool.shutdown(wait=True)
    return state


def swift_cxp(problem, oracle, epsilon, norm, order=None, workers=1,
              delta=0.9, seed=0, use_witness_seed=False):
    """Parallel transition-feature search with a disjunction endgame.

    Rounds bisect the pending prefix with up to `workers` concurrent
    probes; probe answers are merged by index and probes beyond the
    located boundary are cancelled.  Once the pending list shrinks to
    max(workers, ceil((1 - delta) * m)) candidates, the algorithm
    switches permanently to feature-disjunction rounds.  With one
    worker the probe sequence degenerates to dichotomic search.
    """
    epsilon = validate_epsilon(epsilon, norm)
    order = _check_order(problem, order)
    if workers < 1:
        raise ValueError("workers must be at least 1")
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    rng = random.Random(seed)
    run = _Run()
    fd_threshold = max(workers, math.ceil((1.0 - delta) * problem.m))

    with oracle.session() as raw:
        guard_session = _CountingSession(raw, run)
        pending = _guarded_pending(problem, guard_session, epsilon, norm, order,
                                   use_witness_seed)
        state = SearchState(confirmed=[], pending=pending,
                            epsilon=epsilon, norm=norm)
        fd_mode = False
        with ThreadPoolExecutor(max_workers=workers) as pool:
            while state.pending:
                run.round()
                if fd_mode or len(state.pending) <= fd_threshold:
                    # disjunction rounds are sticky: bisection never resumes
                    fd_mode = True
                    feat_disjunct(problem, oracle, state, workers=workers,
                                  rng=rng, pool=pool, run=run)
                    continue
                state.lo, state.hi = 0, len(state.pending)
                while state.hi - state.lo > 1:
                    probes = _split_indices(state.lo, state.hi, workers)
                    frees = [set(state.confirmed) | set(state.pending[:t])
                             for t in probes]
                    tokens, futures = _probe_map(pool, oracle, problem, frees,
                                                 epsilon, norm, run)
                    found = _collect_ascending(tokens, futures, run)
                    if found is None:
                        state.lo = probes[-1]
                    else:
                        if found > 0:
                            state.lo = probes[found - 1]
                        state.hi = probes[found]
                if state.lo == 0:
                    if check_wcxp(problem, guard_session,
                                  FeatureSet(state.confirmed),
                                  epsilon, norm).found:
                        state.pending = []
                        break
                state.confirmed.append(state.pending[state.hi - 1])
                state.pending = state.pending[:state.hi - 1]
    return Explanation("cxp", FeatureSet(state.confirmed), epsilon, norm,
                       run.finish())
