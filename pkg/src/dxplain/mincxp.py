"""Minimum-size contrastive explanations via implicit hitting sets.

Every CXp hits every AXp, so the smallest CXp is the smallest hitting
set of the full AXp family.  The family is discovered lazily: compute a
minimum hitting set of the AXps seen so far, ask the oracle whether
freeing it flips the prediction, and either return it (its size is a
matching lower bound) or harvest a new AXp from its complement.
"""

from dataclasses import dataclass

from .core import (Explanation, FeatureSet, NoAdvExample, check_wcxp,
                   validate_epsilon)
from .explain import _check_order, _CountingSession, _Run, shrink_to_axp


def _greedy_hitting_set(sets):
    """Upper bound: repeatedly pick the element hitting most unhit sets."""
    unhit = list(sets)
    picked = set()
    while unhit:
        degree = {}
        for s in unhit:
            for e in s:
                degree[e] = degree.get(e, 0) + 1
        best = min(degree, key=lambda e: (-degree[e], e))
        picked.add(best)
        unhit = [s for s in unhit if best not in s]
    return picked


def _packing_bound(sets):
    """Lower bound: size of a greedy pairwise-disjoint subfamily."""
    used = set()
    count = 0
    for s in sets:
        if not (s & used):
            count += 1
            used |= s
    return count


def min_hitting_set(family):
    """Exact minimum hitting set of a family of non-empty sets.

    Branch and bound: branch over the elements of a smallest unhit set,
    prune with a disjoint-packing bound against the greedy incumbent.
    Deterministic; returns frozenset().  Empty family needs nothing;
    an empty member makes the instance infeasible.
    """
    sets = []
    for s in family:
        s = frozenset(s)
        if not s:
            raise ValueError("empty set cannot be hit")
        sets.append(s)
    # dominance: a superset of another member is hit for free
    sets = sorted(set(sets), key=lambda s: (len(s), sorted(s)))
    kept = []
    for s in sets:
        if not any(k <= s for k in kept):
            kept.append(s)
    if not kept:
        return frozenset()

    best = frozenset(_greedy_hitting_set(kept))

    def search(chosen):
        nonlocal best
        unhit = [s for s in kept if not (s & chosen)]
        if not unhit:
            if len(chosen) < len(best):
                best = frozenset(chosen)
            return
        if len(chosen) + _packing_bound(unhit) >= len(best):
            return
        for e in sorted(unhit[0]):
            search(chosen | {e})

    search(frozenset())
    return best


@dataclass(frozen=True)
class OptimalityCertificate:
    """Why the result is minimum: hitting this AXp family needs that many."""

    lower_bound: int
    iterations: int
    axps: tuple


def smallest_cxp(problem, oracle, epsilon, norm, order=None):
    """Globally smallest CXp, with an optimality certificate.

    Any weak CXp must hit every AXp, so a minimum hitting set of a
    partial AXp family bounds the optimum from below; once such a set
    is itself a weak CXp the bound is tight and it is returned as is
    (a strictly smaller subset would beat the bound, so it is already
    subset-minimal).  Otherwise its complement keeps the prediction
    and yields a fresh AXp, disjoint from the candidate, for the family.
    """
    epsilon = validate_epsilon(epsilon, norm)
    order = _check_order(problem, order)
    run = _Run()
    axps = []
    iterations = 0
    with oracle.session() as raw:
        session = _CountingSession(raw, run)
        if not check_wcxp(problem, session, problem.all_features(),
                          epsilon, norm).found:
            raise NoAdvExample(epsilon, norm)
        while True:
            iterations += 1
            candidate = FeatureSet(min_hitting_set(axps))
            if check_wcxp(problem, session, candidate, epsilon, norm).found:
                cert = OptimalityCertificate(lower_bound=len(candidate),
                                             iterations=iterations,
                                             axps=tuple(axps))
                return (Explanation("cxp", candidate, epsilon, norm,
                                    run.finish()), cert)
            complement = problem.all_features().difference(candidate)
            axps.append(shrink_to_axp(problem, session, complement,
                                      epsilon, norm, order))
