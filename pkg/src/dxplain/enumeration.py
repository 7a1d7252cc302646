"""Complete enumeration of explanations over a selector map formula.

One boolean selector per feature, true meaning the feature is freed.
Seeds maximal unexplored candidates (prefer-true assignments), turns
each into a CXp or an AXp with deletion passes, and blocks it; when
the formula runs out of models the two families are complete and
hitting-set duals of each other.
"""

from dataclasses import dataclass, field

from .core import ExplanationStats, FeatureSet, check_wcxp, validate_epsilon
from .explain import _check_order, _CountingSession, _Run, shrink_to_axp, shrink_to_cxp


class MapFormula:
    """Tiny CNF over the m feature selectors with a deterministic solver."""

    def __init__(self, m):
        self.m = m
        self.clauses = []

    def add_clause(self, lits):
        clause = []
        for lit in lits:
            if not isinstance(lit, int) or lit == 0 or abs(lit) > self.m:
                raise ValueError("bad literal %r" % (lit,))
            clause.append(lit)
        self.clauses.append(clause)

    def block_cxp(self, features):
        """Forbid freeing any superset of this CXp."""
        self.add_clause([-i for i in features])

    def block_axp(self, features):
        """Forbid fixing any superset of this AXp (some member must be free)."""
        self.add_clause([i for i in features])

    def next_model(self, prefer=True):
        """First satisfying assignment, or None.

        Deterministic DPLL: unit propagation to fixpoint, decisions on
        the lowest-index unassigned selector with the preferred phase
        first, chronological backtracking.  prefer=True yields the
        assignment freeing as many low-index features as possible.
        """
        if any(not clause for clause in self.clauses):
            return None
        assign = [None] * (self.m + 1)
        trail = []  # (var, kind): kind is decision / flipped / implied

        def propagate():
            while True:
                unit = None
                for clause in self.clauses:
                    satisfied = False
                    unassigned = 0
                    last = 0
                    for lit in clause:
                        val = assign[abs(lit)]
                        if val is None:
                            unassigned += 1
                            last = lit
                        elif (lit > 0) == val:
                            satisfied = True
                            break
                    if satisfied:
                        continue
                    if unassigned == 0:
                        return True
                    if unassigned == 1:
                        unit = last
                        break
                if unit is None:
                    return False
                assign[abs(unit)] = unit > 0
                trail.append((abs(unit), "implied"))

        while True:
            if propagate():
                while trail:
                    var, kind = trail.pop()
                    if kind == "decision":
                        assign[var] = not prefer
                        trail.append((var, "flipped"))
                        break
                    assign[var] = None
                else:
                    return None
                continue
            var = next((v for v in range(1, self.m + 1) if assign[v] is None), None)
            if var is None:
                return [bool(assign[v]) for v in range(1, self.m + 1)]
            assign[var] = prefer
            trail.append((var, "decision"))


@dataclass
class ExplanationSets:
    """Both explanation families; complete means nothing was left out."""

    axps: list
    cxps: list
    complete: bool
    stats: ExplanationStats = field(default_factory=ExplanationStats)


def marco_enumerate(problem, oracle, epsilon, norm, limit=None, cxp_limit=None,
                    axp_limit=None, order=None, callback=None):
    """Enumerate every AXp and CXp of the problem.

    Each map-formula model is read as a candidate free set Y.  If
    freeing Y admits an adversarial example it shrinks to a CXp, which
    is blocked downward; otherwise fixing the complement preserves the
    prediction, the complement shrinks to an AXp, and that is blocked.
    Runs until the formula is exhausted or a limit is hit; callback, if
    given, streams (kind, features) as they are found.
    """
    epsilon = validate_epsilon(epsilon, norm)
    order = _check_order(problem, order)
    formula = MapFormula(problem.m)
    axps = []
    cxps = []
    complete = False
    run = _Run()
    with oracle.session() as raw:
        session = _CountingSession(raw, run)
        while True:
            if limit is not None and len(axps) + len(cxps) >= limit:
                break
            if cxp_limit is not None and len(cxps) >= cxp_limit:
                break
            if axp_limit is not None and len(axps) >= axp_limit:
                break
            model = formula.next_model()
            if model is None:
                complete = True
                break
            candidate = FeatureSet(i for i in range(1, problem.m + 1) if model[i - 1])
            if check_wcxp(problem, session, candidate, epsilon, norm).found:
                cxp = shrink_to_cxp(problem, session, candidate, epsilon, norm, order)
                cxps.append(cxp)
                formula.block_cxp(cxp)
                if callback is not None:
                    callback("cxp", cxp)
            else:
                complement = problem.all_features().difference(candidate)
                axp = shrink_to_axp(problem, session, complement, epsilon, norm, order)
                axps.append(axp)
                formula.block_axp(axp)
                if callback is not None:
                    callback("axp", axp)
    return ExplanationSets(axps=axps, cxps=cxps, complete=complete,
                           stats=run.finish())


def ffa_scores(cxps, m):
    """Feature attribution: share of the CXps each feature occurs in."""
    cxps = list(cxps)
    if not cxps:
        raise ValueError("feature attribution needs at least one CXp")
    scores = []
    for i in range(1, m + 1):
        scores.append(sum(1 for s in cxps if i in s) / len(cxps))
    return scores


def ffa_support(scores):
    """Features with positive attribution, 1-based."""
    return FeatureSet(i for i, s in enumerate(scores, start=1) if s > 0)


def _hits_all(candidate, family):
    return all(candidate & set(member) for member in family)


def _is_minimal_hitting_set(candidate, family):
    candidate = set(candidate)
    if not _hits_all(candidate, family):
        return False
    return all(not _hits_all(candidate - {i}, family) for i in candidate)


def check_duality(axps, cxps):
    """Brute-force check of minimal-hitting-set duality between the families.

    True iff every AXp is a minimal hitting set of the CXps and every
    CXp one of the AXps.  Holds for the degenerate pair ([{}], []) left
    by problems without adversarial examples.
    """
    axps = [set(a) for a in axps]
    cxps = [set(c) for c in cxps]
    return (all(_is_minimal_hitting_set(a, cxps) for a in axps)
            and all(_is_minimal_hitting_set(c, axps) for c in cxps))
