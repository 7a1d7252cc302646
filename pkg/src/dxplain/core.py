"""Core types and predicates for distance-restricted explanations.

An explanation problem bundles a classifier, a feature space and a
concrete instance.  Explanations are feature sets: a contrastive
explanation (CXp) is a subset-minimal set of features that, when freed
from their instance values, admits an adversarial example inside the
epsilon-ball; an abductive explanation (AXp) is a subset-minimal set of
features whose fixing rules every such example out.  Feature indices
are 1-based everywhere outside internal array code.
"""

import math
import threading
from dataclasses import dataclass, field
from enum import Enum


class ExplanationError(Exception):
    """Base class for errors raised by this package."""


class NoAdvExample(ExplanationError):
    """The whole epsilon-ball is free of adversarial examples.

    No contrastive explanation exists and the empty set is the unique
    abductive explanation.  The CLI maps this to exit code 2.
    """

    def __init__(self, epsilon, norm):
        self.epsilon = epsilon
        self.norm = norm
        super().__init__(
            "no adversarial example within %s distance %s" % (norm.value, epsilon))


class OracleError(ExplanationError):
    """Base class for oracle failures."""


class OracleBackendError(OracleError):
    """The oracle backend died or is unreachable."""


class OracleProtocolError(OracleError):
    """The oracle backend violated the wire protocol."""


class OracleTimeoutError(OracleError):
    """The oracle backend failed to answer in time."""


class UnsupportedConfigurationError(OracleError):
    """The oracle cannot decide this query shape exactly."""


class ResourceLimitError(OracleError):
    """An oracle exceeded its configured enumeration budget."""


class ModelFormatError(ExplanationError):
    """A model or instance document failed to parse or validate."""


class Norm(Enum):
    """Distance norms restricting adversarial examples."""

    L0 = "l0"
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @classmethod
    def parse(cls, text):
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError("unknown norm %r (expected l0, l1, l2 or linf)" % text) from None


def validate_epsilon(epsilon, norm):
    """Check a ball radius and return its canonical value.

    L0 counts changed features, so its radius must be a non-negative
    integer; fractional values are rejected rather than floored.  The
    other norms take any positive real.
    """
    if isinstance(epsilon, bool) or not isinstance(epsilon, (int, float)):
        raise ValueError("epsilon must be a number, got %r" % (epsilon,))
    if norm is Norm.L0:
        if float(epsilon) != int(epsilon):
            raise ValueError("L0 radius must be an integer count, got %r" % epsilon)
        if epsilon < 0:
            raise ValueError("L0 radius must be non-negative, got %r" % epsilon)
        return int(epsilon)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive, got %r" % epsilon)
    return float(epsilon)


def distance(x, v, norm):
    """Distance between two points under the given norm."""
    if len(x) != len(v):
        raise ValueError("points have different arity: %d vs %d" % (len(x), len(v)))
    if norm is Norm.L0:
        return sum(1 for a, b in zip(x, v) if a != b)
    if norm is Norm.L1:
        return sum(abs(a - b) for a, b in zip(x, v))
    if norm is Norm.L2:
        return math.sqrt(sum((a - b) * (a - b) for a, b in zip(x, v)))
    return max((abs(a - b) for a, b in zip(x, v)), default=0.0)


@dataclass(frozen=True)
class RealInterval:
    """Closed real interval; None means unbounded on that side."""

    lower: float = None
    upper: float = None

    def __post_init__(self):
        if self.lower is not None and self.upper is not None and self.lower > self.upper:
            raise ValueError("empty interval [%r, %r]" % (self.lower, self.upper))

    def contains(self, value):
        if self.lower is not None and value < self.lower:
            return False
        if self.upper is not None and value > self.upper:
            return False
        return True


@dataclass(frozen=True)
class FiniteSet:
    """Finite value domain; file order of values is preserved."""

    values: tuple

    def __init__(self, values):
        values = tuple(float(v) for v in values)
        if not values:
            raise ValueError("finite domain must be non-empty")
        if len(set(values)) != len(values):
            raise ValueError("finite domain values must be distinct")
        object.__setattr__(self, "values", values)

    def contains(self, value):
        return value in self.values


class FeatureSpace:
    """Ordered feature domains; feature i lives in domains[i-1]."""

    def __init__(self, domains):
        self.domains = tuple(domains)
        if not self.domains:
            raise ValueError("feature space must have at least one feature")
        for dom in self.domains:
            if not isinstance(dom, (RealInterval, FiniteSet)):
                raise ValueError("bad domain %r" % (dom,))

    @property
    def m(self):
        return len(self.domains)

    @property
    def all_finite(self):
        return all(isinstance(d, FiniteSet) for d in self.domains)

    def domain(self, i):
        """Domain of 1-based feature i."""
        if not 1 <= i <= self.m:
            raise ValueError("feature index %r out of range 1..%d" % (i, self.m))
        return self.domains[i - 1]

    def contains(self, point):
        if len(point) != self.m:
            return False
        return all(d.contains(x) for d, x in zip(self.domains, point))

    def __eq__(self, other):
        return isinstance(other, FeatureSpace) and self.domains == other.domains

    def __repr__(self):
        return "FeatureSpace(%r)" % (list(self.domains),)


class FeatureSet:
    """Immutable sorted set of 1-based feature indices."""

    __slots__ = ("_members", "_lookup")

    def __init__(self, members=()):
        seen = set()
        for i in members:
            if isinstance(i, bool) or not isinstance(i, int):
                raise ValueError("feature index must be an int, got %r" % (i,))
            if i < 1:
                raise ValueError("feature indices are 1-based, got %r" % (i,))
            seen.add(i)
        self._members = tuple(sorted(seen))
        self._lookup = frozenset(self._members)

    @property
    def members(self):
        return self._members

    def union(self, other):
        return FeatureSet(self._members + tuple(other))

    def difference(self, other):
        drop = set(other)
        return FeatureSet(i for i in self._members if i not in drop)

    def intersection(self, other):
        keep = set(other)
        return FeatureSet(i for i in self._members if i in keep)

    def issubset(self, other):
        return self._lookup <= set(other)

    def __contains__(self, i):
        return i in self._lookup

    def __iter__(self):
        return iter(self._members)

    def __len__(self):
        return len(self._members)

    def __bool__(self):
        return bool(self._members)

    def __eq__(self, other):
        if isinstance(other, FeatureSet):
            return self._members == other._members
        return NotImplemented

    def __hash__(self):
        return hash(self._members)

    def __repr__(self):
        return "{%s}" % ", ".join(str(i) for i in self._members)


def full_feature_set(m):
    """All features 1..m."""
    return FeatureSet(range(1, m + 1))


@dataclass(frozen=True)
class Instance:
    """A concrete point with the label the classifier assigns to it."""

    point: tuple
    label: int

    def __init__(self, point, label):
        object.__setattr__(self, "point", tuple(float(x) for x in point))
        if isinstance(label, bool) or not isinstance(label, int):
            raise ValueError("label must be an int, got %r" % (label,))
        object.__setattr__(self, "label", label)


class ExplanationProblem:
    """A classifier, its feature space and the instance to explain.

    The instance must lie inside the declared domains and the model
    must actually predict the declared label; both are checked here so
    that downstream code can rely on them.
    """

    def __init__(self, model, space, instance):
        if model.num_features != space.m:
            raise ValueError(
                "model arity %d does not match feature space arity %d"
                % (model.num_features, space.m))
        if len(instance.point) != space.m:
            raise ValueError(
                "instance arity %d does not match feature space arity %d"
                % (len(instance.point), space.m))
        if not space.contains(instance.point):
            raise ValueError("instance point %r outside declared domains" % (instance.point,))
        if not 0 <= instance.label < model.num_classes:
            raise ValueError("label %d outside 0..%d" % (instance.label, model.num_classes - 1))
        predicted = model.predict(instance.point)
        if predicted != instance.label:
            raise ValueError(
                "model predicts class %d for the instance, not the declared %d"
                % (predicted, instance.label))
        self.model = model
        self.space = space
        self.instance = instance

    @property
    def m(self):
        return self.space.m

    def all_features(self):
        return full_feature_set(self.m)

    def check_feature_set(self, features):
        fs = features if isinstance(features, FeatureSet) else FeatureSet(features)
        if fs and max(fs) > self.m:
            raise ValueError("feature index %d out of range 1..%d" % (max(fs), self.m))
        return fs


@dataclass
class ExplanationStats:
    """Bookkeeping for one explanation run."""

    calls: int = 0
    elapsed: float = 0.0
    rounds: int = 0
    cancelled: int = 0


@dataclass(frozen=True)
class Explanation:
    """A computed explanation: kind is 'cxp' or 'axp'."""

    kind: str
    features: FeatureSet
    epsilon: float
    norm: Norm
    stats: ExplanationStats = field(compare=False, default_factory=ExplanationStats)


class CancelToken:
    """Cooperative cancellation flag shared with in-flight oracle calls."""

    def __init__(self):
        self._event = threading.Event()

    def cancel(self):
        self._event.set()

    @property
    def cancelled(self):
        return self._event.is_set()

    def wait(self, timeout):
        """Block until cancelled or the timeout elapses; True if cancelled."""
        return self._event.wait(timeout)


@dataclass(frozen=True)
class OracleQuery:
    """One adversarial-example question.

    fixed lists the features pinned to the instance values; all other
    features may take any domain value as long as the whole point stays
    within epsilon of the instance.
    """

    epsilon: float
    norm: Norm
    fixed: FeatureSet
    cancel: CancelToken = field(compare=False, default=None)


@dataclass(frozen=True)
class OracleAnswer:
    """Oracle verdict: found is True, False, or None when cancelled."""

    found: bool
    witness: tuple = None

    @property
    def cancelled(self):
        return self.found is None

    def __bool__(self):
        return self.found is True


def is_adv_example(x, problem, epsilon, norm):
    """Closed-ball adversarial-example test for an explicit point.

    True iff x lies in the declared domains, within epsilon of the
    instance under the norm, and the model assigns it a different
    class.  No tolerance is applied here; tolerances live inside the
    oracles.
    """
    x = tuple(float(a) for a in x)
    if len(x) != problem.m:
        raise ValueError("point arity %d does not match problem arity %d" % (len(x), problem.m))
    if not problem.space.contains(x):
        return False
    if distance(x, problem.instance.point, norm) > epsilon:
        return False
    return problem.model.predict(x) != problem.instance.label


def check_wcxp(problem, session, free, epsilon, norm, cancel=None):
    """Weak-CXp test: may freeing this set change the prediction?

    Delegates to the oracle with the complement held fixed.  The answer
    is truthy iff a constrained adversarial example exists; a returned
    witness agrees with the instance outside the free set.
    """
    free = problem.check_feature_set(free)
    fixed = problem.all_features().difference(free)
    query = OracleQuery(epsilon=epsilon, norm=norm, fixed=fixed, cancel=cancel)
    return session.find_adv_ex(query)


def check_waxp(problem, session, fixed, epsilon, norm, cancel=None):
    """Weak-AXp test: does fixing this set preserve the prediction?

    Holds exactly when freeing the complement admits no adversarial
    example.
    """
    fixed = problem.check_feature_set(fixed)
    free = problem.all_features().difference(fixed)
    answer = check_wcxp(problem, session, free, epsilon, norm, cancel=cancel)
    if answer.cancelled:
        raise OracleError("oracle call was cancelled during check_waxp")
    return not answer.found


def is_minimal_cxp(problem, session, candidate, epsilon, norm):
    """True iff candidate is a CXp: a weak CXp no proper subset of which is one.

    Uses at most len(candidate) + 1 oracle calls.
    """
    candidate = problem.check_feature_set(candidate)
    if not check_wcxp(problem, session, candidate, epsilon, norm).found:
        return False
    for i in candidate:
        if check_wcxp(problem, session, candidate.difference((i,)), epsilon, norm).found:
            return False
    return True


def is_minimal_axp(problem, session, candidate, epsilon, norm):
    """True iff candidate is an AXp: a weak AXp no proper subset of which is one."""
    candidate = problem.check_feature_set(candidate)
    if not check_waxp(problem, session, candidate, epsilon, norm):
        return False
    for i in candidate:
        if check_waxp(problem, session, candidate.difference((i,)), epsilon, norm):
            return False
    return True
