"""Small shared problems used across the test modules."""

import threading

from dxplain import (ExplanationProblem, FeatureSpace, FiniteSet, Instance,
                     LinearModel, PredicateModel)

GRID = (0.0, 0.5, 1.0, 1.5, 2.0, 5.0)


def grid_problem():
    """Three features on a small grid, class 1 iff 0 < x1 < 2 and 4*x1 >= x2 + x3."""
    space = FeatureSpace([FiniteSet(GRID)] * 3)
    model = PredicateModel(
        "1 if (x1 > 0 and x1 < 2 and 4*x1 >= x2 + x3) else 0", 3, 2)
    return ExplanationProblem(model, space, Instance((1.0, 1.0, 1.0), 1))


def grid_predict(x):
    return 1 if (0 < x[0] < 2 and 4 * x[0] >= x[1] + x[2]) else 0


def and_problem():
    """Four boolean features, class 1 iff x1 and x2 are both set."""
    space = FeatureSpace([FiniteSet([0.0, 1.0])] * 4)
    model = PredicateModel("1 if (x1 >= 1 and x2 >= 1) else 0", 4, 2)
    return ExplanationProblem(model, space, Instance((1.0, 1.0, 0.0, 0.0), 1))


def and_predict(x):
    return 1 if (x[0] >= 1 and x[1] >= 1) else 0


def constant_problem():
    """Two features, one class: no adversarial example can exist."""
    space = FeatureSpace([FiniteSet([0.0, 1.0])] * 2)
    model = LinearModel([[0.0, 0.0]], [0.0])
    return ExplanationProblem(model, space, Instance((0.0, 0.0), 0))


class RecordingSession:
    """Session wrapper that keeps every query it forwards."""

    def __init__(self, inner):
        self.inner = inner
        self.queries = []

    def find_adv_ex(self, query):
        self.queries.append(query)
        return self.inner.find_adv_ex(query)

    @property
    def calls(self):
        return len(self.queries)


class _RecordingView:
    def __init__(self, oracle, session):
        self._oracle = oracle
        self._session = session

    def find_adv_ex(self, query):
        with self._oracle._lock:
            self._oracle.fixed_sets.append(query.fixed)
        return self._session.find_adv_ex(query)

    def close(self):
        self._session.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class RecordingOracle:
    """Oracle wrapper logging the fixed set of every query, in issue order."""

    def __init__(self, inner):
        self.inner = inner
        self.fixed_sets = []
        self._lock = threading.Lock()

    @property
    def problem(self):
        return self.inner.problem

    def session(self):
        return _RecordingView(self, self.inner.session())

    def close(self):
        self.inner.close()
