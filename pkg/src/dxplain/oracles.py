"""Adversarial-example oracles.

Every oracle is a session factory: session() hands out a view whose
find_adv_ex answers one OracleQuery.  Distinct sessions may be used
from distinct threads; a single session need not accept concurrent
queries, except the external oracle whose sessions multiplex over one
backend process.  Answers are deterministic functions of the query, so
algorithm results never depend on probe timing.
"""

import itertools
import json
import math
import shlex
import subprocess
import threading
import time

import numpy as np

from .core import (CancelToken, FiniteSet, Norm, OracleAnswer, OracleBackendError,
                   OracleProtocolError, OracleQuery, OracleTimeoutError,
                   RealInterval, ResourceLimitError, UnsupportedConfigurationError,
                   is_adv_example, validate_epsilon)
from .kernels import BallEnumerator
from .models import LinearModel


class _StatelessSession:
    """Session view over an oracle whose calls carry no per-session state."""

    def __init__(self, oracle):
        self._oracle = oracle

    def find_adv_ex(self, query):
        return self._oracle.find_adv_ex(query)

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class ExhaustiveOracle:
    """Ground-truth oracle enumerating the whole ball over finite domains.

    Candidates are generated lexicographically (features ascending,
    domain values in file order) with partial assignments pruned once
    their distance contribution exceeds epsilon, then batch-classified.
    The witness is therefore the first adversarial point in that fixed
    order.  Enumeration stops with a resource error past max_candidates.
    """

    def __init__(self, problem, max_candidates=10_000_000, chunk=2048):
        self.problem = problem
        self.max_candidates = int(max_candidates)
        self.chunk = int(chunk)

    def session(self):
        return _StatelessSession(self)

    def close(self):
        pass

    def _levels(self, free_positions, epsilon, norm):
        v = self.problem.instance.point
        values = []
        costs = []
        for p in free_positions:
            dom = self.problem.space.domains[p]
            if not isinstance(dom, FiniteSet):
                raise UnsupportedConfigurationError(
                    "exhaustive oracle needs a finite domain for free feature %d" % (p + 1))
            lv = []
            lc = []
            for val in dom.values:
                delta = abs(val - v[p])
                if norm is Norm.L0:
                    lv.append(val)
                    lc.append(0.0 if val == v[p] else 1.0)
                elif delta <= epsilon:
                    lv.append(val)
                    if norm is Norm.L1:
                        lc.append(delta)
                    elif norm is Norm.L2:
                        lc.append(delta * delta)
                    else:
                        lc.append(0.0)
            values.append(lv)
            costs.append(lc)
        if norm is Norm.L0:
            budget = float(epsilon)
        elif norm is Norm.L2:
            budget = float(epsilon) * float(epsilon)
        elif norm is Norm.L1:
            budget = float(epsilon)
        else:
            budget = math.inf
        return values, costs, budget

    def find_adv_ex(self, query):
        problem = self.problem
        epsilon = validate_epsilon(query.epsilon, query.norm)
        fixed = problem.check_feature_set(query.fixed)
        free_positions = [i - 1 for i in range(1, problem.m + 1) if i not in fixed]
        values, costs, budget = self._levels(free_positions, epsilon, query.norm)
        enum = BallEnumerator(problem.instance.point, free_positions, values, costs, budget)
        label = problem.instance.label
        seen = 0
        while True:
            if query.cancel is not None and query.cancel.cancelled:
                return OracleAnswer(None)
            block = enum.next_chunk(self.chunk)
            if block is None:
                return OracleAnswer(False)
            seen += block.shape[0]
            if seen > self.max_candidates:
                raise ResourceLimitError(
                    "ball enumeration exceeded %d candidates" % self.max_candidates)
            labels = problem.model.predict_batch(block)
            hits = np.nonzero(labels != label)[0]
            if hits.size:
                witness = tuple(float(x) for x in block[hits[0]])
                return OracleAnswer(True, witness)


# Margin decisions closer to zero than this band are not trusted.
MARGIN_BAND = 1e-9


def _box_bounds(dom):
    if isinstance(dom, FiniteSet):
        return min(dom.values), max(dom.values)
    return dom.lower, dom.upper


def _directional_slack(dom, v, direction):
    """Room to move v towards the adversarial direction inside the domain."""
    lower, upper = _box_bounds(dom)
    if direction > 0:
        return math.inf if upper is None else max(0.0, upper - v)
    return math.inf if lower is None else max(0.0, v - lower)


def linear_min_margin(model, point, label, free, epsilon, norm, space):
    """Exact minimum margin of the labelled class over the epsilon-ball.

    Minimizes, over all competing classes k and all points x that agree
    with `point` outside `free` and lie within epsilon under the norm,
    the score difference score(x, label) - score(x, k).  Finite domains
    are relaxed to their bounding box.  Negative result means an
    adversarial example exists in the relaxation.  Supports L1 and LINF
    over boxes and L2 over fully unbounded domains.
    """
    if not isinstance(model, LinearModel):
        raise ValueError("linear_min_margin needs a LinearModel")
    if norm not in (Norm.L1, Norm.L2, Norm.LINF):
        raise UnsupportedConfigurationError(
            "linear oracle supports l1, l2 and linf only, not %s" % norm.value)
    epsilon = validate_epsilon(epsilon, norm)
    v = np.asarray(point, dtype=float)
    free_positions = [i - 1 for i in free]
    if norm is Norm.L2:
        for p in free_positions:
            dom = space.domains[p]
            if not (isinstance(dom, RealInterval) and dom.lower is None and dom.upper is None):
                raise UnsupportedConfigurationError(
                    "l2 margin minimization needs unbounded domains (feature %d)" % (p + 1))
    best = math.inf
    for k in range(model.num_classes):
        if k == label:
            continue
        diff = model.weights[k] - model.weights[label]  # adversarial direction
        margin0 = float(np.dot(-diff, v) + model.biases[label] - model.biases[k])
        if norm is Norm.L2:
            decrement = epsilon * math.sqrt(sum(float(diff[p]) ** 2 for p in free_positions))
        elif norm is Norm.LINF:
            decrement = 0.0
            for p in free_positions:
                d = float(diff[p])
                if d == 0.0:
                    continue
                slack = _directional_slack(space.domains[p], float(v[p]), d)
                decrement += abs(d) * min(epsilon, slack)
        else:
            ranked = sorted((p for p in free_positions if diff[p] != 0.0),
                            key=lambda p: (-abs(float(diff[p])), p))
            budget = epsilon
            decrement = 0.0
            for p in ranked:
                if budget <= 0.0:
                    break
                d = float(diff[p])
                slack = _directional_slack(space.domains[p], float(v[p]), d)
                take = min(budget, slack)
                decrement += abs(d) * take
                budget -= take
        best = min(best, margin0 - decrement)
    return best


class LinearOracle:
    """Closed-form oracle for linear models.

    Decides queries by margin minimization; results within the margin
    band around zero are delegated to a fallback oracle when one is
    available (by default an exhaustive oracle over all-finite spaces)
    and otherwise reported as not found.  Unsupported shapes (l0, l2
    over bounded domains) also go to the fallback, as do positive
    verdicts whose reconstructed minimizer falls between grid points:
    the margin bounds use the bounding box of finite domains, so such a
    verdict alone only holds for the relaxation.  Without a fallback
    the relaxed verdict is returned with witness None.
    """

    def __init__(self, problem, band=MARGIN_BAND, fallback="auto"):
        if not isinstance(problem.model, LinearModel):
            raise ValueError("linear oracle needs a linear model")
        self.problem = problem
        self.band = float(band)
        if fallback == "auto":
            fallback = ExhaustiveOracle(problem) if problem.space.all_finite else None
        self.fallback = fallback

    def session(self):
        return _StatelessSession(self)

    def close(self):
        pass

    def _delegate(self, query):
        if self.fallback is None:
            return None
        with self.fallback.session() as session:
            return session.find_adv_ex(query)

    def _witness(self, query, free_positions, epsilon):
        """Reconstruct a minimizing point; None when it leaves the domains."""
        problem = self.problem
        model = problem.model
        v = list(problem.instance.point)
        label = problem.instance.label
        norm = query.norm
        best_margin = math.inf
        best_point = None
        for k in range(model.num_classes):
            if k == label:
                continue
            diff = model.weights[k] - model.weights[label]
            x = list(v)
            if norm is Norm.L2:
                scale = math.sqrt(sum(float(diff[p]) ** 2 for p in free_positions))
                if scale > 0.0:
                    for p in free_positions:
                        x[p] = v[p] + epsilon * float(diff[p]) / scale
            elif norm is Norm.LINF:
                for p in free_positions:
                    d = float(diff[p])
                    if d == 0.0:
                        continue
                    slack = _directional_slack(problem.space.domains[p], v[p], d)
                    step = min(epsilon, slack)
                    x[p] = v[p] + step if d > 0 else v[p] - step
            else:
                ranked = sorted((p for p in free_positions if diff[p] != 0.0),
                                key=lambda p: (-abs(float(diff[p])), p))
                budget = epsilon
                for p in ranked:
                    if budget <= 0.0:
                        break
                    d = float(diff[p])
                    slack = _directional_slack(problem.space.domains[p], v[p], d)
                    take = min(budget, slack)
                    x[p] = v[p] + take if d > 0 else v[p] - take
                    budget -= take
            margin = (float(np.dot(model.weights[label] - model.weights[k], np.asarray(x)))
                      + float(model.biases[label] - model.biases[k]))
            if margin < best_margin:
                best_margin = margin
                best_point = x
        if best_point is None:
            return None
        # snap to finite domains; give up on off-grid coordinates
        for p in free_positions:
            dom = problem.space.domains[p]
            if isinstance(dom, FiniteSet):
                match = next((val for val in dom.values
                              if abs(val - best_point[p]) <= 1e-9), None)
                if match is None:
                    return None
                best_point[p] = match
        witness = tuple(float(x) for x in best_point)
        if not is_adv_example(witness, problem, epsilon, norm):
            return None
        return witness

    def find_adv_ex(self, query):
        problem = self.problem
        epsilon = validate_epsilon(query.epsilon, query.norm)
        fixed = problem.check_feature_set(query.fixed)
        free = problem.all_features().difference(fixed)
        if query.cancel is not None and query.cancel.cancelled:
            return OracleAnswer(None)
        try:
            margin = linear_min_margin(problem.model, problem.instance.point,
                                       problem.instance.label, free, epsilon,
                                       query.norm, problem.space)
        except UnsupportedConfigurationError:
            answer = self._delegate(query)
            if answer is None:
                raise
            return answer
        if margin < -self.band:
            free_positions = [i - 1 for i in free]
            witness = self._witness(query, free_positions, epsilon)
            if witness is not None:
                return OracleAnswer(True, witness)
            # minimizer left the finite grid, so the negative margin only
            # certifies the box relaxation; recheck exactly when possible
            answer = self._delegate(query)
            if answer is not None:
                return answer
            return OracleAnswer(True, None)
        if margin > self.band:
            return OracleAnswer(False)
        answer = self._delegate(query)
        if answer is not None:
            return answer
        return OracleAnswer(False)


class _LatencySession:
    def __init__(self, inner, delay):
        self._inner = inner
        self._delay = delay

    def find_adv_ex(self, query):
        delay = self._delay() if callable(self._delay) else self._delay
        if query.cancel is not None:
            if query.cancel.wait(delay):
                return OracleAnswer(None)
        elif delay > 0:
            time.sleep(delay)
        return self._inner.find_adv_ex(query)

    def close(self):
        self._inner.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class LatencyOracle:
    """Adds a per-call delay in front of another oracle.

    Models slow verification backends; used by the benchmark harness.
    Cancellation during the artificial delay skips both the remaining
    wait and the inner call.  delay is seconds, or a callable returning
    seconds per call.
    """

    def __init__(self, inner, delay):
        self.inner = inner
        self.delay = delay

    def session(self):
        return _LatencySession(self.inner.session(), self.delay)

    def close(self):
        self.inner.close()


# close() must tolerate a backend that died first
_CLOSE_ERRORS = (OracleBackendError, BrokenPipeError, OSError)


class _ExternalSession:
    """Lightweight handle onto the shared multiplexed backend process."""

    def __init__(self, oracle):
        self._oracle = oracle

    def find_adv_ex(self, query):
        return self._oracle.find_adv_ex(query)

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class ExternalOracle:
    """Client for an adversarial-example backend spoken to over stdio.

    The wire protocol is one JSON document per line.  After a hello
    handshake validating feature/class arity, check requests carry an
    id and may be answered out of order; concurrent sessions multiplex
    over the one process.  A cancel message asks the backend to abandon
    a query, which then answers with found null.
    """

    def __init__(self, cmd, problem, timeout=None, handshake_timeout=10.0):
        self.cmd = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        self.problem = problem
        self.timeout = timeout
        self.handshake_timeout = handshake_timeout
        self._proc = None
        self._lock = threading.Lock()       # writer lock
        self._state_lock = threading.Lock()  # pending-table lock
        self._pending = {}
        self._ids = itertools.count(1)
        self._dead = None
        self._hello = None
        self._hello_event = threading.Event()

    # -- lifecycle

    def open(self):
        if self._proc is not None:
            return self
        try:
            # stderr=None inherits fd 2, so backend noise stays visible
            # even when sys.stderr is a fileno-less replacement object
            self._proc = subprocess.Popen(
                self.cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=None, text=True, encoding="utf-8", bufsize=1)
        except OSError as exc:
            raise OracleBackendError("cannot spawn backend %r: %s" % (self.cmd, exc)) from None
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self._send({"cmd": "hello"})
        if not self._hello_event.wait(self.handshake_timeout):
            self.close()
            raise OracleTimeoutError("backend did not answer the handshake")
        if self._dead is not None:
            raise self._dead
        msg = self._hello
        features = msg.get("features")
        classes = msg.get("classes")
        if features != self.problem.m or classes != self.problem.model.num_classes:
            self.close()
            raise OracleProtocolError(
                "handshake mismatch: backend serves %r features / %r classes, "
                "problem has %d / %d"
                % (features, classes, self.problem.m, self.problem.model.num_classes))
        return self

    def close(self):
        proc = self._proc
        if proc is None:
            return
        try:
            self._send({"cmd": "quit"})
        except _CLOSE_ERRORS:
            pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()
        self._proc = None

    def __enter__(self):
        return self.open()

    def __exit__(self, *exc):
        self.close()
        return False

    def session(self):
        self.open()
        return _ExternalSession(self)

    # -- plumbing

    def _send(self, msg):
        proc = self._proc
        if proc is None or proc.stdin is None:
            raise OracleBackendError("backend is not running")
        line = json.dumps(msg)
        with self._lock:
            try:
                proc.stdin.write(line + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, ValueError, OSError):
                raise self._mark_dead(
                    OracleBackendError("backend closed the connection")) from None

    def _mark_dead(self, error):
        with self._state_lock:
            if self._dead is None:
                self._dead = error
            waiters = list(self._pending.values())
            self._pending.clear()
        for event, slot in waiters:
            slot["error"] = self._dead
            event.set()
        self._hello_event.set()
        return self._dead

    def _read_loop(self):
        proc = self._proc
        for line in proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
            except json.JSONDecodeError:
                self._mark_dead(OracleProtocolError("backend sent invalid JSON: %r" % line[:200]))
                return
            if not isinstance(msg, dict):
                self._mark_dead(OracleProtocolError("backend sent a non-object message"))
                return
            cmd = msg.get("cmd")
            if cmd == "hello":
                self._hello = msg
                self._hello_event.set()
            elif cmd == "answer":
                with self._state_lock:
                    entry = self._pending.pop(msg.get("id"), None)
                if entry is not None:
                    event, slot = entry
                    slot["answer"] = msg
                    event.set()
            else:
                self._mark_dead(OracleProtocolError("unexpected message %r from backend" % cmd))
                return
        self._mark_dead(OracleBackendError("backend exited"))

    def find_adv_ex(self, query):
        self.open()
        if self._dead is not None:
            raise self._dead
        epsilon = validate_epsilon(query.epsilon, query.norm)
        fixed = self.problem.check_feature_set(query.fixed)
        qid = next(self._ids)
        event = threading.Event()
        slot = {}
        with self._state_lock:
            self._pending[qid] = (event, slot)
        self._send({
            "cmd": "check",
            "id": qid,
            "epsilon": epsilon,
            "norm": query.norm.value,
            "fixed": list(fixed),
            "instance": list(self.problem.instance.point),
            "label": self.problem.instance.label,
        })
        deadline = None if self.timeout is None else time.monotonic() + self.timeout
        sent_cancel = False
        while not event.wait(0.01):
            if query.cancel is not None and query.cancel.cancelled and not sent_cancel:
                self._send({"cmd": "cancel", "id": qid})
                sent_cancel = True
            if deadline is not None and time.monotonic() > deadline:
                with self._state_lock:
                    self._pending.pop(qid, None)
                raise OracleTimeoutError("backend did not answer query %d in time" % qid)
        if "error" in slot:
            raise slot["error"]
        return self._parse_answer(slot["answer"])

    def _parse_answer(self, msg):
        if "error" in msg and msg["error"] is not None:
            raise OracleBackendError("backend reported: %s" % msg["error"])
        if "found" not in msg:
            raise OracleProtocolError("answer without a found field")
        found = msg["found"]
        if found is None:
            return OracleAnswer(None)
        if not isinstance(found, bool):
            raise OracleProtocolError("found must be true, false or null")
        witness = msg.get("witness")
        if witness is None:
            return OracleAnswer(found)
        if not isinstance(witness, list) or len(witness) != self.problem.m \
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                           for x in witness):
            raise OracleProtocolError("malformed witness %r" % (witness,))
        return OracleAnswer(found, tuple(float(x) for x in witness))


def auto_oracle(problem, spec="auto", timeout=None):
    """Resolve an oracle choice string to an oracle instance.

    auto picks the closed-form oracle for linear models, the exhaustive
    oracle for all-finite spaces, and otherwise demands an external
    backend given as external:<command line>.
    """
    if spec is None:
        spec = "auto"
    if spec.startswith("external:"):
        cmd = spec[len("external:"):].strip()
        if not cmd:
            raise ValueError("external oracle needs a command line after the colon")
        return ExternalOracle(cmd, problem, timeout=timeout)
    if spec == "auto":
        if isinstance(problem.model, LinearModel):
            return LinearOracle(problem)
        if problem.space.all_finite:
            return ExhaustiveOracle(problem)
        raise ValueError(
            "no built-in oracle fits this problem; pass --oracle external:<cmd>")
    if spec == "exhaustive":
        return ExhaustiveOracle(problem)
    if spec == "linear":
        return LinearOracle(problem)
    raise ValueError("unknown oracle %r" % (spec,))
