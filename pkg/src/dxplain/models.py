"""Classifier kinds and their on-disk document formats.

Three model families are supported: linear score models, small dense
multi-layer perceptrons, and predicate models given by a boolean rule
over the features.  Every model offers a scalar predict() used by the
predicates and a vectorized predict_batch() used by the enumeration
oracles; ties in score argmax always resolve to the lowest class index.

Model and instance files are UTF-8 JSON documents.  Weights are plain
decimal text and survive a save/load round trip bit for bit.
"""

import ast
import json

import numpy as np

from .core import (ExplanationError, FeatureSpace, FiniteSet, Instance,
                   ModelFormatError, RealInterval)


class ModelCapabilityError(ExplanationError):
    """The model kind does not support the requested operation."""


def _argmax_lowest(scores):
    """Index of the maximum, lowest index on ties."""
    best = 0
    for k in range(1, len(scores)):
        if scores[k] > scores[best]:
            best = k
    return best


class LinearModel:
    """K x m linear score model: class = argmax_k (w_k . x + b_k)."""

    kind = "linear"

    def __init__(self, weights, biases):
        self.weights = np.asarray(weights, dtype=float)
        self.biases = np.asarray(biases, dtype=float)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a K x m matrix")
        if self.biases.shape != (self.weights.shape[0],):
            raise ValueError("biases must have one entry per class")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.biases).all()):
            raise ValueError("weights and biases must be finite")

    @property
    def num_classes(self):
        return self.weights.shape[0]

    @property
    def num_features(self):
        return self.weights.shape[1]

    def score(self, x, k):
        """Class-k score at point x."""
        return float(np.dot(self.weights[k], np.asarray(x, dtype=float)) + self.biases[k])

    def predict(self, x):
        scores = [self.score(x, k) for k in range(self.num_classes)]
        return _argmax_lowest(scores)

    def predict_batch(self, X):
        X = np.asarray(X, dtype=float)
        scores = X @ self.weights.T + self.biases
        return np.argmax(scores, axis=1)

    def __eq__(self, other):
        return (isinstance(other, LinearModel)
                and self.weights.shape == other.weights.shape
                and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.biases, other.biases))


_ACTIVATIONS = ("relu", "identity")


class MlpModel:
    """Dense feed-forward network; the last layer emits class scores."""

    kind = "mlp"

    def __init__(self, layers):
        # layers: list of (weights out x in, biases out, activation name)
        self.layers = []
        width = None
        for w, b, act in layers:
            w = np.asarray(w, dtype=float)
            b = np.asarray(b, dtype=float)
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError("layer shapes are inconsistent")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError("layer weights must be finite")
            if width is not None and w.shape[1] != width:
                raise ValueError("layer input width %d does not chain with %d"
                                 % (w.shape[1], width))
            if act not in _ACTIVATIONS:
                raise ValueError("unknown activation %r" % (act,))
            width = w.shape[0]
            self.layers.append((w, b, act))
        if not self.layers:
            raise ValueError("mlp needs at least one layer")

    @property
    def num_classes(self):
        return self.layers[-1][0].shape[0]

    @property
    def num_features(self):
        return self.layers[0][0].shape[1]

    def _forward(self, X):
        out = X
        for w, b, act in self.layers:
            out = out @ w.T + b
            if act == "relu":
                out = np.maximum(out, 0.0)
        return out

    def score(self, x, k):
        logits = self._forward(np.asarray(x, dtype=float))
        return float(logits[k])

    def predict(self, x):
        logits = self._forward(np.asarray(x, dtype=float))
        return _argmax_lowest(list(logits))

    def predict_batch(self, X):
        return np.argmax(self._forward(np.asarray(X, dtype=float)), axis=1)

    def __eq__(self, other):
        if not isinstance(other, MlpModel) or len(self.layers) != len(other.layers):
            return False
        for (w1, b1, a1), (w2, b2, a2) in zip(self.layers, other.layers):
            if a1 != a2 or w1.shape != w2.shape:
                return False
            if not (np.array_equal(w1, w2) and np.array_equal(b1, b2)):
                return False
        return True


# Restricted expression grammar for predicate rules.  A rule is either a
# class constant or a conditional chain "C1 if TEST else REST"; tests
# mix comparisons (chains allowed), and/or/not and +,-,*,/ arithmetic
# over feature names x1..xm and numeric literals.
_BIN_OPS = {ast.Add: "add", ast.Sub: "sub", ast.Mult: "mul", ast.Div: "div"}
_CMP_OPS = {ast.Lt: "lt", ast.LtE: "le", ast.Gt: "gt", ast.GtE: "ge",
            ast.Eq: "eq", ast.NotEq: "ne"}


class PredicateModel:
    """Classifier defined by a boolean rule expression over the features."""

    kind = "predicate"

    def __init__(self, rule, num_features, num_classes):
        self.rule = rule
        self._num_features = int(num_features)
        self._num_classes = int(num_classes)
        if self._num_features < 1:
            raise ValueError("num_features must be at least 1")
        if self._num_classes < 1:
            raise ValueError("num_classes must be at least 1")
        try:
            tree = ast.parse(rule, mode="eval")
        except SyntaxError as exc:
            raise ModelFormatError("rule: %s" % exc) from None
        self._tree = tree.body
        self._validate(self._tree, as_class=True)

    @property
    def num_classes(self):
        return self._num_classes

    @property
    def num_features(self):
        return self._num_features

    def _fail(self, node, why):
        raise ModelFormatError("rule: %s (column %d)" % (why, getattr(node, "col_offset", 0)))

    def _validate(self, node, as_class=False):
        if as_class:
            if isinstance(node, ast.IfExp):
                self._validate(node.body, as_class=True)
                self._validate(node.test)
                self._validate(node.orelse, as_class=True)
                return
            if isinstance(node, ast.Constant) and isinstance(node.value, int) \
                    and not isinstance(node.value, bool):
                if not 0 <= node.value < self._num_classes:
                    self._fail(node, "class %d outside 0..%d"
                               % (node.value, self._num_classes - 1))
                return
            self._fail(node, "expected a class constant or a conditional")
        if isinstance(node, ast.BoolOp):
            for sub in node.values:
                self._validate(sub)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.Not):
            self._validate(node.operand)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            self._validate(node.operand)
        elif isinstance(node, ast.Compare):
            for op in node.ops:
                if type(op) not in _CMP_OPS:
                    self._fail(node, "unsupported comparison")
            self._validate(node.left)
            for sub in node.comparators:
                self._validate(sub)
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BIN_OPS:
                self._fail(node, "unsupported operator")
            self._validate(node.left)
            self._validate(node.right)
        elif isinstance(node, ast.Name):
            name = node.id
            if not (name.startswith("x") and name[1:].isdigit()):
                self._fail(node, "unknown name %r (features are x1..x%d)"
                           % (name, self._num_features))
            idx = int(name[1:])
            if not 1 <= idx <= self._num_features:
                self._fail(node, "feature %s outside x1..x%d" % (name, self._num_features))
        elif isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                self._fail(node, "literal %r is not a number" % (node.value,))
        else:
            self._fail(node, "unsupported expression element")

    # Two deliberately separate evaluators: a plain-Python scalar walk
    # and a numpy columnwise walk.  Tests cross-check them.

    def _scalar(self, node, point):
        if isinstance(node, ast.IfExp):
            if self._scalar(node.test, point):
                return self._scalar(node.body, point)
            return self._scalar(node.orelse, point)
        if isinstance(node, ast.BoolOp):
            if isinstance(node.op, ast.And):
                return all(self._scalar(v, point) for v in node.values)
            return any(self._scalar(v, point) for v in node.values)
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.Not):
                return not self._scalar(node.operand, point)
            return -self._scalar(node.operand, point)
        if isinstance(node, ast.Compare):
            left = self._scalar(node.left, point)
            for op, rhs in zip(node.ops, node.comparators):
                right = self._scalar(rhs, point)
                name = _CMP_OPS[type(op)]
                ok = {"lt": left < right, "le": left <= right,
                      "gt": left > right, "ge": left >= right,
                      "eq": left == right, "ne": left != right}[name]
                if not ok:
                    return False
                left = right
            return True
        if isinstance(node, ast.BinOp):
            left = self._scalar(node.left, point)
            right = self._scalar(node.right, point)
            name = _BIN_OPS[type(node.op)]
            if name == "add":
                return left + right
            if name == "sub":
                return left - right
            if name == "mul":
                return left * right
            return left / right
        if isinstance(node, ast.Name):
            return point[int(node.id[1:]) - 1]
        return node.value

    def _batch(self, node, X):
        if isinstance(node, ast.IfExp):
            return np.where(self._batch(node.test, X),
                            self._batch(node.body, X),
                            self._batch(node.orelse, X))
        if isinstance(node, ast.BoolOp):
            parts = [np.asarray(self._batch(v, X)) for v in node.values]
            if isinstance(node.op, ast.And):
                return np.logical_and.reduce(np.broadcast_arrays(*parts)) if len(parts) > 1 else parts[0]
            return np.logical_or.reduce(np.broadcast_arrays(*parts)) if len(parts) > 1 else parts[0]
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.Not):
                return np.logical_not(self._batch(node.operand, X))
            return -self._batch(node.operand, X)
        if isinstance(node, ast.Compare):
            out = None
            left = self._batch(node.left, X)
            for op, rhs in zip(node.ops, node.comparators):
                right = self._batch(rhs, X)
                name = _CMP_OPS[type(op)]
                part = {"lt": left < right, "le": left <= right,
                        "gt": left > right, "ge": left >= right,
                        "eq": left == right, "ne": left != right}[name]
                out = part if out is None else np.logical_and(out, part)
                left = right
            return out
        if isinstance(node, ast.BinOp):
            left = self._batch(node.left, X)
            right = self._batch(node.right, X)
            name = _BIN_OPS[type(node.op)]
            if name == "add":
                return left + right
            if name == "sub":
                return left - right
            if name == "mul":
                return left * right
            return left / right
        if isinstance(node, ast.Name):
            return X[:, int(node.id[1:]) - 1]
        return node.value

    def score(self, x, k):
        raise ModelCapabilityError("predicate models expose no class scores")

    def predict(self, x):
        if len(x) != self._num_features:
            raise ValueError("point arity %d, expected %d" % (len(x), self._num_features))
        return int(self._scalar(self._tree, tuple(float(a) for a in x)))

    def predict_batch(self, X):
        X = np.asarray(X, dtype=float)
        out = np.asarray(self._batch(self._tree, X))
        if out.ndim == 0:
            out = np.full(X.shape[0], int(out))
        return out.astype(np.int64)

    def __eq__(self, other):
        return (isinstance(other, PredicateModel) and self.rule == other.rule
                and self._num_features == other._num_features
                and self._num_classes == other._num_classes)


def score(model, x, k):
    """Class-k score of a point; capability error for predicate models."""
    return model.score(x, k)


# ---------------------------------------------------------------------------
# Document I/O

def _want(doc, field, types, where):
    if field not in doc:
        raise ModelFormatError("%s: missing field %r" % (where, field))
    value = doc[field]
    if types is not None and not isinstance(value, types):
        raise ModelFormatError("%s.%s: expected %s, got %r"
                               % (where, field, types, type(value).__name__))
    return value


def _domain_to_doc(dom):
    if isinstance(dom, FiniteSet):
        return {"type": "finite", "values": list(dom.values)}
    return {"type": "real", "lower": dom.lower, "upper": dom.upper}


def _domain_from_doc(doc, where):
    if not isinstance(doc, dict):
        raise ModelFormatError("%s: domain must be an object" % where)
    kind = _want(doc, "type", str, where)
    if kind == "finite":
        values = _want(doc, "values", list, where)
        try:
            return FiniteSet(values)
        except ValueError as exc:
            raise ModelFormatError("%s.values: %s" % (where, exc)) from None
    if kind == "real":
        lower = doc.get("lower")
        upper = doc.get("upper")
        for name, val in (("lower", lower), ("upper", upper)):
            if val is not None and not isinstance(val, (int, float)):
                raise ModelFormatError("%s.%s: expected number or null" % (where, name))
        try:
            return RealInterval(lower, upper)
        except ValueError as exc:
            raise ModelFormatError("%s: %s" % (where, exc)) from None
    raise ModelFormatError("%s.type: unknown domain type %r" % (where, kind))


def _matrix(doc, field, where, rows=None, cols=None):
    data = _want(doc, field, list, where)
    if rows is not None and len(data) != rows:
        raise ModelFormatError("%s.%s: expected %d rows, got %d"
                               % (where, field, rows, len(data)))
    width = cols
    for r, row in enumerate(data):
        if not isinstance(row, list):
            raise ModelFormatError("%s.%s: row %d is not a list" % (where, field, r))
        if width is None:
            width = len(row)
        if len(row) != width:
            raise ModelFormatError("%s.%s: row %d has length %d, expected %d"
                                   % (where, field, r, len(row), width))
        for val in row:
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ModelFormatError("%s.%s: non-numeric entry in row %d"
                                       % (where, field, r))
    return data


def _vector(doc, field, where, length=None):
    data = _want(doc, field, list, where)
    if length is not None and len(data) != length:
        raise ModelFormatError("%s.%s: expected %d entries, got %d"
                               % (where, field, length, len(data)))
    for val in data:
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise ModelFormatError("%s.%s: non-numeric entry" % (where, field))
    return data


def model_to_doc(model, space):
    doc = {
        "kind": model.kind,
        "num_features": model.num_features,
        "num_classes": model.num_classes,
        "domains": [_domain_to_doc(d) for d in space.domains],
    }
    if isinstance(model, LinearModel):
        doc["weights"] = [[float(w) for w in row] for row in model.weights]
        doc["biases"] = [float(b) for b in model.biases]
    elif isinstance(model, MlpModel):
        doc["layers"] = [{
            "weights": [[float(w) for w in row] for row in wmat],
            "biases": [float(b) for b in bvec],
            "activation": act,
        } for wmat, bvec, act in model.layers]
    elif isinstance(model, PredicateModel):
        doc["rule"] = model.rule
    else:
        raise ValueError("unknown model kind %r" % (model,))
    return doc


def model_from_doc(doc):
    if not isinstance(doc, dict):
        raise ModelFormatError("model: document must be an object")
    kind = _want(doc, "kind", str, "model")
    m = _want(doc, "num_features", int, "model")
    k = _want(doc, "num_classes", int, "model")
    if m < 1:
        raise ModelFormatError("model.num_features: must be at least 1")
    if k < 1:
        raise ModelFormatError("model.num_classes: must be at least 1")
    domains = _want(doc, "domains", list, "model")
    if len(domains) != m:
        raise ModelFormatError("model.domains: expected %d entries, got %d"
                               % (m, len(domains)))
    space = FeatureSpace([_domain_from_doc(d, "model.domains[%d]" % i)
                          for i, d in enumerate(domains)])
    if kind == "linear":
        weights = _matrix(doc, "weights", "model", rows=k, cols=m)
        biases = _vector(doc, "biases", "model", length=k)
        return LinearModel(weights, biases), space
    if kind == "mlp":
        layers_doc = _want(doc, "layers", list, "model")
        if not layers_doc:
            raise ModelFormatError("model.layers: must not be empty")
        layers = []
        width = m
        for i, layer in enumerate(layers_doc):
            where = "model.layers[%d]" % i
            if not isinstance(layer, dict):
                raise ModelFormatError("%s: expected an object" % where)
            wmat = _matrix(layer, "weights", where, cols=width)
            bvec = _vector(layer, "biases", where, length=len(wmat))
            act = _want(layer, "activation", str, where)
            if act not in _ACTIVATIONS:
                raise ModelFormatError("%s.activation: unknown activation %r" % (where, act))
            width = len(wmat)
            layers.append((wmat, bvec, act))
        if width != k:
            raise ModelFormatError("model.layers: last layer emits %d scores, expected %d"
                                   % (width, k))
        return MlpModel(layers), space
    if kind == "predicate":
        rule = _want(doc, "rule", str, "model")
        return PredicateModel(rule, m, k), space
    raise ModelFormatError("model.kind: unknown kind %r" % (kind,))


def save_model(model, space, path):
    """Write a model and its feature space as one JSON document."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_doc(model, space), fh, indent=1)
        fh.write("\n")


def load_model(path):
    """Read a model document; returns (model, feature_space)."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError("model: invalid JSON (%s)" % exc) from None
    return model_from_doc(doc)


def save_instance(instance, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"point": list(instance.point), "label": instance.label}, fh)
        fh.write("\n")


def load_instance(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError("instance: invalid JSON (%s)" % exc) from None
    if not isinstance(doc, dict):
        raise ModelFormatError("instance: document must be an object")
    point = _vector(doc, "point", "instance")
    label = _want(doc, "label", int, "instance")
    if isinstance(label, bool):
        raise ModelFormatError("instance.label: expected int")
    return Instance(point, label)
