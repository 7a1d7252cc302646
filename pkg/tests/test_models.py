import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dxplain import (FeatureSpace, FiniteSet, Instance, LinearModel, MlpModel,
                     ModelFormatError, PredicateModel, RealInterval,
                     load_instance, load_model, model_from_doc, model_to_doc,
                     save_instance, save_model, score)
from dxplain.models import ModelCapabilityError

from reference import linear_predict, mlp_predict


def test_linear_model_basics():
    model = LinearModel([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.5])
    assert model.num_classes == 2 and model.num_features == 2
    assert model.score((2.0, 1.0), 0) == 2.0
    assert model.score((2.0, 1.0), 1) == 1.5
    assert model.predict((2.0, 1.0)) == 0
    assert model.predict((0.0, 0.0)) == 1  # bias wins


def test_linear_tie_breaks_low():
    model = LinearModel([[1.0], [1.0], [1.0]], [0.0, 0.0, 0.0])
    assert model.predict((3.0,)) == 0
    assert list(model.predict_batch([[3.0], [-1.0]])) == [0, 0]


def test_linear_validation():
    with pytest.raises(ValueError):
        LinearModel([1.0, 2.0], [0.0])
    with pytest.raises(ValueError):
        LinearModel([[1.0]], [0.0, 0.0])
    with pytest.raises(ValueError):
        LinearModel([[float("nan")]], [0.0])


@given(st.lists(st.lists(st.floats(-5, 5), min_size=3, max_size=3),
                min_size=2, max_size=4),
       st.lists(st.lists(st.floats(-4, 4), min_size=3, max_size=3),
                min_size=1, max_size=8))
def test_linear_batch_agrees_with_reference(weights, points):
    biases = [0.25 * k for k in range(len(weights))]
    model = LinearModel(weights, biases)
    batch = list(model.predict_batch(points))
    for x, got in zip(points, batch):
        assert model.predict(x) == got == linear_predict(weights, biases, x)


def test_mlp_forward():
    # relu(x1 - x2) decides: hidden h = max(x1 - x2, 0); scores (h, 0.5 - h)
    layers = [([[1.0, -1.0]], [0.0], "relu"),
              ([[1.0], [-1.0]], [0.0, 0.5], "identity")]
    model = MlpModel(layers)
    assert model.num_features == 2 and model.num_classes == 2
    assert model.predict((2.0, 0.0)) == 0
    assert model.predict((0.0, 2.0)) == 1
    assert list(model.predict_batch([[2.0, 0.0], [0.0, 2.0]])) == [0, 1]
    ref_layers = [([[1.0, -1.0]], [0.0], "relu"),
                  ([[1.0], [-1.0]], [0.0, 0.5], "identity")]
    for x in [(2.0, 0.0), (0.0, 2.0), (1.0, 1.0)]:
        assert model.predict(x) == mlp_predict(ref_layers, x)


def test_mlp_validation():
    with pytest.raises(ValueError):
        MlpModel([])
    with pytest.raises(ValueError):
        MlpModel([([[1.0]], [0.0], "tanh")])
    with pytest.raises(ValueError):
        MlpModel([([[1.0, 2.0]], [0.0], "relu"),
                  ([[1.0, 1.0]], [0.0], "identity")])  # width mismatch


def test_predicate_scalar_and_batch_agree():
    rule = "2 if x1 + x2 > 3 else (1 if not (x1 < 1 or x3 == 0.5) else 0)"
    model = PredicateModel(rule, 3, 3)
    pts = [(a, b, c) for a in (0.0, 1.0, 2.0)
           for b in (0.0, 2.0) for c in (0.5, 1.0)]
    batch = list(model.predict_batch(pts))
    assert batch == [model.predict(p) for p in pts]


def test_predicate_comparison_chain():
    model = PredicateModel("1 if 0 < x1 < 2 else 0", 1, 2)
    assert model.predict((1.0,)) == 1
    assert model.predict((2.0,)) == 0
    assert list(model.predict_batch([[1.0], [2.0], [-1.0]])) == [1, 0, 0]


def test_predicate_constant_rule():
    model = PredicateModel("0", 2, 1)
    assert model.predict((5.0, 5.0)) == 0
    assert list(model.predict_batch([[1.0, 2.0], [3.0, 4.0]])) == [0, 0]


def test_predicate_rejects_bad_rules():
    cases = [
        "__import__('os')",          # call
        "x1 if x1 > 0 else 0",       # non-constant class position
        "1 if x9 > 0 else 0",        # feature out of range
        "1 if y1 > 0 else 0",        # unknown name
        "1 if x1 ** 2 > 0 else 0",   # power not allowed
        "3 if x1 > 0 else 0",        # class out of range
        "1 if x1 > 'a' else 0",      # non-numeric literal
        "1 if (x1 > 0) + 1 else",    # syntax error
    ]
    for rule in cases:
        with pytest.raises(ModelFormatError):
            PredicateModel(rule, 2, 2)


def test_predicate_error_mentions_column():
    with pytest.raises(ModelFormatError, match="column"):
        PredicateModel("1 if zz > 0 else 0", 2, 2)


def test_predicate_has_no_scores():
    model = PredicateModel("0", 1, 1)
    with pytest.raises(ModelCapabilityError):
        score(model, (1.0,), 0)
    assert score(LinearModel([[2.0]], [1.0]), (3.0,), 0) == 7.0


def _roundtrip(model, space, tmp_path):
    path = tmp_path / "model.json"
    save_model(model, space, path)
    loaded, loaded_space = load_model(path)
    assert loaded == model
    assert loaded_space == space
    return path


def test_document_roundtrip_linear(tmp_path):
    # awkward floats must survive save/load bit for bit
    model = LinearModel([[0.1, 1e-17, -3.0], [2.0 / 3.0, 7e300, 0.5]],
                        [1e-300, -0.1])
    space = FeatureSpace([FiniteSet([0.1, 0.2]), RealInterval(None, 7e300),
                         RealInterval(-1.5, None)])
    _roundtrip(model, space, tmp_path)


def test_document_roundtrip_mlp(tmp_path):
    model = MlpModel([([[0.3, -0.7], [1.1, 0.0]], [0.1, -0.2], "relu"),
                      ([[1.0, -1.0]], [0.05], "identity"),
                      ([[2.0], [-2.0]], [0.0, 1.0 / 3.0], "identity")])
    space = FeatureSpace([RealInterval(0.0, 1.0)] * 2)
    _roundtrip(model, space, tmp_path)


def test_document_roundtrip_predicate(tmp_path):
    model = PredicateModel("1 if x1 >= 0.5 else 0", 1, 2)
    space = FeatureSpace([FiniteSet([0.0, 0.5, 1.0])])
    path = _roundtrip(model, space, tmp_path)
    text = path.read_text()
    assert '"kind"' in text and '"rule"' in text


def test_model_doc_validation():
    base = model_to_doc(LinearModel([[1.0, 2.0]], [0.0]),
                        FeatureSpace([FiniteSet([0, 1]), FiniteSet([0, 1])]))
    bad = dict(base)
    del bad["kind"]
    with pytest.raises(ModelFormatError, match="kind"):
        model_from_doc(bad)
    bad = dict(base, weights=[[1.0]])
    with pytest.raises(ModelFormatError, match="weights"):
        model_from_doc(bad)
    bad = dict(base, domains=[base["domains"][0]])
    with pytest.raises(ModelFormatError, match="domains"):
        model_from_doc(bad)
    bad = dict(base, kind="forest")
    with pytest.raises(ModelFormatError, match="forest"):
        model_from_doc(bad)
    bad = dict(base, domains=[{"type": "finite", "values": [1, 1]},
                              base["domains"][1]])
    with pytest.raises(ModelFormatError, match="values"):
        model_from_doc(bad)
    with pytest.raises(ModelFormatError):
        model_from_doc([])


def test_instance_roundtrip(tmp_path):
    path = tmp_path / "inst.json"
    save_instance(Instance((0.1, -2.0), 3), path)
    inst = load_instance(path)
    assert inst.point == (0.1, -2.0) and inst.label == 3
    path.write_text('{"point": [1, 2]}')
    with pytest.raises(ModelFormatError, match="label"):
        load_instance(path)
    path.write_text("not json")
    with pytest.raises(ModelFormatError, match="JSON"):
        load_instance(path)


def test_load_model_bad_json(tmp_path):
    path = tmp_path / "m.json"
    path.write_text("{broken")
    with pytest.raises(ModelFormatError, match="JSON"):
        load_model(path)


def test_mlp_batch_matches_scalar_randomized():
    rng = np.random.default_rng(7)
    for _ in range(20):
        sizes = [3, int(rng.integers(1, 5)), int(rng.integers(2, 4))]
        layers = []
        for w_in, w_out in zip(sizes, sizes[1:]):
            w = rng.integers(-4, 5, size=(w_out, w_in)) / 2.0
            b = rng.integers(-4, 5, size=w_out) / 2.0
            act = "relu" if w_out != sizes[-1] else "identity"
            layers.append((w, b, act))
        model = MlpModel(layers)
        X = rng.integers(-4, 5, size=(16, 3)) / 2.0
        assert list(model.predict_batch(X)) == [model.predict(x) for x in X]
