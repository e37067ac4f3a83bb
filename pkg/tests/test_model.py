"""Model construction, target-class reduction, and serialization."""

import io
import json

import numpy as np
import pytest

from invclass import (
    ModelFormatError,
    SoftmaxModel,
    format_vector,
    load_instance,
    load_model,
    reduce,
    save_instance,
    save_model,
    softmax_eval,
    to_logistic,
)


def _random_model(rng, K, D, scale=1.0):
    return SoftmaxModel(
        weights=rng.standard_normal((K, D)) * scale,
        biases=rng.standard_normal(K) * scale,
    )


def test_rejects_malformed_parameters():
    with pytest.raises(ModelFormatError):
        SoftmaxModel(weights=np.ones(4), biases=np.ones(4))  # weights not a matrix
    with pytest.raises(ModelFormatError):
        SoftmaxModel(weights=np.ones((3, 4)), biases=np.ones(2))
    with pytest.raises(ModelFormatError):
        SoftmaxModel(weights=np.ones((1, 4)), biases=np.ones(1))  # one class
    with pytest.raises(ModelFormatError):
        SoftmaxModel(weights=np.ones((3, 0)), biases=np.ones(3))
    bad = np.ones((3, 4))
    bad[1, 2] = np.nan
    with pytest.raises(ModelFormatError):
        SoftmaxModel(weights=bad, biases=np.ones(3))


def test_parameters_are_read_only():
    model = _random_model(np.random.default_rng(0), 3, 5)
    with pytest.raises(ValueError):
        model.weights[0, 0] = 1.0
    with pytest.raises(ValueError):
        model.biases[0] = 1.0


def test_reduction_zeroes_the_target_row():
    rng = np.random.default_rng(1)
    for _ in range(20):
        K = int(rng.integers(2, 9))
        D = int(rng.integers(1, 30))
        model = _random_model(rng, K, D)
        k = int(rng.integers(1, K + 1))
        red = reduce(model, k)
        assert red.target_class == k
        np.testing.assert_array_equal(red.a_bar[k - 1], np.zeros(D))
        assert red.b_bar[k - 1] == 0.0
        # reduced logits at any x differ from the full logits by a constant
        x = rng.standard_normal(D)
        z = model.logits(x)
        z_bar = red.a_bar @ x + red.b_bar
        np.testing.assert_allclose(z_bar, z - z[k - 1], atol=1e-12)


def test_reduction_rejects_out_of_range_class():
    model = _random_model(np.random.default_rng(2), 4, 6)
    for k in (0, -1, 5):
        with pytest.raises(ModelFormatError):
            reduce(model, k)


def test_reduced_softmax_matches_full_softmax():
    """Shifting all logits by the target entry leaves the softmax unchanged."""
    rng = np.random.default_rng(3)
    for _ in range(50):
        K = int(rng.integers(2, 10))
        D = int(rng.integers(1, 40))
        model = _random_model(rng, K, D, scale=2.0)
        k = int(rng.integers(1, K + 1))
        red = reduce(model, k)
        x = rng.standard_normal(D)
        _, p_full, _ = softmax_eval(model, x)
        z_bar = red.a_bar @ x + red.b_bar
        e = np.exp(z_bar - z_bar.max())
        np.testing.assert_allclose(e / e.sum(), p_full, atol=1e-14)


def test_gram_matches_definition():
    rng = np.random.default_rng(4)
    for _ in range(20):
        model = _random_model(rng, int(rng.integers(2, 8)), int(rng.integers(2, 25)))
        red = reduce(model, 1)
        np.testing.assert_allclose(red.gram, red.a_bar @ red.a_bar.T, atol=1e-12)
        np.testing.assert_array_equal(red.gram, red.gram.T)


def test_spectral_norm_matches_dense_eigenvalue():
    rng = np.random.default_rng(5)
    for _ in range(25):
        K = int(rng.integers(2, 12))
        D = int(rng.integers(2, 60))
        model = _random_model(rng, K, D, scale=3.0)
        red = reduce(model, int(rng.integers(1, K + 1)))
        top = np.linalg.eigvalsh(red.gram).max()
        np.testing.assert_allclose(red.spec_norm_sq, top, rtol=1e-8, atol=1e-12)


def test_softmax_eval_probabilities():
    rng = np.random.default_rng(6)
    for _ in range(30):
        model = _random_model(rng, int(rng.integers(2, 9)), int(rng.integers(1, 20)))
        x = rng.standard_normal(model.feature_dim)
        z, p, g = softmax_eval(model, x)
        np.testing.assert_allclose(p.sum(), 1.0, atol=1e-12)
        assert np.all(p >= 0)
        np.testing.assert_allclose(np.exp(-g), p, atol=1e-15)
        np.testing.assert_allclose(z, model.weights @ x + model.biases)


def test_softmax_eval_survives_extreme_logits():
    # a logit gap of 2000 underflows p for the losing class; g must stay exact
    model = SoftmaxModel(weights=np.array([[1.0], [-1.0]]), biases=np.zeros(2))
    _, p, g = softmax_eval(model, np.array([1000.0]))
    assert p[1] == 0.0
    assert np.isfinite(g).all()
    np.testing.assert_allclose(g[1], 2000.0, rtol=1e-15)
    assert g[0] >= 0.0


def test_softmax_eval_input_validation():
    model = _random_model(np.random.default_rng(7), 3, 4)
    with pytest.raises(ModelFormatError):
        softmax_eval(model, np.zeros(5))
    with pytest.raises(ModelFormatError):
        softmax_eval(model, np.array([0.0, np.inf, 0.0, 0.0]))


def test_logistic_form_reproduces_binary_softmax():
    rng = np.random.default_rng(8)
    for _ in range(40):
        D = int(rng.integers(1, 30))
        model = _random_model(rng, 2, D, scale=2.0)
        lm = to_logistic(model)
        x = rng.standard_normal(D)
        _, p, _ = softmax_eval(model, x)
        u = float(lm.w @ x) + lm.w0
        np.testing.assert_allclose(1.0 / (1.0 + np.exp(u)), p[0], rtol=1e-12)


def test_logistic_form_requires_two_classes():
    model = _random_model(np.random.default_rng(9), 3, 4)
    with pytest.raises(ModelFormatError):
        to_logistic(model)


def test_model_json_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    model = _random_model(rng, 5, 7)
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    np.testing.assert_array_equal(back.weights, model.weights)
    np.testing.assert_array_equal(back.biases, model.biases)
    # stream form
    buf = io.StringIO()
    save_model(model, buf)
    back2 = load_model(io.StringIO(buf.getvalue()))
    np.testing.assert_array_equal(back2.weights, model.weights)


def test_model_json_validation():
    with pytest.raises(ModelFormatError):
        load_model(io.StringIO("not json"))
    with pytest.raises(ModelFormatError):
        load_model(io.StringIO("[1, 2]"))
    with pytest.raises(ModelFormatError):
        load_model(io.StringIO(json.dumps({"K": 2, "D": 1, "weights": [[0.0], [1.0]]})))
    # declared shape disagrees with arrays
    obj = {"K": 3, "D": 1, "weights": [[0.0], [1.0]], "biases": [0.0, 0.0]}
    with pytest.raises(ModelFormatError):
        load_model(io.StringIO(json.dumps(obj)))


def test_csv_pair_round_trip(tmp_path):
    model = _random_model(np.random.default_rng(11), 3, 4)
    wpath = tmp_path / "w.csv"
    bpath = tmp_path / "b.csv"
    wpath.write_text(
        "\n".join(",".join(format(v, ".17g") for v in row) for row in model.weights)
    )
    bpath.write_text(",".join(format(v, ".17g") for v in model.biases))
    back = load_model((wpath, bpath), format="csv-pair")
    np.testing.assert_array_equal(back.weights, model.weights)
    np.testing.assert_array_equal(back.biases, model.biases)


def test_csv_pair_validation(tmp_path):
    w = tmp_path / "w.csv"
    b = tmp_path / "b.csv"
    w.write_text("1,2\n3\n")  # ragged rows
    b.write_text("0,0")
    with pytest.raises(ModelFormatError):
        load_model((w, b), format="csv-pair")
    w.write_text("1,2\n3,4\n")
    b.write_text("0,0\n1,1\n")  # biases must be a single line
    with pytest.raises(ModelFormatError):
        load_model((w, b), format="csv-pair")
    with pytest.raises(ModelFormatError):
        load_model(w, format="csv")  # unknown format name


def test_instance_round_trip_is_bitwise(tmp_path):
    rng = np.random.default_rng(12)
    for i in range(20):
        x = rng.standard_normal(int(rng.integers(1, 50))) * 10.0 ** rng.integers(-8, 8)
        path = tmp_path / ("inst_%d.csv" % i)
        save_instance(x, path)
        np.testing.assert_array_equal(load_instance(path), x)


def test_instance_json_form():
    x = load_instance(io.StringIO("[1.5, -2.0, 0.25]"))
    np.testing.assert_array_equal(x, [1.5, -2.0, 0.25])
    with pytest.raises(ModelFormatError):
        load_instance(io.StringIO('{"a": 1}'))
    with pytest.raises(ModelFormatError):
        load_instance(io.StringIO(""))
    with pytest.raises(ModelFormatError):
        load_instance(io.StringIO("1,2\n3,4"))


def test_format_vector_round_trips_exactly():
    rng = np.random.default_rng(13)
    x = rng.standard_normal(64) * 1e-7
    text = format_vector(x)
    back = np.array([float(tok) for tok in text.split(",")])
    np.testing.assert_array_equal(back, x)
