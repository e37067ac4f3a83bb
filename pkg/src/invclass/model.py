"""Classifier parameters, stable softmax evaluation, and target-class reduction.

A linear softmax classifier is parameterized by a weight matrix ``A`` of shape
(K, D) and a bias vector ``b`` of length K; the logits at an input ``x`` are
``z = A @ x + b`` and class probabilities are ``softmax(z)``. Classes are
numbered 1..K at every public surface of this package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ModelFormatError

# Rayleigh-quotient power iteration on the K x K Gram matrix.
_POWER_TOL = 1e-10
_POWER_CAP = 10_000


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SoftmaxModel:
    """A fixed linear softmax classifier.

    Attributes
    ----------
    weights : ndarray of shape (K, D)
        Per-class weight rows.
    biases : ndarray of shape (K,)
        Per-class biases.
    """

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        biases = np.asarray(self.biases, dtype=np.float64)
        if weights.ndim != 2 or biases.ndim != 1:
            raise ModelFormatError("weights must be a matrix and biases a vector")
        if weights.shape[0] != biases.shape[0]:
            raise ModelFormatError(
                "weight rows (%d) and bias entries (%d) disagree"
                % (weights.shape[0], biases.shape[0])
            )
        if weights.shape[0] < 2:
            raise ModelFormatError("a classifier needs at least 2 classes")
        if weights.shape[1] < 1:
            raise ModelFormatError("feature dimension must be at least 1")
        if not (np.isfinite(weights).all() and np.isfinite(biases).all()):
            raise ModelFormatError("model entries must be finite")
        object.__setattr__(self, "weights", _as_readonly(weights))
        object.__setattr__(self, "biases", _as_readonly(biases))

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.weights @ x + self.biases


@dataclass(frozen=True)
class ReducedModel:
    """Quantities derived from a model for one fixed target class.

    ``a_bar`` is the weight matrix with the target class's row subtracted from
    every row (so its target row is zero), ``b_bar`` the analogously shifted
    biases, ``gram`` the K x K matrix ``a_bar @ a_bar.T``, and ``spec_norm_sq``
    the squared spectral norm of ``a_bar``, i.e. the largest eigenvalue of
    ``gram``. Building one costs O(D K^2) once; every solve against the same
    (model, target class) pair then reuses it.
    """

    target_class: int
    a_bar: np.ndarray
    b_bar: np.ndarray
    gram: np.ndarray
    spec_norm_sq: float

    @property
    def class_count(self) -> int:
        return self.a_bar.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.a_bar.shape[1]


@dataclass(frozen=True)
class LogisticModel:
    """A binary logistic classifier: p_1(x) = 1 / (1 + exp(w @ x + w0))."""

    w: np.ndarray
    w0: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 1 or not np.isfinite(w).all() or not np.isfinite(self.w0):
            raise ModelFormatError("logistic parameters must be a finite vector and scalar")
        object.__setattr__(self, "w", _as_readonly(w))
        object.__setattr__(self, "w0", float(self.w0))


def softmax_eval(model: SoftmaxModel, x: np.ndarray):
    """Evaluate logits, probabilities, and negative log-probabilities at ``x``.

    Parameters
    ----------
    model : SoftmaxModel
    x : ndarray of shape (D,)

    Returns
    -------
    z : ndarray of shape (K,)
        Logits ``A @ x + b``.
    p : ndarray of shape (K,)
        Softmax probabilities. Entries may underflow to 0.0 for extreme
        logit gaps; ``g`` stays accurate regardless.
    g : ndarray of shape (K,)
        ``g_i = -ln p_i``, computed from max-shifted logits so it is finite
        and accurate even when ``p_i`` underflows.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.feature_dim,):
        raise ModelFormatError(
            "instance has length %d, model expects %d" % (x.size, model.feature_dim)
        )
    if not np.isfinite(x).all():
        raise ModelFormatError("instance entries must be finite")
    z = model.logits(x)
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    g = lse - z
    p = np.exp(-g)
    return z, p, g


def reduce(model: SoftmaxModel, target_class: int) -> ReducedModel:
    """Build the reduced quantities for ``target_class`` (1-based).

    Subtracts the target class's weight row and bias from all rows, forms the
    K x K Gram matrix of the reduced weights, and estimates its largest
    eigenvalue by power iteration (relative tolerance 1e-10, capped at 10000
    iterations).
    """
    k = int(target_class)
    if not 1 <= k <= model.class_count:
        raise ModelFormatError(
            "target class %d out of range 1..%d" % (k, model.class_count)
        )
    ki = k - 1
    a_bar = model.weights - model.weights[ki]
    b_bar = model.biases - model.biases[ki]
    gram = a_bar @ a_bar.T
    # symmetrize away accumulation asymmetry before factoring anything on it
    gram = 0.5 * (gram + gram.T)
    return ReducedModel(
        target_class=k,
        a_bar=_as_readonly(a_bar),
        b_bar=_as_readonly(b_bar),
        gram=_as_readonly(gram),
        spec_norm_sq=_largest_eigenvalue(gram),
    )


def _largest_eigenvalue(gram: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    n = gram.shape[0]
    rng = np.random.default_rng(0x1F2E3D)  # fixed seed: results must be reproducible
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(_POWER_CAP):
        w = gram @ v
        rayleigh = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        if abs(rayleigh - estimate) <= _POWER_TOL * max(abs(rayleigh), 1e-300):
            return rayleigh
        estimate = rayleigh
    return estimate


def to_logistic(model: SoftmaxModel) -> LogisticModel:
    """Convert a K=2 softmax model to its logistic form.

    With ``w = a_2 - a_1`` and ``w0 = b_2 - b_1``, the class-1 probability
    ``1 / (1 + exp(w @ x + w0))`` equals the softmax ``p_1`` for every x.
    """
    if model.class_count != 2:
        raise ModelFormatError(
            "logistic form requires K=2, model has K=%d" % model.class_count
        )
    return LogisticModel(
        w=model.weights[1] - model.weights[0],
        w0=float(model.biases[1] - model.biases[0]),
    )


# ---------------------------------------------------------------------------
# Serialization.
#
# Model JSON: {"K": int, "D": int, "biases": [K floats],
#              "weights": [K rows of D floats]}.
# CSV pair: a weights file with K lines of D comma-separated values and a
# biases file with one line of K values.
# Instance files: one line of D comma-separated values, or a JSON array.
# ---------------------------------------------------------------------------


def _read_text(source) -> str:
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8")
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data


def load_model(source, format: str = "json") -> SoftmaxModel:
    """Load a model from a path or stream.

    Parameters
    ----------
    source : path, stream, or (weights, biases) pair of paths/streams
        A single path/stream for ``format="json"``; a two-element sequence
        for ``format="csv-pair"``.
    format : {"json", "csv-pair"}

    Returns
    -------
    SoftmaxModel
        Validated model; all invariants checked.
    """
    if format == "json":
        text = _read_text(source)
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError("model JSON does not parse: %s" % exc) from exc
        if not isinstance(obj, dict):
            raise ModelFormatError("model JSON must be an object")
        missing = {"K", "D", "weights", "biases"} - set(obj)
        if missing:
            raise ModelFormatError("model JSON missing fields: %s" % sorted(missing))
        try:
            weights = np.array(obj["weights"], dtype=np.float64)
            biases = np.array(obj["biases"], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ModelFormatError("model arrays are not numeric: %s" % exc) from exc
        if weights.ndim != 2:
            raise ModelFormatError("weights must be K rows of D values")
        model = SoftmaxModel(weights, biases)
        if model.class_count != int(obj["K"]) or model.feature_dim != int(obj["D"]):
            raise ModelFormatError(
                "declared K=%s, D=%s disagree with array shapes %s"
                % (obj["K"], obj["D"], weights.shape)
            )
        return model
    if format == "csv-pair":
        try:
            weights_src, biases_src = source
        except (TypeError, ValueError):
            raise ModelFormatError("csv-pair format needs (weights, biases) sources")
        weights = _parse_csv_matrix(_read_text(weights_src))
        biases = _parse_csv_vector(_read_text(biases_src))
        return SoftmaxModel(weights, biases)
    raise ModelFormatError("unknown model format %r" % format)


def save_model(model: SoftmaxModel, dest) -> None:
    """Write a model as JSON. Loading it back restores identical parameters."""
    obj = {
        "K": model.class_count,
        "D": model.feature_dim,
        "biases": model.biases.tolist(),
        "weights": model.weights.tolist(),
    }
    text = json.dumps(obj)
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        dest.write(text)


def _parse_csv_matrix(text: str) -> np.ndarray:
    rows = []
    for line in text.splitlines():
        if line.strip():
            rows.append(_parse_csv_line(line))
    if not rows:
        raise ModelFormatError("weights CSV is empty")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ModelFormatError("weights CSV rows have inconsistent lengths %s" % sorted(widths))
    return np.array(rows, dtype=np.float64)


def _parse_csv_vector(text: str) -> np.ndarray:
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) != 1:
        raise ModelFormatError("biases CSV must hold exactly one line")
    return np.array(_parse_csv_line(lines[0]), dtype=np.float64)


def _parse_csv_line(line: str):
    try:
        return [float(tok) for tok in line.strip().split(",")]
    except ValueError as exc:
        raise ModelFormatError("bad numeric field: %s" % exc) from exc


def load_instance(source) -> np.ndarray:
    """Load an instance vector from one CSV line or a JSON array."""
    text = _read_text(source).strip()
    if not text:
        raise ModelFormatError("instance file is empty")
    if text.startswith("["):
        try:
            values = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError("instance JSON does not parse: %s" % exc) from exc
        if not isinstance(values, list):
            raise ModelFormatError("instance JSON must be an array")
        arr = np.array(values, dtype=np.float64)
    else:
        lines = [line for line in text.splitlines() if line.strip()]
        if len(lines) != 1:
            raise ModelFormatError("instance CSV must hold exactly one line")
        arr = np.array(_parse_csv_line(lines[0]), dtype=np.float64)
    if arr.ndim != 1 or not np.isfinite(arr).all():
        raise ModelFormatError("instance must be a flat vector of finite numbers")
    return arr


def format_vector(x: np.ndarray) -> str:
    """One CSV line with 17 significant digits per entry (round-trip exact)."""
    return ",".join(format(float(v), ".17g") for v in x)


def save_instance(x: np.ndarray, dest) -> None:
    text = format_vector(x) + "\n"
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        dest.write(text)
