"""Desk-scale adversarial machinery: small classifiers with hand-derived
gradients (no autodiff framework), FGSM/PGD under l-inf and l2 budgets, and
accuracy evaluation.

Classifiers operate on flattened pixels in storage range [0, 1]; images of
any (H, W[, C]) shape are accepted and flattened internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import io_formats

__all__ = [
    "ToyClassifier",
    "AttackConfig",
    "EvalReport",
    "TrainingError",
    "train_classifier",
    "grad_input",
    "fgsm_attack",
    "pgd_attack",
    "evaluate",
    "save_classifier",
    "load_classifier",
]

KIND_CODES = {"softmax-linear": 0, "mlp-1hidden": 1}


class TrainingError(RuntimeError):
    pass


def _as_batch(x: np.ndarray, input_dim: int) -> tuple[np.ndarray, bool]:
    """Flatten a single image or a batch of images to (N, input_dim)."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == input_dim and (x.ndim == 1 or x.ndim in (2, 3)):
        return x.reshape(1, input_dim), True
    flat = x.reshape(x.shape[0], -1)
    if flat.shape[1] != input_dim:
        raise ValueError(f"input size {flat.shape[1]} != classifier input_dim {input_dim}")
    return flat, False


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=1, keepdims=True)


@dataclass
class ToyClassifier:
    """Either a linear softmax (W, b) or a 1-hidden-layer tanh MLP
    (W1, b1, W2, b2); all gradients below are derived by hand.
    """

    kind: str
    num_classes: int
    input_dim: int
    params: list[np.ndarray] = field(default_factory=list)

    def logits(self, x: np.ndarray) -> np.ndarray:
        flat, single = _as_batch(x, self.input_dim)
        if self.kind == "softmax-linear":
            W, b = self.params
            out = flat @ W.T + b
        else:
            W1, b1, W2, b2 = self.params
            h = np.tanh(flat @ W1.T + b1)
            out = h @ W2.T + b2
        return out[0] if single else out

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = self.logits(x)
        return int(np.argmax(out)) if out.ndim == 1 else np.argmax(out, axis=1)

    def loss(self, x: np.ndarray, labels) -> float:
        """Mean softmax cross-entropy."""
        flat, _ = _as_batch(x, self.input_dim)
        labels = np.atleast_1d(np.asarray(labels, dtype=int))
        logits = np.atleast_2d(self.logits(flat))
        z = logits - np.max(logits, axis=1, keepdims=True)
        logp = z - np.log(np.sum(np.exp(z), axis=1, keepdims=True))
        return float(-np.mean(logp[np.arange(len(labels)), labels]))


def _grad_input_batch(clf: ToyClassifier, flat: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(mean CE)/d(input) for a flat batch, per sample (no 1/N factor)."""
    onehot = np.zeros((len(labels), clf.num_classes))
    onehot[np.arange(len(labels)), labels] = 1.0
    if clf.kind == "softmax-linear":
        W, b = clf.params
        p = _softmax(flat @ W.T + b)
        return (p - onehot) @ W
    W1, b1, W2, b2 = clf.params
    h = np.tanh(flat @ W1.T + b1)
    p = _softmax(h @ W2.T + b2)
    back = ((p - onehot) @ W2) * (1.0 - h * h)
    return back @ W1


def grad_input(clf: ToyClassifier, x: np.ndarray, label: int) -> np.ndarray:
    """Analytic gradient of the cross-entropy loss w.r.t. the input pixels."""
    x = np.asarray(x, dtype=np.float64)
    flat, _ = _as_batch(x, clf.input_dim)
    g = _grad_input_batch(clf, flat, np.atleast_1d(np.asarray(label, dtype=int)))
    return g.reshape(x.shape)


def train_classifier(
    images,
    labels,
    kind: str = "softmax-linear",
    epochs: int | None = None,
    lr: float | None = None,
    seed: int = 0,
    hidden: int = 32,
    weight_decay: float = 1e-3,
    min_train_acc: float = 0.95,
) -> ToyClassifier:
    """Full-batch gradient descent on softmax cross-entropy with L2 decay
    on the weight matrices (biases are not decayed).

    Deterministic given the seed. Raises TrainingError if training accuracy
    ends below ``min_train_acc`` (the toy tasks are separable; failure means
    a misconfigured run, not bad luck). Default epochs/lr are per kind: the
    tanh MLP needs a much smaller step than the linear model to stay out of
    saturation.
    """
    if kind not in KIND_CODES:
        raise ValueError(f"unknown classifier kind {kind!r}")
    if epochs is None:
        epochs = 300 if kind == "softmax-linear" else 2000
    if lr is None:
        lr = 2.0 if kind == "softmax-linear" else 0.02
    x = np.asarray(images, dtype=np.float64).reshape(len(labels), -1)
    y = np.asarray(labels, dtype=int)
    n, d = x.shape
    num_classes = int(y.max()) + 1
    rng = np.random.default_rng(seed)

    # Train on centered features for conditioning; the mean is folded back
    # into the first-layer bias below, so the model still takes raw pixels.
    center = x.mean(axis=0)
    x = x - center

    if kind == "softmax-linear":
        params = [rng.normal(0.0, 1e-3, (num_classes, d)), np.zeros(num_classes)]
    else:
        params = [
            rng.normal(0.0, 1.0 / np.sqrt(d), (hidden, d)),
            np.zeros(hidden),
            rng.normal(0.0, 1.0 / np.sqrt(hidden), (num_classes, hidden)),
            np.zeros(num_classes),
        ]
    clf = ToyClassifier(kind=kind, num_classes=num_classes, input_dim=d, params=params)

    onehot = np.zeros((n, num_classes))
    onehot[np.arange(n), y] = 1.0
    for _ in range(epochs):
        if kind == "softmax-linear":
            W, b = clf.params
            p = _softmax(x @ W.T + b)
            err = (p - onehot) / n
            W -= lr * (err.T @ x + weight_decay * W)
            b -= lr * np.sum(err, axis=0)
        else:
            W1, b1, W2, b2 = clf.params
            hmat = np.tanh(x @ W1.T + b1)
            p = _softmax(hmat @ W2.T + b2)
            err = (p - onehot) / n
            W2 -= lr * (err.T @ hmat + weight_decay * W2)
            b2 -= lr * np.sum(err, axis=0)
            back = (err @ W2) * (1.0 - hmat * hmat)
            W1 -= lr * (back.T @ x + weight_decay * W1)
            b1 -= lr * np.sum(back, axis=0)

    clf.params[1] -= clf.params[0] @ center  # first layer is affine in both kinds

    acc = float(np.mean(clf.predict(x + center) == y))
    if acc < min_train_acc:
        raise TrainingError(
            f"train accuracy {acc:.3f} below floor {min_train_acc}; "
            f"kind={kind}, epochs={epochs}, lr={lr}, n={n}, d={d}"
        )
    return clf


@dataclass(frozen=True)
class AttackConfig:
    """PGD settings; FGSM is the special case iterations=1, random_start=False."""

    norm: str = "linf"
    epsilon: float = 8.0 / 255.0
    step_size: float = 0.007
    iterations: int = 40
    seed: int = 0
    random_start: bool = True

    def __post_init__(self):
        if self.norm not in ("linf", "l2"):
            raise ValueError(f"norm must be 'linf' or 'l2', got {self.norm!r}")
        if self.epsilon < 0 or self.step_size <= 0 or self.iterations < 1:
            raise ValueError("need epsilon >= 0, step_size > 0, iterations >= 1")


def _project(delta: np.ndarray, norm: str, epsilon: float) -> np.ndarray:
    if norm == "linf":
        return np.clip(delta, -epsilon, epsilon)
    flat = delta.reshape(delta.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1, keepdims=True)
    scale = np.minimum(1.0, epsilon / np.maximum(norms, 1e-30))
    return (flat * scale).reshape(delta.shape)


def pgd_attack(
    clf: ToyClassifier,
    x: np.ndarray,
    labels,
    config: AttackConfig,
    return_loss_history: bool = False,
):
    """Iterative loss ascent projected into the epsilon-ball and [0, 1] box.

    Accepts one image or a batch; the perturbation direction is the gradient
    sign for l-inf and the l2-normalized gradient for l2. The attack may
    fail to flip a label; that is a measurement, not an error.
    """
    x = np.asarray(x, dtype=np.float64)
    flat, single = _as_batch(x, clf.input_dim)
    y = np.atleast_1d(np.asarray(labels, dtype=int))
    if len(y) != flat.shape[0]:
        raise ValueError(f"{flat.shape[0]} images vs {len(y)} labels")
    rng = np.random.default_rng(config.seed)

    if config.epsilon == 0:
        out = flat.reshape(x.shape)
        return (out, [clf.loss(flat, y)]) if return_loss_history else out

    if config.random_start:
        if config.norm == "linf":
            delta = rng.uniform(-config.epsilon, config.epsilon, flat.shape)
        else:
            direction = rng.standard_normal(flat.shape)
            direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-30)
            radius = config.epsilon * rng.uniform(0.0, 1.0, (flat.shape[0], 1)) ** (1.0 / flat.shape[1])
            delta = direction * radius
        delta = np.clip(flat + delta, 0.0, 1.0) - flat
    else:
        delta = np.zeros_like(flat)

    history = []
    for _ in range(config.iterations):
        if return_loss_history:
            history.append(clf.loss(flat + delta, y))
        g = _grad_input_batch(clf, flat + delta, y)
        if config.norm == "linf":
            step = config.step_size * np.sign(g)
        else:
            gn = np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-30)
            step = config.step_size * g / gn
        delta = _project(delta + step, config.norm, config.epsilon)
        delta = np.clip(flat + delta, 0.0, 1.0) - flat
    if return_loss_history:
        history.append(clf.loss(flat + delta, y))

    adv = (flat + delta).reshape(x.shape)
    return (adv, history) if return_loss_history else adv


def fgsm_attack(clf: ToyClassifier, x: np.ndarray, labels, epsilon: float = 8.0 / 255.0):
    """Single full-size sign step: PGD with one iteration and no random start."""
    cfg = AttackConfig(norm="linf", epsilon=epsilon, step_size=epsilon,
                       iterations=1, random_start=False)
    return pgd_attack(clf, x, labels, cfg)


@dataclass
class EvalReport:
    standard_acc: float
    robust_acc: float
    records: list[dict]


def evaluate(clf: ToyClassifier, clean, other, labels) -> EvalReport:
    """Standard accuracy on ``clean`` and robust accuracy on ``other``
    (adversarial or purified images), with per-image prediction records.
    """
    clean = np.asarray(clean, dtype=np.float64)
    other = np.asarray(other, dtype=np.float64)
    y = np.asarray(labels, dtype=int)
    if len(clean) != len(y) or len(other) != len(y):
        raise ValueError(f"length mismatch: {len(clean)} clean, {len(other)} other, {len(y)} labels")
    pred_clean = np.atleast_1d(clf.predict(clean.reshape(len(y), -1)))
    pred_other = np.atleast_1d(clf.predict(other.reshape(len(y), -1)))
    records = [
        {"label": int(t), "clean_pred": int(pc), "other_pred": int(po)}
        for t, pc, po in zip(y, pred_clean, pred_other)
    ]
    return EvalReport(
        standard_acc=float(np.mean(pred_clean == y)),
        robust_acc=float(np.mean(pred_other == y)),
        records=records,
    )


def save_classifier(path, clf: ToyClassifier) -> None:
    io_formats.write_fpcl(path, KIND_CODES[clf.kind], clf.params)


def load_classifier(path) -> ToyClassifier:
    kind_code, arrays = io_formats.read_fpcl(path)
    kinds = {v: k for k, v in KIND_CODES.items()}
    if kind_code not in kinds:
        raise io_formats.FormatError(f"unknown classifier kind code {kind_code}")
    kind = kinds[kind_code]
    expected = 2 if kind == "softmax-linear" else 4
    if len(arrays) != expected:
        raise io_formats.FormatError(f"{kind} expects {expected} arrays, file has {len(arrays)}")
    num_classes, input_dim = (arrays[0].shape if kind == "softmax-linear"
                              else (arrays[2].shape[0], arrays[0].shape[1]))
    return ToyClassifier(kind=kind, num_classes=int(num_classes), input_dim=int(input_dim),
                         params=[a.copy() for a in arrays])
