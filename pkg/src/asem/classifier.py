"""Multitask classifier: shared token encoder with ACD, ATE and ATP heads.

Everything is plain numpy with hand-written backward passes. Probabilities
are clamped at 1e-12 inside the log.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .corpus import POLARITIES, TaggedSentence, TermSpan
from .embedding import EmbeddingTable, _window_sums
from .errors import DataError, Diverged, EmptySentence
from .pseudolabel import POLARITY_TAGS, TERM_TAGS, PseudoLabeledSentence, spans_from_bio

logger = logging.getLogger(__name__)

TASKS = ("acd", "ate", "atp")
CHECKPOINT_VERSION = 1
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class MultitaskConfig:
    lambda_acd: float = 1.0
    lambda_ate: float = 0.8
    lambda_atp: float = 0.6
    batch_size: int = 16
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    epochs: int = 20
    hidden: int = 64
    context_dim: int = 32
    context_window: int = 2
    token_norm: str = "sum"  # "sum" per sample as written, or "mean" over tokens
    tasks: tuple[str, ...] = TASKS
    rng_seed: int = 0

    def __post_init__(self):
        lams = self.lambdas
        if min(lams) < 0 or max(lams) <= 0:
            raise ValueError("task weights must be >= 0 with at least one > 0")
        if self.token_norm not in ("sum", "mean"):
            raise ValueError("token_norm must be 'sum' or 'mean'")
        if not set(self.tasks) <= set(TASKS) or "acd" not in self.tasks:
            raise ValueError(f"tasks must include 'acd' and be a subset of {TASKS}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")

    @property
    def lambdas(self) -> tuple[float, float, float]:
        return (self.lambda_acd, self.lambda_ate, self.lambda_atp)

    def weight(self, task: str) -> float:
        return self.lambdas[TASKS.index(task)] if task in self.tasks else 0.0


# --- encoder ---------------------------------------------------------------


class SharedEncoderBackend(Protocol):
    """Maps a batch of sentences to one hidden vector per token, with a backward pass."""

    id: str
    hidden: int
    params: dict

    def forward(self, sentences: Sequence[TaggedSentence]) -> tuple[np.ndarray, object]: ...

    def backward(self, grad_hidden: np.ndarray, cache) -> dict: ...


class WindowEncoder:
    """Frozen CBOW vector ++ learned projection of context averages, then tanh layer.

    The context is the ±window average next to the whole-sentence average, so
    every token sees sentence-level cues such as a distant opinion word.
    """

    id = "cbow-window"

    def __init__(self, table: EmbeddingTable, hidden: int = 64, context_dim: int = 32,
                 window: int = 2, rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.table = table
        self.window = window
        self.hidden = hidden
        d = table.dim
        self.params = {
            "enc_U": rng.normal(0.0, 1.0 / np.sqrt(2 * d), (2 * d, context_dim)),
            "enc_W": rng.normal(0.0, 1.0 / np.sqrt(d + context_dim), (d + context_dim, hidden)),
            "enc_b": np.zeros(hidden),
        }
        self._feature_cache: dict = {}

    def features(self, sentence: TaggedSentence):
        key = tuple(sentence.surfaces)
        cached = self._feature_cache.get(key)
        if cached is not None:
            return cached
        zero = np.zeros(self.table.dim)
        emb = np.array([self.table.vector(w) if w in self.table else zero for w in key])
        ctx_sum, ctx_n = _window_sums(emb, self.window)
        local = ctx_sum / np.maximum(ctx_n, 1)[:, None]
        ctx = np.concatenate([local, np.broadcast_to(emb.mean(axis=0), emb.shape)], axis=1)
        if len(self._feature_cache) < 200_000:
            self._feature_cache[key] = (emb, ctx)
        return emb, ctx

    def forward(self, sentences):
        feats = [self.features(s) for s in sentences]
        emb = np.concatenate([f[0] for f in feats])
        ctx = np.concatenate([f[1] for f in feats])
        p = self.params
        proj = ctx @ p["enc_U"]
        x = np.concatenate([emb, proj], axis=1)
        h = np.tanh(x @ p["enc_W"] + p["enc_b"])
        return h, (ctx, x, h)

    def backward(self, grad_hidden, cache):
        ctx, x, h = cache
        p = self.params
        dz = grad_hidden * (1.0 - h * h)
        dx = dz @ p["enc_W"].T
        d = self.table.dim
        return {
            "enc_W": x.T @ dz,
            "enc_b": dz.sum(axis=0),
            "enc_U": ctx.T @ dx[:, d:],
        }


# --- batches and model -----------------------------------------------------


@dataclass
class Batch:
    sentences: list[TaggedSentence]
    acd: np.ndarray
    ate: np.ndarray  # per token class index, -1 where unlabeled
    atp: np.ndarray

    @property
    def lengths(self) -> np.ndarray:
        return np.array([len(s) for s in self.sentences])

    def __len__(self):
        return len(self.sentences)


def make_batch(samples: Sequence[PseudoLabeledSentence]) -> Batch:
    acd, ate, atp = [], [], []
    for p in samples:
        n = len(p.sentence)
        acd.append(p.acd_label)
        ate.extend([TERM_TAGS.index(t) for t in p.term_bio] if p.term_bio else [-1] * n)
        atp.extend([POLARITY_TAGS.index(t) for t in p.polarity_bio] if p.polarity_bio else [-1] * n)
        if len(ate) != len(atp):
            raise DataError(f"sentence {p.sentence.id}: BIO tags do not match token count")
    return Batch([p.sentence for p in samples], np.array(acd, dtype=np.int64),
                 np.array(ate, dtype=np.int64), np.array(atp, dtype=np.int64))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class MultitaskModel:
    def __init__(self, encoder: SharedEncoderBackend, aspects: Sequence[str],
                 config: MultitaskConfig = MultitaskConfig(), rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(config.rng_seed)
        self.encoder = encoder
        self.aspects = list(aspects)
        self.config = config
        h = encoder.hidden
        sizes = {"acd": len(self.aspects), "ate": len(TERM_TAGS), "atp": len(POLARITY_TAGS)}
        self.head_params = {}
        for task in TASKS:
            self.head_params[f"{task}_W"] = rng.normal(0.0, 1.0 / np.sqrt(h), (h, sizes[task]))
            self.head_params[f"{task}_b"] = np.zeros(sizes[task])
        self.loss_curve: list[float] = []

    @classmethod
    def create(cls, table: EmbeddingTable, aspects, config: MultitaskConfig = MultitaskConfig()):
        rng = np.random.default_rng(config.rng_seed)
        encoder = WindowEncoder(table, config.hidden, config.context_dim, config.context_window, rng)
        return cls(encoder, aspects, config, rng)

    @property
    def params(self) -> dict:
        return {**self.encoder.params, **self.head_params}

    def forward(self, sentences: Sequence[TaggedSentence], tasks=TASKS):
        """Per-task probabilities plus the cache needed by ``backward``."""
        if not sentences or any(len(s) == 0 for s in sentences):
            raise EmptySentence("cannot encode an empty sentence")
        hidden, enc_cache = self.encoder.forward(sentences)
        lengths = np.array([len(s) for s in sentences])
        starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        mean = np.add.reduceat(hidden, starts, axis=0) / lengths[:, None]
        hp = self.head_params
        probs = {"acd": softmax(mean @ hp["acd_W"] + hp["acd_b"])}
        for task in ("ate", "atp"):
            if task in tasks:
                probs[task] = softmax(hidden @ hp[f"{task}_W"] + hp[f"{task}_b"])
        return probs, (hidden, mean, lengths, enc_cache)

    def backward(self, batch: Batch, probs: dict, cache, config: MultitaskConfig) -> dict:
        hidden, mean, lengths, enc_cache = cache
        hp = self.head_params
        n = len(batch)
        grads = {}
        d_acd = probs["acd"].copy()
        d_acd[np.arange(n), batch.acd] -= 1.0
        d_acd *= config.weight("acd") / n
        grads["acd_W"] = mean.T @ d_acd
        grads["acd_b"] = d_acd.sum(axis=0)
        d_hidden = np.repeat((d_acd @ hp["acd_W"].T) / lengths[:, None], lengths, axis=0)
        for task in ("ate", "atp"):
            if task not in probs:
                grads[f"{task}_W"] = np.zeros_like(hp[f"{task}_W"])
                grads[f"{task}_b"] = np.zeros_like(hp[f"{task}_b"])
                continue
            labels = getattr(batch, task)
            w = _token_weights(labels, lengths, config.weight(task), config.token_norm, n)
            d = probs[task].copy()
            idx = np.flatnonzero(labels >= 0)
            d[idx, labels[idx]] -= 1.0
            d *= w[:, None]
            grads[f"{task}_W"] = hidden.T @ d
            grads[f"{task}_b"] = d.sum(axis=0)
            d_hidden += d @ hp[f"{task}_W"].T
        grads.update(self.encoder.backward(d_hidden, enc_cache))
        return grads

    def loss_and_grads(self, batch: Batch, config: MultitaskConfig | None = None):
        config = config or self.config
        probs, cache = self.forward(batch.sentences, config.tasks)
        loss = multitask_loss(batch, probs, config)
        return loss, self.backward(batch, probs, cache, config)

    def predict(self, sentence: TaggedSentence) -> "Prediction":
        probs, _ = self.forward([sentence])
        return decode(probs, self.aspects)

    def predict_many(self, sentences: Sequence[TaggedSentence], batch_size: int = 256) -> list["Prediction"]:
        out = []
        for i in range(0, len(sentences), batch_size):
            chunk = sentences[i:i + batch_size]
            probs, _ = self.forward(chunk)
            lengths = [len(s) for s in chunk]
            offsets = np.concatenate([[0], np.cumsum(lengths)])
            for b, (lo, hi) in enumerate(zip(offsets[:-1], offsets[1:])):
                one = {"acd": probs["acd"][b:b + 1], "ate": probs["ate"][lo:hi], "atp": probs["atp"][lo:hi]}
                out.append(decode(one, self.aspects))
        return out

    # --- checkpoints ---

    def save(self, path) -> None:
        enc = self.encoder
        if not isinstance(enc, WindowEncoder):
            raise TypeError("only the built-in encoder can be checkpointed")
        meta = {
            "version": CHECKPOINT_VERSION,
            "encoder": enc.id,
            "aspects": self.aspects,
            "config": asdict(self.config),
            "loss_curve": self.loss_curve,
        }
        arrays = {f"param/{k}": v for k, v in self.params.items()}
        arrays["table/matrix"] = enc.table.matrix
        arrays["table/words"] = np.array(enc.table.words, dtype=object)
        with open(path, "wb") as fh:
            np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)

    @classmethod
    def load(cls, path) -> "MultitaskModel":
        with np.load(path, allow_pickle=True) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("version") != CHECKPOINT_VERSION:
                raise DataError(f"{path}: unsupported checkpoint version {meta.get('version')}")
            cfg = dict(meta["config"])
            cfg["tasks"] = tuple(cfg["tasks"])
            config = MultitaskConfig(**cfg)
            table = EmbeddingTable(list(data["table/words"]), data["table/matrix"])
            model = cls.create(table, meta["aspects"], config)
            for k in model.params:
                target = model.encoder.params if k.startswith("enc_") else model.head_params
                target[k] = np.array(data[f"param/{k}"])
            model.loss_curve = list(meta["loss_curve"])
        return model


def _token_weights(labels, lengths, lam, token_norm, n):
    per_token = np.repeat(np.full(len(lengths), lam / n), lengths)
    if token_norm == "mean":
        labeled = np.add.reduceat((labels >= 0).astype(float), np.concatenate([[0], np.cumsum(lengths)[:-1]]))
        per_token /= np.repeat(np.maximum(labeled, 1.0), lengths)
    return per_token * (labels >= 0)


def task_losses(batch: Batch, probs: dict, token_norm: str = "sum") -> dict[str, float]:
    """Unweighted per-task terms L_t, each already divided by the batch size."""
    n = len(batch)
    lengths = batch.lengths
    out = {"acd": -np.log(np.maximum(probs["acd"][np.arange(n), batch.acd], PROB_FLOOR)).sum() / n}
    for task in ("ate", "atp"):
        if task not in probs:
            out[task] = 0.0
            continue
        labels = getattr(batch, task)
        idx = np.flatnonzero(labels >= 0)
        logp = np.zeros(len(labels))
        logp[idx] = np.log(np.maximum(probs[task][idx, labels[idx]], PROB_FLOOR))
        w = _token_weights(labels, lengths, 1.0, token_norm, n)
        out[task] = float(-(w * logp).sum())
    return {k: float(v) for k, v in out.items()}


def multitask_loss(batch: Batch, probs: dict, config: MultitaskConfig) -> float:
    """Weighted cross-entropy summed over tasks, samples and classes, over |batch|."""
    parts = task_losses(batch, probs, config.token_norm)
    return float(sum(config.weight(t) * parts[t] for t in TASKS))


# --- optimisation ----------------------------------------------------------


class Adam:
    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.lr, self.beta1, self.beta2, self.eps, self.weight_decay = lr, beta1, beta2, eps, weight_decay
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            if self.weight_decay:
                p *= 1.0 - self.lr * self.weight_decay
            p -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def dataset_loss(model: MultitaskModel, data: Sequence[PseudoLabeledSentence], config=None,
                 chunk: int = 512) -> float:
    config = config or model.config
    total = 0.0
    for i in range(0, len(data), chunk):
        batch = make_batch(data[i:i + chunk])
        probs, _ = model.forward(batch.sentences, config.tasks)
        total += multitask_loss(batch, probs, config) * len(batch)
    return total / len(data)


def train(model: MultitaskModel, data: Sequence[PseudoLabeledSentence],
          config: MultitaskConfig | None = None) -> MultitaskModel:
    """Mini-batch Adam(W) on the weighted multitask loss, in place.

    ``model.loss_curve`` holds the full-data loss before training and after
    each epoch.
    """
    config = config or model.config
    if not data:
        raise DataError("the training set is empty")
    data = list(data)
    rng = np.random.default_rng(config.rng_seed + 1)
    params = model.params
    # params is a fresh dict of the same arrays, so in-place steps reach the model
    opt = Adam(params, config.learning_rate, weight_decay=config.weight_decay)
    model.loss_curve = [dataset_loss(model, data, config)]
    for epoch in range(config.epochs):
        order = rng.permutation(len(data))
        for start in range(0, len(data), config.batch_size):
            batch = make_batch([data[i] for i in order[start:start + config.batch_size]])
            loss, grads = model.loss_and_grads(batch, config)
            if not np.isfinite(loss):
                raise Diverged(f"non-finite loss in epoch {epoch + 1}")
            opt.step(params, grads)
        epoch_loss = dataset_loss(model, data, config)
        if not np.isfinite(epoch_loss):
            raise Diverged(f"non-finite loss after epoch {epoch + 1}")
        model.loss_curve.append(epoch_loss)
        logger.debug("epoch %d loss %.5f", epoch + 1, epoch_loss)
    return model


# --- decoding --------------------------------------------------------------


@dataclass
class Prediction:
    aspect: str
    terms: list[TermSpan] = field(default_factory=list)
    term_tags: list[str] = field(default_factory=list)
    polarity_tags: list[str] = field(default_factory=list)


def repair_bio(tags: Sequence[str]) -> list[str]:
    """Turn any I that does not continue a B/I into B."""
    out, prev = [], "O"
    for tag in tags:
        if tag == "I" and prev == "O":
            tag = "B"
        out.append(tag)
        prev = tag
    return out


def span_polarity(polarity_tags: Sequence[str], span: TermSpan) -> str:
    """Majority polarity of the span's tokens; O tokens abstain, ties go to POS."""
    votes = {p: 0 for p in POLARITIES}
    for tag in polarity_tags[span.start:span.end]:
        if tag != "O":
            votes[tag.split("-", 1)[1]] += 1
    return POLARITIES[1] if votes[POLARITIES[1]] > votes[POLARITIES[0]] else POLARITIES[0]


def decode(probs: dict, aspects: Sequence[str]) -> Prediction:
    aspect = aspects[int(np.argmax(probs["acd"][0]))]
    term_tags = repair_bio([TERM_TAGS[i] for i in np.argmax(probs["ate"], axis=1)])
    pol_tags = [POLARITY_TAGS[i] for i in np.argmax(probs["atp"], axis=1)]
    spans = [TermSpan(s.start, s.end, span_polarity(pol_tags, s)) for s in spans_from_bio(term_tags)]
    return Prediction(aspect, spans, term_tags, pol_tags)


# --- export ----------------------------------------------------------------


def export_training_set(path, data: Sequence[PseudoLabeledSentence], aspects: Sequence[str]) -> None:
    """Tab-separated: tokens, ACD label, term BIO, polarity BIO (space-joined)."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in data:
            n = len(p.sentence)
            fh.write("\t".join([
                " ".join(p.sentence.surfaces), aspects[p.acd_label],
                " ".join(p.term_bio or ["O"] * n), " ".join(p.polarity_bio or ["O"] * n),
            ]) + "\n")
