"""End-to-end orchestration with content-addressed stage artifacts."""

from __future__ import annotations

import hashlib
import json
import logging
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from . import classifier as clf
from .config import PipelineConfig, dump_config
from .corpus import (
    POLARITIES, LabeledSentence, LexiconTagger, SeedLexicon, bundled_pos_lexicon, get_tagger,
    read_corpus_file, read_labeled_file, read_pos_lexicon, read_seed_lexicon, split_corpus,
    write_seed_lexicon,
)
from .embedding import EmbeddingTable, train_cbow
from .errors import AsemError, StageError
from .evaluation import accuracy, macro_f1, per_class_f1, sentence_atp, span_prf
from .pseudolabel import (
    AspectLexicon, PseudoLabeler, filter_uncertain, noun_counts, write_pseudo_labels,
)
from .retrieval import (
    AugmentedSet, CbowSumEncoder, PrecomputedEncoder, RetrievalIndex, build_task_embeddings,
    exclude_overlap, get_encoder, knn_retrieve, label_augmented,
)
from .sec import enhance_seed_words

logger = logging.getLogger(__name__)

STAGES = ("load", "embeddings", "pseudo-label", "enhance-seeds", "relabel", "retrieve", "train", "evaluate")


def _digest(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(json.dumps(part, sort_keys=True, default=str).encode())
        h.update(b"\0")
    return h.hexdigest()[:16]


def _file_digest(path) -> str:
    if not path:
        return ""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Pipeline:
    """Runs the stages in order; every stage writes under ``output_dir/<stage>/<hash>/``.

    A stage hash chains its own config section onto its upstream hash, so a
    config change only invalidates the stages after it. CBOW vectors and the
    classifier checkpoint are reused when their directory already exists.
    """

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.paths.output_dir)
        self.hashes: dict[str, str] = {}
        self.done: set[str] = set()

    # --- plumbing ---

    @contextmanager
    def _stage(self, name: str, *config_parts):
        previous = STAGES[STAGES.index(name) - 1] if name != "load" else None
        self.hashes[name] = _digest(self.hashes.get(previous, ""), name, *config_parts)
        logger.info("stage %s [%s]", name, self.hashes[name])
        try:
            yield
        except StageError:
            raise
        except (AsemError, OSError, ValueError, KeyError) as exc:
            raise StageError(name, exc) from exc
        self.done.add(name)

    def stage_dir(self, name: str) -> Path:
        d = self.out / name / self.hashes[name]
        d.mkdir(parents=True, exist_ok=True)
        return d

    def run(self, until: str = "evaluate") -> dict | None:
        if until not in STAGES:
            raise ValueError(f"unknown stage {until!r}")
        for name in STAGES[:STAGES.index(until) + 1]:
            if name not in self.done:
                getattr(self, "stage_" + name.replace("-", "_"))()
        return getattr(self, "report", None)

    # --- stages ---

    def stage_load(self):
        p = self.cfg.paths
        digests = {k: _file_digest(getattr(p, k)) for k in
                   ("in_domain", "bank", "test", "seeds", "pos_lexicon", "dev_labeled")}
        with self._stage("load", digests, asdict(self.cfg.corpus), self.cfg.run.seed):
            tagger = get_tagger(self.cfg.corpus.tagger)
            if p.pos_lexicon:
                extra = read_pos_lexicon(p.pos_lexicon)
                if isinstance(tagger, LexiconTagger):
                    tagger = tagger.extended(extra)
                else:
                    tagger = LexiconTagger({**bundled_pos_lexicon(), **extra})
            self.tagger = tagger
            self.seeds: SeedLexicon = read_seed_lexicon(p.seeds)
            corpus = read_corpus_file(p.in_domain, tagger)
            self.in_domain, self.dev = split_corpus(corpus, self.cfg.corpus.split_ratio, self.cfg.run.seed)
            self.bank = read_corpus_file(p.bank, tagger) if p.bank else []
            self.test: list[LabeledSentence] = read_labeled_file(p.test, tagger)
            self.dev_labeled = read_labeled_file(p.dev_labeled, tagger) if p.dev_labeled else []
            unknown = {s.aspect for s in self.test} - set(self.seeds.aspects)
            if unknown:
                raise AsemError(f"test file uses aspects missing from the seed lexicon: {sorted(unknown)}")

    def stage_embeddings(self):
        with self._stage("embeddings", asdict(self.cfg.embedding), _file_digest(self.cfg.paths.embeddings)):
            d = self.stage_dir("embeddings")
            path = d / "vectors.txt"
            if self.cfg.paths.embeddings:
                self.table = EmbeddingTable.load(self.cfg.paths.embeddings)
            elif path.exists():
                self.table = EmbeddingTable.load(path)
            else:
                self.table = train_cbow(self.in_domain + self.dev + self.bank, self.cfg.cbow())
                self.table.save(path)

    def _labeler(self, lexicon: AspectLexicon) -> PseudoLabeler:
        pl = self.cfg.pseudolabel
        return PseudoLabeler(lexicon, self.table, pl.m, pl.atp_window)

    def stage_pseudo_label(self):
        with self._stage("pseudo-label", asdict(self.cfg.pseudolabel)):
            self.initial_lexicon = AspectLexicon.from_seeds(self.seeds, {})
            self.initial_labels = self._labeler(self.initial_lexicon).label(self.in_domain)
            write_pseudo_labels(self.stage_dir("pseudo-label") / "initial.tsv", self.initial_labels,
                                self.initial_lexicon.aspects)

    def stage_enhance_seeds(self):
        sec = self.cfg.sec
        with self._stage("enhance-seeds", asdict(sec)):
            if sec.enabled:
                self.sec_trace = enhance_seed_words(self.in_domain, self.initial_lexicon, self.table,
                                                    sec.gamma, epsilon=sec.epsilon)
                added = self.sec_trace.mapped
            else:
                self.sec_trace = None
                added = {}
            self.added = dict(sorted(added.items()))
            self.lexicon = self.initial_lexicon.with_additions(self.added)
            enhanced = SeedLexicon(dict(self.seeds.aspects), dict(self.seeds.polarities),
                                   {a: self.lexicon.additional[a] for a in self.lexicon.aspects})
            write_seed_lexicon(enhanced, self.stage_dir("enhance-seeds") / "seeds.enhanced.ini")

    def stage_relabel(self):
        with self._stage("relabel"):
            self.labeler = self._labeler(self.lexicon)
            labeled = self.labeler.label(self.in_domain)
            self.certain, self.uncertain = filter_uncertain(labeled, self.cfg.sec.gamma)
            d = self.stage_dir("relabel")
            write_pseudo_labels(d / "in_domain.tsv", labeled, self.lexicon.aspects)
            write_pseudo_labels(d / "certain.tsv", self.certain, self.lexicon.aspects)

    def _encoder(self):
        r, p = self.cfg.retrieval, self.cfg.paths
        if r.encoder == "cbow-sum":
            enc = CbowSumEncoder(self.table)
            return enc, enc
        if r.encoder == "precomputed":
            bank_enc = PrecomputedEncoder.from_files(p.bank_vectors)
            query_enc = (PrecomputedEncoder.from_files(p.query_vectors, p.phrase_vectors or None)
                         if p.query_vectors else PrecomputedEncoder({}, {}))
            return bank_enc, query_enc
        enc = get_encoder(r.encoder, self.table)
        return enc, enc

    def stage_retrieve(self):
        r = self.cfg.retrieval
        with self._stage("retrieve", asdict(r), _file_digest(self.cfg.paths.bank_vectors),
                         _file_digest(self.cfg.paths.query_vectors), _file_digest(self.cfg.paths.phrase_vectors)):
            self.augmented = AugmentedSet()
            if r.k > 0:
                bank_enc, query_enc = self._encoder()
                queries = build_task_embeddings(self.lexicon, [p.sentence for p in self.certain], query_enc)
                index = RetrievalIndex.build(self.bank, bank_enc)
                retrieved = knn_retrieve(index, queries, min(r.k, len(index)))
                by_id = {s.id: s for s in self.bank}
                candidates = exclude_overlap([by_id[i] for i in retrieved.ids], self.in_domain)
                # term frequencies for augmented sentences pool the in-domain split with them
                counts = noun_counts(self.in_domain + candidates)
                self.augmented = label_augmented(candidates, self.labeler, self.cfg.sec.gamma, r.filter,
                                                 counts, retrieved.origins)
                logger.info("retrieved %d bank sentences for %d queries, kept %d",
                            len(candidates), len(queries), len(self.augmented))
            write_pseudo_labels(self.stage_dir("retrieve") / "augmented.tsv", self.augmented.labeled,
                                self.lexicon.aspects)

    def stage_train(self):
        with self._stage("train", asdict(self.cfg.classifier)):
            self.training_set = list(self.certain) + list(self.augmented.labeled)
            d = self.stage_dir("train")
            clf.export_training_set(d / "training_set.tsv", self.training_set, self.lexicon.aspects)
            path = d / "model.npz"
            if path.exists():
                self.model = clf.MultitaskModel.load(path)
            else:
                self.model = clf.MultitaskModel.create(self.table, self.lexicon.aspects, self.cfg.multitask())
                clf.train(self.model, self.training_set)
                self.model.save(path)

    def stage_evaluate(self):
        with self._stage("evaluate"):
            metrics = {"test": evaluate(self.model, self.test, self.labeler)}
            if self.dev_labeled:
                metrics["dev"] = evaluate(self.model, self.dev_labeled, self.labeler)
            self.report = {
                "config_hash": self.cfg.config_hash(),
                "seed": self.cfg.run.seed,
                "stages": dict(self.hashes),
                "counts": {
                    "in_domain": len(self.in_domain), "dev": len(self.dev), "bank": len(self.bank),
                    "test": len(self.test), "certain": len(self.certain), "uncertain": len(self.uncertain),
                    "seed_words_added": len(self.added), "augmented": len(self.augmented),
                    "augmented_dropped": self.augmented.dropped, "training": len(self.training_set),
                },
                "added_seed_words": self.added,
                "loss_curve": [round(x, 10) for x in self.model.loss_curve],
                "metrics": metrics,
            }
            write_report(self.report, self.out)
            dump_config(self.cfg, self.stage_dir("evaluate") / "config.ini")


def evaluate(model: clf.MultitaskModel, data: Sequence[LabeledSentence], labeler: PseudoLabeler) -> dict:
    """ACD accuracy/macro-F1, ATE span F1, and term- and sentence-level polarity scores."""
    preds = model.predict_many([d.sentence for d in data])
    aspects = model.aspects
    gold = [d.aspect for d in data]
    guess = [p.aspect for p in preds]
    out = {"acd": {
        "accuracy": accuracy(gold, guess),
        "macro_f1": macro_f1(gold, guess, aspects),
        "per_class_f1": per_class_f1(gold, guess, aspects),
    }}
    with_terms = [(d, p) for d, p in zip(data, preds) if d.terms]
    if with_terms:
        precision, recall, f1 = span_prf([d.terms for d, _ in with_terms], [p.terms for _, p in with_terms])
        out["ate"] = {"precision": precision, "recall": recall, "f1": f1}
        g_pol = [t.polarity for d, _ in with_terms for t in d.terms]
        p_pol = [clf.span_polarity(p.polarity_tags, t) for d, p in with_terms for t in d.terms]
        out["atp_term"] = _cls_scores(g_pol, p_pol)
        g_sent, p_sent = [], []
        for d, p in with_terms:
            polarities = {t.polarity for t in d.terms}
            if len(polarities) != 1:
                continue  # multi-polarity sentences are not scored at sentence level
            g_sent.append(polarities.pop())
            if p.terms:
                p_sent.append(sentence_atp([t.polarity for t in p.terms]))
            else:
                scores = labeler.polarity_scorer(d.sentence.surfaces)
                p_sent.append(POLARITIES[int(np.argmax(scores.scores))])
        if g_sent:
            out["atp_sentence"] = _cls_scores(g_sent, p_sent)
    return out


def _cls_scores(gold, guess) -> dict:
    return {"accuracy": accuracy(gold, guess), "macro_f1": macro_f1(gold, guess, POLARITIES)}


def format_report(report: dict) -> str:
    lines = [f"config {report['config_hash']}  seed {report.get('seed')}"]
    for split, tasks in report["metrics"].items():
        lines.append(f"[{split}]")
        lines.append(f"  {'task':<14}{'metric':<12}{'value':>8}")
        for task, scores in tasks.items():
            for name, value in scores.items():
                if isinstance(value, dict):
                    for cls, v in value.items():
                        lines.append(f"  {task:<14}{'F1 ' + str(cls):<12}{v:>8.4f}")
                else:
                    lines.append(f"  {task:<14}{name:<12}{value:>8.4f}")
    if "counts" in report:
        lines.append("[counts]")
        lines += [f"  {k:<20}{v:>8}" for k, v in report["counts"].items()]
    return "\n".join(lines) + "\n"


def write_report(report: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "report.txt").write_text(format_report(report), encoding="utf-8")


def run_pipeline(cfg: PipelineConfig, until: str = "evaluate") -> dict | None:
    cfg.validate()
    return Pipeline(cfg).run(until)


def run_seeds(cfg: PipelineConfig, seeds: Sequence[int]) -> dict:
    """Run once per seed under ``output_dir/seed-<n>`` and report the metric means."""
    cfg.validate()
    runs = []
    for seed in seeds:
        sub = cfg.with_seed(seed)
        sub.paths = type(cfg.paths)(**{**asdict(cfg.paths), "output_dir": str(Path(cfg.paths.output_dir) / f"seed-{seed}")})
        runs.append(Pipeline(sub).run())
    summary = {
        "config_hash": cfg.config_hash(),
        "seed": list(seeds),
        "metrics": _mean_metrics([r["metrics"] for r in runs]),
        "runs": {str(s): r["metrics"] for s, r in zip(seeds, runs)},
    }
    write_report(summary, cfg.paths.output_dir)
    return summary


def _mean_metrics(items: list):
    first = items[0]
    if isinstance(first, dict):
        return {k: _mean_metrics([it[k] for it in items]) for k in first if all(k in it for it in items)}
    return float(np.mean(items))
