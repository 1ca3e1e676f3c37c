"""Config-driven experiment pipeline: prepare -> featurize -> train ->
evaluate -> report, with content-addressed caching of each stage.

Configs are flat ``key = value`` text with dotted section prefixes
(``dataset.k = 10``). Every key has a default; unknown keys are
rejected. Stage outputs are cached under SHA-256 hashes of the
canonicalized config subset that influences them, so re-running a model
sweep over shared features reuses the feature stage.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import corpus, features, metrics, models, textproc
from .errors import ConfigError, PipelineError

# ---------------------------------------------------------------------------
# Config schema
# ---------------------------------------------------------------------------

DEFAULTS: dict[str, str] = {
    "dataset.source": "synthetic",  # synthetic | csv
    "dataset.notes": "",
    "dataset.diagnoses": "",
    "dataset.mode": "code",  # code | category
    "dataset.k": "10",
    "dataset.train_frac": "0.5",
    "dataset.val_frac": "0.25",
    "dataset.test_frac": "0.25",
    "dataset.split_seed": "0",
    "dataset.sanitize": "true",
    "dataset.synthetic.n_labels": "10",
    "dataset.synthetic.n_notes": "400",
    "dataset.synthetic.keywords_per_label": "2",
    "dataset.synthetic.filler_vocab": "80",
    "dataset.synthetic.note_length": "50",
    "dataset.synthetic.jitter": "15",
    "dataset.synthetic.label_rate": "0.35",
    "dataset.synthetic.noise_code_rate": "0.15",
    "dataset.synthetic.extra_note_rate": "0.05",
    "dataset.synthetic.order_sensitive": "false",
    "dataset.synthetic.seed": "0",
    "feature.track": "tfidf40k",  # tfidf40k | tfidf20k | w2v-avg | wordseq
    "feature.remove_stopwords": "false",
    "feature.w2v_dim": "100",
    "feature.window": "5",
    "feature.epochs": "5",
    "feature.negatives": "5",
    "feature.min_count": "1",
    "feature.seq_len": "1500",
    "feature.embedding_source": "self",  # self | pretrained | random
    "feature.pretrained_path": "",
    "feature.embedding_trainable": "true",
    "feature.seed": "0",
    "model.preset": "",
    "model.family": "",
    "model.hidden": "",
    "model.conv_blocks": "",
    "model.fc": "0",
    "model.dropout": "0.0",
    "model.bidirectional": "false",
    "model.logreg_iters": "100",
    "model.logreg_lr": "0.5",
    "model.rf_trees": "64",
    "model.rf_depth": "10",
    "train.max_epochs": "200",
    "train.patience": "5",
    "train.batch_size": "32",
    "train.optimizer": "rmsprop",
    "train.learning_rate": "",
    "train.threshold": "0.5",
    "train.seed": "0",
}

TRACK_KINDS = {
    "tfidf40k": "sparse",
    "tfidf20k": "sparse",
    "w2v-avg": "dense",
    "wordseq": "sequence",
}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Flat key = value lines; blank lines and #-comment lines ignored."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path: str | Path) -> "ExperimentConfig":
    raw = parse_config_text(Path(path).read_text(encoding="utf-8"), str(path))
    return ExperimentConfig(raw)


def _parse_bool(value: str, key: str) -> bool:
    low = value.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


class ExperimentConfig:
    """Validated, default-filled view over a flat config dict."""

    def __init__(self, raw: dict[str, str]):
        unknown = sorted(set(raw) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        self.values = dict(DEFAULTS)
        self.values.update(raw)
        self._validate()

    # typed accessors ------------------------------------------------------
    def get(self, key: str) -> str:
        return self.values[key]

    def get_int(self, key: str) -> int:
        try:
            return int(self.values[key])
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {self.values[key]!r}") from None

    def get_float(self, key: str) -> float:
        try:
            return float(self.values[key])
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {self.values[key]!r}") from None

    def get_bool(self, key: str) -> bool:
        return _parse_bool(self.values[key], key)

    # validation -----------------------------------------------------------
    def _validate(self) -> None:
        if self.get("dataset.source") not in ("synthetic", "csv"):
            raise ConfigError("dataset.source must be synthetic or csv")
        if self.get("dataset.source") == "csv" and not (
            self.get("dataset.notes") and self.get("dataset.diagnoses")
        ):
            raise ConfigError("csv source needs dataset.notes and dataset.diagnoses")
        if self.get("dataset.mode") not in ("code", "category"):
            raise ConfigError("dataset.mode must be code or category")
        k = self.get_int("dataset.k")
        if k < 1:
            raise ConfigError("dataset.k must be >= 1")
        if k not in (10, 50):
            warnings.warn(f"dataset.k = {k} departs from the reference settings (10/50)")
        track = self.get("feature.track")
        if track not in TRACK_KINDS:
            raise ConfigError(f"unknown feature.track {track!r}")
        if self.get("feature.embedding_source") not in ("self", "pretrained", "random"):
            raise ConfigError("feature.embedding_source must be self, pretrained, or random")
        spec = self.model_spec()
        if TRACK_KINDS[track] not in models.FAMILY_INPUT_KINDS[spec.family]:
            raise ConfigError(
                f"feature track {track!r} ({TRACK_KINDS[track]}) is incompatible "
                f"with model family {spec.family!r}"
            )
        self.train_config()  # raises on bad training block

    # resolved objects -----------------------------------------------------
    def model_spec(self) -> models.ModelSpec:
        name = self.get("model.preset")
        if name:
            spec = models.preset(name)
            if self.get_bool("model.bidirectional") and not spec.bidirectional:
                spec = models.ModelSpec(
                    family=spec.family,
                    input_kind=spec.input_kind,
                    hidden=spec.hidden,
                    conv_blocks=spec.conv_blocks,
                    fc=spec.fc,
                    dropout=spec.dropout,
                    bidirectional=True,
                    name=spec.name + "-bidi",
                )
            return spec
        family = self.get("model.family")
        if not family:
            raise ConfigError("set model.preset or model.family")
        hidden = tuple(
            int(v) for v in self.get("model.hidden").split(",") if v.strip()
        )
        blocks = []
        for chunk in self.get("model.conv_blocks").split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            parts = chunk.split(":")
            if len(parts) != 3:
                raise ConfigError("model.conv_blocks entries are filters:width:pool")
            blocks.append(tuple(int(p) for p in parts))
        fc = self.get_int("model.fc") or None
        input_kind = TRACK_KINDS[self.get("feature.track")]
        return models.ModelSpec(
            family=family,
            input_kind=input_kind,
            hidden=hidden,
            conv_blocks=tuple(blocks),
            fc=fc,
            dropout=self.get_float("model.dropout"),
            bidirectional=self.get_bool("model.bidirectional"),
            name=family,
        )

    def train_config(self) -> models.TrainConfig:
        lr = self.get("train.learning_rate")
        return models.TrainConfig(
            max_epochs=self.get_int("train.max_epochs"),
            patience=self.get_int("train.patience"),
            batch_size=self.get_int("train.batch_size"),
            optimizer=self.get("train.optimizer"),
            learning_rate=float(lr) if lr else None,
            threshold=self.get_float("train.threshold"),
            seed=self.get_int("train.seed"),
        )

    def synthetic_spec(self) -> corpus.SyntheticSpec:
        return corpus.SyntheticSpec(
            n_labels=self.get_int("dataset.synthetic.n_labels"),
            n_notes=self.get_int("dataset.synthetic.n_notes"),
            keywords_per_label=self.get_int("dataset.synthetic.keywords_per_label"),
            filler_vocab_size=self.get_int("dataset.synthetic.filler_vocab"),
            note_length_mean=self.get_int("dataset.synthetic.note_length"),
            note_length_jitter=self.get_int("dataset.synthetic.jitter"),
            label_rate=self.get_float("dataset.synthetic.label_rate"),
            noise_code_rate=self.get_float("dataset.synthetic.noise_code_rate"),
            extra_note_rate=self.get_float("dataset.synthetic.extra_note_rate"),
            order_sensitive=self.get_bool("dataset.synthetic.order_sensitive"),
            seed=self.get_int("dataset.synthetic.seed"),
        )

    def split_spec(self) -> corpus.SplitSpec:
        return corpus.SplitSpec(
            train_frac=self.get_float("dataset.train_frac"),
            val_frac=self.get_float("dataset.val_frac"),
            test_frac=self.get_float("dataset.test_frac"),
            seed=self.get_int("dataset.split_seed"),
        )

    # canonicalization and hashing ------------------------------------------
    def canonical_text(self, prefixes: tuple[str, ...] = ()) -> str:
        lines = []
        for key in sorted(self.values):
            if prefixes and not key.startswith(prefixes):
                continue
            lines.append(f"{key} = {self.values[key]}")
        return "\n".join(lines) + "\n"

    def stage_hash(self, stage: str) -> str:
        prefixes = {
            "corpus": ("dataset.source", "dataset.notes", "dataset.diagnoses", "dataset.synthetic."),
            "dataset": ("dataset.",),
            "features": ("dataset.", "feature."),
            "run": ("dataset.", "feature.", "model.", "train."),
        }[stage]
        text = self.canonical_text(prefixes)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Staged artifacts
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    config_hash: str
    dataset_hash: str
    feature_hash: str
    split_sizes: dict[str, int]
    coverage: float
    history: list[tuple[float, float]]
    stopped_epoch: int
    best_epoch: int
    metrics_train: dict
    metrics_test: dict
    cache_hits: list[str] = field(default_factory=list)
    artifacts: dict[str, str] = field(default_factory=dict)
    timestamp: str = ""

    def to_json(self) -> str:
        payload = {
            "config_hash": self.config_hash,
            "dataset_hash": self.dataset_hash,
            "feature_hash": self.feature_hash,
            "split_sizes": self.split_sizes,
            "coverage": self.coverage,
            "history": self.history,
            "stopped_epoch": self.stopped_epoch,
            "best_epoch": self.best_epoch,
            "metrics_train": self.metrics_train,
            "metrics_test": self.metrics_test,
            "cache_hits": self.cache_hits,
            "artifacts": self.artifacts,
            "timestamp": self.timestamp,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


class Workspace:
    """Output directory layout: cache/<stage>/<hash-prefix>/ and runs/."""

    def __init__(self, out_dir: str | Path, log=print):
        self.root = Path(out_dir)
        self.log = log
        self.cache_hits: list[str] = []

    def stage_dir(self, stage: str, full_hash: str) -> Path:
        return self.root / "cache" / stage / full_hash[:12]

    def stage_cached(self, stage: str, full_hash: str) -> bool:
        d = self.stage_dir(stage, full_hash)
        if not (d / ".complete").exists():
            return False
        # the marker stores the full hash; a prefix collision must never
        # serve a foreign artifact
        stored = (d / ".complete").read_text(encoding="utf-8").strip()
        if stored != full_hash:
            raise PipelineError(
                f"cache collision in {d}: stored hash {stored[:12]} != request"
            )
        self.cache_hits.append(f"{stage}:{full_hash[:12]}")
        self.log(f"cache hit: {stage} {full_hash[:12]}")
        return True

    def finish_stage(self, stage: str, full_hash: str) -> None:
        d = self.stage_dir(stage, full_hash)
        (d / ".complete").write_text(full_hash + "\n", encoding="utf-8")

    def fresh_stage_dir(self, stage: str, full_hash: str) -> Path:
        d = self.stage_dir(stage, full_hash)
        if d.exists():
            shutil.rmtree(d)
        d.mkdir(parents=True)
        return d


# ---------------------------------------------------------------------------
# Pipeline stages
# ---------------------------------------------------------------------------


def stage_corpus(cfg: ExperimentConfig, ws: Workspace) -> tuple[Path, Path]:
    """Materialize NOTEEVENTS/DIAGNOSES CSVs (generating when synthetic)."""
    if cfg.get("dataset.source") == "csv":
        notes = Path(cfg.get("dataset.notes"))
        diags = Path(cfg.get("dataset.diagnoses"))
        for p in (notes, diags):
            if not p.exists():
                raise PipelineError(f"stage corpus: missing input {p}")
        return notes, diags
    h = cfg.stage_hash("corpus")
    d = ws.stage_dir("corpus", h)
    if ws.stage_cached("corpus", h):
        return d / "NOTEEVENTS.csv", d / "DIAGNOSES_ICD.csv"
    d = ws.fresh_stage_dir("corpus", h)
    notes, diags = corpus.generate_synthetic_corpus(cfg.synthetic_spec(), d)
    ws.finish_stage("corpus", h)
    return notes, diags


def stage_dataset(
    cfg: ExperimentConfig, ws: Workspace, notes_path: Path, diags_path: Path
) -> tuple[corpus.LabeledDataset, corpus.LabeledDataset, corpus.LabeledDataset, corpus.LabelCatalog]:
    h = cfg.stage_hash("dataset")
    d = ws.stage_dir("dataset", h)
    if ws.stage_cached("dataset", h):
        catalog = corpus.load_catalog(d / "catalog.tsv")
        manifest = corpus.load_manifest(d / "manifest.txt")
        coverage = float(manifest.get("coverage", "0"))
        return (
            corpus.load_split(d / "train.tsv", catalog, coverage),
            corpus.load_split(d / "val.tsv", catalog, coverage),
            corpus.load_split(d / "test.tsv", catalog, coverage),
            catalog,
        )
    notes, _ = corpus.load_noteevents(notes_path)
    diagnoses, _ = corpus.load_diagnoses(diags_path)
    summaries = corpus.filter_discharge_summaries(notes)
    catalog = corpus.select_top_labels(
        diagnoses, k=cfg.get_int("dataset.k"), mode=cfg.get("dataset.mode")
    )
    if cfg.get_bool("dataset.sanitize"):
        sanitizer = corpus.NoteSanitizer(catalog)
        summaries = [
            corpus.Note(n.row_id, n.subject_id, n.hadm_id, n.category, sanitizer(n.text))
            for n in summaries
        ]
    dataset = corpus.build_dataset(summaries, diagnoses, catalog)
    train, val, test = corpus.split_dataset(dataset, cfg.split_spec())

    d = ws.fresh_stage_dir("dataset", h)
    corpus.save_catalog(catalog, d / "catalog.tsv")
    corpus.save_manifest(
        d / "manifest.txt",
        mode=catalog.mode,
        k=catalog.k,
        seed=cfg.get_int("dataset.split_seed"),
        coverage=dataset.coverage,
    )
    corpus.save_split(train, d / "train.tsv")
    corpus.save_split(val, d / "val.tsv")
    corpus.save_split(test, d / "test.tsv")
    ws.finish_stage("dataset", h)
    return train, val, test, catalog


@dataclass
class FeatureSet:
    """Featurized splits plus whatever the model stage needs alongside."""

    kind: str  # sparse | dense | sequence
    train: object
    val: object
    test: object
    vocab: textproc.Vocabulary | None = None
    embedding: features.EmbeddingMatrix | None = None


def _tokenized_splits(cfg: ExperimentConfig, splits) -> list[list[list[str]]]:
    stop = textproc.load_default_stopwords() if cfg.get_bool("feature.remove_stopwords") else None
    out = []
    for split in splits:
        docs = []
        for text in split.texts():
            toks = textproc.tokenize(text)
            if stop is not None:
                toks = textproc.remove_stopwords(toks, stop)
            docs.append(toks)
        out.append(docs)
    return out


def _self_trained_embedding(cfg: ExperimentConfig, train_docs) -> features.Word2VecResult:
    return features.train_word2vec_cbow(
        train_docs,
        dim=cfg.get_int("feature.w2v_dim"),
        window=cfg.get_int("feature.window"),
        negatives=cfg.get_int("feature.negatives"),
        epochs=cfg.get_int("feature.epochs"),
        min_count=cfg.get_int("feature.min_count"),
        seed=cfg.get_int("feature.seed"),
    )


def _resolve_embedding(
    cfg: ExperimentConfig, train_docs
) -> tuple[textproc.Vocabulary, features.EmbeddingMatrix | None]:
    source = cfg.get("feature.embedding_source")
    if source == "self":
        result = _self_trained_embedding(cfg, train_docs)
        return result.vocabulary, features.EmbeddingMatrix(result.vocabulary, result.vectors)
    vocab = textproc.build_vocabulary(train_docs, min_doc_freq=cfg.get_int("feature.min_count"))
    if source == "pretrained":
        path = cfg.get("feature.pretrained_path")
        if not path:
            raise ConfigError("pretrained embedding source needs feature.pretrained_path")
        tokens, vectors = features.load_word2vec_text(path)
        return vocab, features.align_embeddings(vocab, tokens, vectors)
    return vocab, None  # random: model stage draws its own matrix


def stage_features(cfg: ExperimentConfig, ws: Workspace, splits) -> FeatureSet:
    track = cfg.get("feature.track")
    h = cfg.stage_hash("features")
    d = ws.stage_dir("features", h)
    if ws.stage_cached("features", h):
        return _load_features(track, d)
    train_docs, val_docs, test_docs = _tokenized_splits(cfg, splits)
    d = ws.fresh_stage_dir("features", h)

    if track in ("tfidf40k", "tfidf20k"):
        table = features.build_tfidf_table(train_docs, features.select_tfidf_config(track))
        mats = [features.tfidf_vectorize(docs, table) for docs in (train_docs, val_docs, test_docs)]
        textproc.save_vocabulary(table.vocabulary, d / "vocab.tsv")
        (d / "n_docs.txt").write_text(str(table.vocabulary.n_docs) + "\n", encoding="utf-8")
        for name, m in zip(("train", "val", "test"), mats):
            features.save_sparse(m, d / f"{name}.sparse")
        ws.finish_stage("features", h)
        return FeatureSet("sparse", *mats, vocab=table.vocabulary)

    if track == "w2v-avg":
        vocab, emb = _resolve_embedding(cfg, train_docs)
        if emb is None:
            raise ConfigError("w2v-avg track needs a real embedding (self or pretrained)")
        mats = []
        for docs in (train_docs, val_docs, test_docs):
            rows = []
            for toks in docs:
                idx = [vocab.token_to_index[t] for t in toks if t in vocab.token_to_index]
                rows.append(features.average_embedding(idx, emb))
            mats.append(np.array(rows) if rows else np.zeros((0, emb.dim)))
        textproc.save_vocabulary(vocab, d / "vocab.tsv")
        features.save_word2vec_text(emb, d / "embedding.txt")
        for name, m in zip(("train", "val", "test"), mats):
            features.save_dense(m, d / f"{name}.dense")
        ws.finish_stage("features", h)
        return FeatureSet("dense", *mats, vocab=vocab, embedding=emb)

    if track == "wordseq":
        vocab, emb = _resolve_embedding(cfg, train_docs)
        seq_len = cfg.get_int("feature.seq_len")
        seqs = [
            features.encode_corpus_sequences(docs, vocab, seq_len)
            for docs in (train_docs, val_docs, test_docs)
        ]
        textproc.save_vocabulary(vocab, d / "vocab.tsv")
        if emb is not None:
            features.save_word2vec_text(emb, d / "embedding.txt")
        for name, s in zip(("train", "val", "test"), seqs):
            features.save_sequences(s, d / f"{name}.seq")
        ws.finish_stage("features", h)
        return FeatureSet("sequence", *seqs, vocab=vocab, embedding=emb)

    raise ConfigError(f"unknown feature track {track!r}")


def _load_features(track: str, d: Path) -> FeatureSet:
    vocab = textproc.load_vocabulary(d / "vocab.tsv")
    if track in ("tfidf40k", "tfidf20k"):
        vocab.n_docs = int((d / "n_docs.txt").read_text(encoding="utf-8").strip())
        mats = [features.load_sparse(d / f"{n}.sparse") for n in ("train", "val", "test")]
        return FeatureSet("sparse", *mats, vocab=vocab)
    emb = None
    if (d / "embedding.txt").exists():
        tokens, vectors = features.load_word2vec_text(d / "embedding.txt")
        emb = features.align_embeddings(vocab, tokens, vectors)
    if track == "w2v-avg":
        mats = [features.load_dense(d / f"{n}.dense") for n in ("train", "val", "test")]
        return FeatureSet("dense", *mats, vocab=vocab, embedding=emb)
    seqs = [features.load_sequences(d / f"{n}.seq") for n in ("train", "val", "test")]
    return FeatureSet("sequence", *seqs, vocab=vocab, embedding=emb)


def stage_train(
    cfg: ExperimentConfig, feats: FeatureSet, y_train, y_val
) -> models.TrainedModel:
    spec = cfg.model_spec()
    tc = cfg.train_config()
    return models.fit(
        spec,
        (feats.train, y_train),
        (feats.val, y_val),
        tc,
        embedding=feats.embedding,
        vocab_size=len(feats.vocab) if feats.vocab is not None else None,
        embed_dim=cfg.get_int("feature.w2v_dim"),
        logreg_iters=cfg.get_int("model.logreg_iters"),
        logreg_lr=cfg.get_float("model.logreg_lr"),
        rf_trees=cfg.get_int("model.rf_trees"),
        rf_depth=cfg.get_int("model.rf_depth"),
        train_embedding=cfg.get_bool("feature.embedding_trainable"),
    )


def report_from_probs(
    probs: np.ndarray, truth: np.ndarray, threshold: float, label_names: list[str]
) -> tuple[metrics.MetricsReport, list[metrics.PRCurve]]:
    predicted = (np.asarray(probs) >= threshold).astype(np.uint8)
    run = metrics.PredictionRun(
        probs=probs, predicted=predicted, truth=np.asarray(truth), label_names=label_names
    )
    return metrics.report(run)


def evaluate_model(
    model: models.TrainedModel, feats_split, truth: np.ndarray, label_names: list[str]
) -> tuple[metrics.MetricsReport, list[metrics.PRCurve]]:
    """Metrics for one split; consumes only that split's features and
    truth."""
    probs = models.predict_proba(model, feats_split)
    return report_from_probs(probs, truth, model.threshold, label_names)


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------


def run_pipeline(
    cfg: ExperimentConfig, out_dir: str | Path, run_name: str | None = None, log=print
) -> RunRecord:
    ws = Workspace(out_dir, log=log)
    t0 = time.time()

    def staged(stage, fn, *args):
        try:
            return fn(cfg, ws, *args)
        except PipelineError as exc:
            raise PipelineError(f"stage {stage}: {exc}") from exc

    notes_path, diags_path = staged("corpus", stage_corpus)
    train, val, test, catalog = staged("dataset", stage_dataset, notes_path, diags_path)
    feats = staged("features", stage_features, (train, val, test))

    y_train = train.label_matrix()
    y_val = val.label_matrix()
    y_test = test.label_matrix()
    try:
        model = stage_train(cfg, feats, y_train, y_val)
    except PipelineError as exc:
        raise PipelineError(f"stage train: {exc}") from exc

    names = catalog.names
    probs_train = models.predict_proba(model, feats.train)
    probs_test = models.predict_proba(model, feats.test)
    rep_train, curves_train = report_from_probs(probs_train, y_train, model.threshold, names)
    rep_test, curves_test = report_from_probs(probs_test, y_test, model.threshold, names)

    run_hash = cfg.stage_hash("run")
    run_dir = ws.root / "runs" / (run_name or run_hash[:12])
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(cfg.canonical_text(), encoding="utf-8")
    corpus.save_catalog(catalog, run_dir / "catalog.tsv")
    for tag, probs, truth in (
        ("train", probs_train, y_train),
        ("test", probs_test, y_test),
    ):
        features.save_dense(probs, run_dir / f"probs_{tag}.dense")
        features.save_dense(truth.astype(np.float64), run_dir / f"truth_{tag}.dense")
    (run_dir / "metrics_train.json").write_text(rep_train.to_json(), encoding="utf-8")
    (run_dir / "metrics_test.json").write_text(rep_test.to_json(), encoding="utf-8")
    metrics.write_pr_curves(curves_train, run_dir / "pr_train.csv")
    metrics.write_pr_curves(curves_test, run_dir / "pr_test.csv")
    _save_model(model, run_dir / "checkpoint", cfg)
    _write_summary(run_dir / "summary.txt", cfg, rep_train, rep_test)

    record = RunRecord(
        config_hash=run_hash,
        dataset_hash=cfg.stage_hash("dataset"),
        feature_hash=cfg.stage_hash("features"),
        split_sizes={"train": len(train), "val": len(val), "test": len(test)},
        coverage=train.coverage,
        history=model.history,
        stopped_epoch=model.stopped_epoch,
        best_epoch=model.best_epoch,
        metrics_train=rep_train.to_dict(),
        metrics_test=rep_test.to_dict(),
        cache_hits=list(ws.cache_hits),
        artifacts={
            "run_dir": str(run_dir),
            "metrics_train": str(run_dir / "metrics_train.json"),
            "metrics_test": str(run_dir / "metrics_test.json"),
        },
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(t0)),
    )
    (run_dir / "record.json").write_text(record.to_json(), encoding="utf-8")
    log(f"run complete: {run_dir} (test f1 {rep_test.f1:.4f})")
    return record


def _save_model(model: models.TrainedModel, ckpt_dir: Path, cfg: ExperimentConfig) -> None:
    from . import neuralcore as nc

    manifest = {
        "preset": cfg.get("model.preset") or cfg.get("model.family"),
        "family": model.spec.family,
        "seed": cfg.get("train.seed"),
        "stopped_epoch": model.stopped_epoch,
        "best_epoch": model.best_epoch,
    }
    if model.network is not None:
        nc.save_checkpoint(ckpt_dir, nc.model_tensors(model.network), manifest)
        return
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    with open(ckpt_dir / "manifest.txt", "w", encoding="utf-8") as fh:
        for key in sorted(manifest):
            fh.write(f"{key} = {manifest[key]}\n")
    if model.spec.family == "logreg":
        for j, sub in enumerate(model.submodels):
            sub_dir = ckpt_dir / f"label_{j:03d}"
            nc.save_checkpoint(
                sub_dir,
                {"w": sub.w, "b": np.array([sub.b])},
                {"label": j, "degenerate": sub.degenerate},
            )
    else:
        for j, sub in enumerate(model.submodels):
            sub_dir = ckpt_dir / f"label_{j:03d}"
            sub_dir.mkdir(parents=True, exist_ok=True)
            models_save_forest(sub, sub_dir / "trees.txt")


def models_save_forest(sub, path: Path) -> None:
    """Preorder text dump of a forest: 'n feature threshold' inner nodes,
    'l mean' leaves."""
    lines = [f"trees {len(sub.trees)}"]

    def walk(node):
        if node.leaf_mean >= 0:
            lines.append(f"l {float(node.leaf_mean)!r}")
        else:
            lines.append(f"n {node.feature} {float(node.threshold)!r}")
            walk(node.left)
            walk(node.right)

    for i, tree in enumerate(sub.trees):
        lines.append(f"tree {i}")
        walk(tree)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def models_load_forest(path: Path):
    """Inverse of models_save_forest; returns the tree list."""
    from .models import _TreeNode

    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("trees "):
        raise PipelineError(f"{path}: bad forest header")
    pos = 1
    trees = []

    def parse() -> _TreeNode:
        nonlocal pos
        parts = lines[pos].split()
        pos += 1
        if parts[0] == "l":
            return _TreeNode(leaf_mean=float(parts[1]))
        node = _TreeNode(feature=int(parts[1]), threshold=float(parts[2]))
        node.left = parse()
        node.right = parse()
        return node

    while pos < len(lines):
        if lines[pos].startswith("tree "):
            pos += 1
            trees.append(parse())
        else:
            pos += 1
    return trees


def _write_summary(
    path: Path, cfg: ExperimentConfig, rep_train: metrics.MetricsReport, rep_test
) -> None:
    name = cfg.get("model.preset") or cfg.get("model.family")
    cols = ("precision", "recall", "accuracy", "f1", "hamming_loss", "macro_auc", "precision_at_5")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"model: {name}   track: {cfg.get('feature.track')}\n\n")
        fh.write(f"{'split':<8}" + "".join(f"{c:>16}" for c in cols) + "\n")
        for split, rep in (("train", rep_train), ("test", rep_test)):
            fh.write(
                f"{split:<8}"
                + "".join(f"{getattr(rep, c):>16.4f}" for c in cols)
                + "\n"
            )


def rewrite_reports(run_dir: str | Path, with_curves: bool = True) -> dict[str, metrics.MetricsReport]:
    """Recompute metrics JSONs (and optionally PR CSVs + summary) from a
    run directory's stored probability and truth matrices."""
    run_dir = Path(run_dir)
    if not (run_dir / "config.txt").exists():
        raise PipelineError(f"{run_dir}: not a run directory (no config.txt)")
    cfg = ExperimentConfig(
        parse_config_text((run_dir / "config.txt").read_text(encoding="utf-8"))
    )
    catalog = corpus.load_catalog(run_dir / "catalog.tsv")
    threshold = cfg.get_float("train.threshold")
    reports = {}
    for tag in ("train", "test"):
        probs = features.load_dense(run_dir / f"probs_{tag}.dense")
        truth = features.load_dense(run_dir / f"truth_{tag}.dense").astype(np.uint8)
        rep, curves = report_from_probs(probs, truth, threshold, catalog.names)
        (run_dir / f"metrics_{tag}.json").write_text(rep.to_json(), encoding="utf-8")
        if with_curves:
            metrics.write_pr_curves(curves, run_dir / f"pr_{tag}.csv")
        reports[tag] = rep
    if with_curves:
        _write_summary(run_dir / "summary.txt", cfg, reports["train"], reports["test"])
    return reports


# ---------------------------------------------------------------------------
# Run comparison
# ---------------------------------------------------------------------------

COMPARE_COLUMNS = (
    "precision", "recall", "accuracy", "f1", "hamming_loss", "macro_auc", "precision_at_5",
)


def compare_runs(run_dirs: list[str | Path]) -> tuple[str, str]:
    """(csv_text, aligned_text) over runs sharing one dataset hash,
    sorted by test F1 descending."""
    rows = []
    dataset_hashes = {}
    for run_dir in run_dirs:
        record_path = Path(run_dir) / "record.json"
        if not record_path.exists():
            raise PipelineError(f"{run_dir}: no record.json")
        rec = json.loads(record_path.read_text(encoding="utf-8"))
        dataset_hashes[str(run_dir)] = rec["dataset_hash"]
        cfg_text = (Path(run_dir) / "config.txt").read_text(encoding="utf-8")
        cfg = parse_config_text(cfg_text)
        name = cfg.get("model.preset") or cfg.get("model.family") or Path(run_dir).name
        rows.append((name, rec["metrics_test"]))
    distinct = sorted(set(dataset_hashes.values()))
    if len(distinct) > 1:
        raise PipelineError(
            "runs span different datasets: " + ", ".join(h[:12] for h in distinct)
        )
    rows.sort(key=lambda r: -r[1]["f1"])

    csv_lines = ["model," + ",".join(COMPARE_COLUMNS)]
    for name, m in rows:
        csv_lines.append(name + "," + ",".join(repr(m[c]) for c in COMPARE_COLUMNS))
    csv_text = "\n".join(csv_lines) + "\n"

    width = max([len("model")] + [len(name) for name, _ in rows]) + 2
    text_lines = [f"{'model':<{width}}" + "".join(f"{c:>16}" for c in COMPARE_COLUMNS)]
    for name, m in rows:
        text_lines.append(
            f"{name:<{width}}" + "".join(f"{m[c]:>16.4f}" for c in COMPARE_COLUMNS)
        )
    return csv_text, "\n".join(text_lines) + "\n"
