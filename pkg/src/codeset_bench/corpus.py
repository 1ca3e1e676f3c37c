"""Corpus ingestion, label catalogs, dataset assembly, and splits.

Reads NOTEEVENTS/DIAGNOSES_ICD-shaped CSV exports (or synthetic
equivalents with the same schema), filters discharge summaries, builds
top-k label catalogs over codes or their hierarchical categories, joins
notes with diagnoses into multi-hot labeled datasets, and splits them
deterministically. A seeded synthetic generator stands in for the real
access-restricted data at desk scale.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, DatasetError, FormatError, SchemaError

ICD9_CODE_RE = re.compile(r"^(?:[0-9]{3,5}|V[0-9]{2,4}|E[0-9]{3,4})$")

DISCHARGE_CATEGORY = "discharge summary"


@dataclass(frozen=True)
class Note:
    row_id: int
    subject_id: int
    hadm_id: int
    category: str
    text: str


@dataclass(frozen=True)
class DiagnosisRecord:
    subject_id: int
    hadm_id: int
    seq_num: int
    icd9_code: str


@dataclass(frozen=True)
class LabelCatalog:
    """Ordered top-k label set (codes or categories) with admission counts."""

    mode: str  # "code" | "category"
    labels: tuple[tuple[str, int], ...]

    @property
    def k(self) -> int:
        return len(self.labels)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.labels]

    def label_index(self) -> dict[str, int]:
        return {name: i for i, (name, _) in enumerate(self.labels)}


@dataclass(frozen=True)
class Example:
    hadm_id: int
    text: str
    label_vector: np.ndarray  # uint8 multi-hot, length k


@dataclass
class LabeledDataset:
    examples: list[Example]
    catalog: LabelCatalog
    coverage: float  # kept admissions / total discharge admissions

    def __len__(self) -> int:
        return len(self.examples)

    def label_matrix(self) -> np.ndarray:
        return np.array([ex.label_vector for ex in self.examples], dtype=np.uint8)

    def texts(self) -> list[str]:
        return [ex.text for ex in self.examples]


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.5
    val_frac: float = 0.25
    test_frac: float = 0.25
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f <= 0 for f in fracs):
            raise ConfigError("split fractions must be positive")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fracs)}")


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

NOTE_COLUMNS = ("ROW_ID", "SUBJECT_ID", "HADM_ID", "CATEGORY", "TEXT")
DIAGNOSIS_COLUMNS = ("SUBJECT_ID", "HADM_ID", "SEQ_NUM", "ICD9_CODE")


class IngestStats:
    """Counters filled during streaming ingestion."""

    def __init__(self):
        self.rows = 0
        self.skipped_no_hadm = 0


def _header_positions(header: list[str], required: Sequence[str], path) -> dict[str, int]:
    pos = {name.strip().upper(): i for i, name in enumerate(header)}
    missing = [c for c in required if c not in pos]
    if missing:
        raise SchemaError(f"{path}: missing required columns {missing}")
    return pos


def iter_noteevents(path: str | Path, stats: IngestStats | None = None) -> Iterator[Note]:
    """Stream Notes from a NOTEEVENTS-style CSV (RFC 4180, header row).

    Rows with an empty HADM_ID are skipped and counted in stats. Extra
    columns are ignored. Malformed quoting raises FormatError with the
    offending row number.
    """
    stats = stats if stats is not None else IngestStats()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row")
        pos = _header_positions(header, NOTE_COLUMNS, path)
        while True:
            try:
                row = next(reader)
            except StopIteration:
                break
            except csv.Error as exc:
                raise FormatError(f"{path}: row {reader.line_num}: {exc}") from exc
            if not row:
                continue
            stats.rows += 1
            hadm_raw = row[pos["HADM_ID"]].strip()
            if not hadm_raw:
                stats.skipped_no_hadm += 1
                continue
            yield Note(
                row_id=int(row[pos["ROW_ID"]]),
                subject_id=int(row[pos["SUBJECT_ID"]]),
                hadm_id=int(hadm_raw),
                category=row[pos["CATEGORY"]],
                text=row[pos["TEXT"]],
            )


def load_noteevents(path: str | Path) -> tuple[list[Note], IngestStats]:
    stats = IngestStats()
    notes = list(iter_noteevents(path, stats))
    return notes, stats


def iter_diagnoses(path: str | Path, stats: IngestStats | None = None) -> Iterator[DiagnosisRecord]:
    """Stream DiagnosisRecords from a DIAGNOSES_ICD-style CSV.

    Rows with empty HADM_ID, SEQ_NUM, or ICD9_CODE are skipped and counted.
    """
    stats = stats if stats is not None else IngestStats()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row")
        pos = _header_positions(header, DIAGNOSIS_COLUMNS, path)
        for row in reader:
            if not row:
                continue
            stats.rows += 1
            hadm_raw = row[pos["HADM_ID"]].strip()
            seq_raw = row[pos["SEQ_NUM"]].strip()
            code = row[pos["ICD9_CODE"]].strip().strip('"')
            if not hadm_raw or not seq_raw or not code:
                stats.skipped_no_hadm += 1
                continue
            yield DiagnosisRecord(
                subject_id=int(row[pos["SUBJECT_ID"]]),
                hadm_id=int(hadm_raw),
                seq_num=int(seq_raw),
                icd9_code=code,
            )


def load_diagnoses(path: str | Path) -> tuple[list[DiagnosisRecord], IngestStats]:
    stats = IngestStats()
    records = list(iter_diagnoses(path, stats))
    return records, stats


# ---------------------------------------------------------------------------
# Filtering and label handling
# ---------------------------------------------------------------------------


def filter_discharge_summaries(notes: Iterable[Note]) -> list[Note]:
    """Keep discharge summaries only, one note per admission.

    Category matching is case-insensitive and trimmed. When an admission
    has several discharge summaries the one with the largest row_id (the
    latest) wins.
    """
    latest: dict[int, Note] = {}
    for note in notes:
        if note.category.strip().lower() != DISCHARGE_CATEGORY:
            continue
        cur = latest.get(note.hadm_id)
        if cur is None or note.row_id > cur.row_id:
            latest[note.hadm_id] = note
    return [latest[h] for h in sorted(latest)]


def code_to_category(icd9_code: str) -> str:
    """Group a code into its hierarchical category: numeric and V-codes
    keep the first 3 characters, E-codes the first 4."""
    if not ICD9_CODE_RE.match(icd9_code):
        raise ValueError(f"invalid ICD-9 code: {icd9_code!r}")
    return icd9_code[:4] if icd9_code.startswith("E") else icd9_code[:3]


def select_top_labels(
    diagnoses: Iterable[DiagnosisRecord], k: int, mode: str = "code"
) -> LabelCatalog:
    """Top-k labels by distinct-admission count.

    Each (hadm_id, label) pair counts once no matter how many duplicate
    rows carry it. Ties are broken lexicographically on the label string.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    if mode not in ("code", "category"):
        raise ConfigError(f"unknown label mode: {mode!r}")
    admissions: dict[str, set[int]] = {}
    for rec in diagnoses:
        label = rec.icd9_code if mode == "code" else code_to_category(rec.icd9_code)
        admissions.setdefault(label, set()).add(rec.hadm_id)
    if len(admissions) < k:
        raise DatasetError(f"only {len(admissions)} distinct labels, need k={k}")
    ranked = sorted(admissions.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    return LabelCatalog(
        mode=mode, labels=tuple((name, len(hadms)) for name, hadms in ranked[:k])
    )


def dotted_code(code: str) -> str | None:
    """Dotted display form of an undotted code: a dot goes after the 3rd
    digit, after V+2 digits, or after E+3 digits. Codes already at
    category length have no dotted form."""
    head = 4 if code.startswith("E") else 3
    if len(code) <= head:
        return None
    return code[:head] + "." + code[head:]


def _compile_label_pattern(catalog: LabelCatalog) -> re.Pattern | None:
    forms: set[str] = set()
    for name, _ in catalog.labels:
        forms.add(name)
        dotted = dotted_code(name)
        if dotted:
            forms.add(dotted)
    if not forms:
        return None
    # longest-first so the alternation consumes whole dotted forms before
    # their undotted prefixes can match
    ordered = sorted(forms, key=lambda f: (-len(f), f))
    body = "|".join(re.escape(f) for f in ordered)
    return re.compile(rf"(?<![0-9A-Za-z])(?:{body})(?![0-9A-Za-z])")


def sanitize_note(text: str, catalog: LabelCatalog) -> str:
    """Remove every standalone occurrence of a catalog label string, in
    both undotted ("4019") and dotted ("401.9") forms. Only the label
    token itself is removed; surrounding prose is untouched."""
    pattern = _compile_label_pattern(catalog)
    if pattern is None:
        return text
    return pattern.sub("", text)


class NoteSanitizer:
    """Reusable sanitizer holding the compiled pattern for one catalog."""

    def __init__(self, catalog: LabelCatalog):
        self._pattern = _compile_label_pattern(catalog)

    def __call__(self, text: str) -> str:
        if self._pattern is None:
            return text
        return self._pattern.sub("", text)


# ---------------------------------------------------------------------------
# Dataset assembly and splitting
# ---------------------------------------------------------------------------


def build_dataset(
    notes: Sequence[Note],
    diagnoses: Iterable[DiagnosisRecord],
    catalog: LabelCatalog,
) -> LabeledDataset:
    """Join notes with diagnoses on hadm_id into multi-hot examples.

    Notes are expected to be filtered (one per admission) and sanitized.
    Admissions whose codes all fall outside the catalog are dropped; the
    coverage ratio kept/total is recorded on the dataset.
    """
    index = catalog.label_index()
    hadm_labels: dict[int, set[int]] = {}
    for rec in diagnoses:
        label = rec.icd9_code if catalog.mode == "code" else code_to_category(rec.icd9_code)
        j = index.get(label)
        if j is not None:
            hadm_labels.setdefault(rec.hadm_id, set()).add(j)

    examples: list[Example] = []
    for note in notes:
        active = hadm_labels.get(note.hadm_id)
        if not active:
            continue
        vec = np.zeros(catalog.k, dtype=np.uint8)
        vec[sorted(active)] = 1
        examples.append(Example(hadm_id=note.hadm_id, text=note.text, label_vector=vec))

    if not examples:
        raise DatasetError("no admissions carry any catalog label")
    coverage = len(examples) / len(notes) if notes else 0.0
    return LabeledDataset(examples=examples, catalog=catalog, coverage=coverage)


def split_dataset(
    dataset: LabeledDataset, spec: SplitSpec
) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Deterministic seeded shuffle, then floor(n*frac) sizes for val and
    test with the remainder going to train. Same seed, same split."""
    n = len(dataset)
    if n < 4:
        raise DatasetError(f"dataset of {n} examples is too small to split")
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(n)
    n_val = int(math.floor(n * spec.val_frac + 1e-9))
    n_test = int(math.floor(n * spec.test_frac + 1e-9))
    n_train = n - n_val - n_test

    def take(idx: np.ndarray) -> LabeledDataset:
        return LabeledDataset(
            examples=[dataset.examples[i] for i in idx],
            catalog=dataset.catalog,
            coverage=dataset.coverage,
        )

    return (
        take(order[:n_train]),
        take(order[n_train : n_train + n_val]),
        take(order[n_train + n_val :]),
    )


# ---------------------------------------------------------------------------
# Synthetic corpus generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Configuration for the seeded synthetic corpus generator.

    Each label owns a small keyword lexicon. In the default mode a label
    is active for an admission iff one of its keywords appears in the
    note. In order-sensitive mode every note carries, for every label, a
    (negator, keyword) token pair, and only the order decides the label:
    negator immediately before the keyword means OFF, keyword before the
    negator means ON. The emitted CSVs mirror the real export schema so
    the downstream pipeline is identical either way.
    """

    n_labels: int = 10
    n_notes: int = 200
    keywords_per_label: int = 2
    filler_vocab_size: int = 80
    note_length_mean: int = 50
    note_length_jitter: int = 15
    label_rate: float = 0.35
    cooccur_boost: float = 0.0
    noise_code_rate: float = 0.15
    extra_note_rate: float = 0.05
    order_sensitive: bool = False
    negator: str = "no"
    seed: int = 0

    def __post_init__(self):
        if self.n_labels < 1 or self.n_notes < 1:
            raise ConfigError("n_labels and n_notes must be positive")
        if self.keywords_per_label < 1:
            raise ConfigError("each label needs a non-empty keyword lexicon")
        if not (0.0 < self.label_rate <= 1.0):
            raise ConfigError("label_rate must be in (0, 1]")
        if self.filler_vocab_size < 1:
            raise ConfigError("filler vocabulary must be non-empty")


def synthetic_code(j: int) -> str:
    """ICD-9-shaped 4-digit code for synthetic label j."""
    return f"{100 + j:03d}0"


def synthetic_keywords(spec: SyntheticSpec) -> list[list[str]]:
    """Per-label keyword lexicons; deterministic, letters only."""
    lex = []
    for j in range(spec.n_labels):
        lex.append(
            [f"sign{_alpha(j)}{chr(ord('a') + i)}" for i in range(spec.keywords_per_label)]
        )
    return lex


def _alpha(i: int) -> str:
    # small-int to letters, stable across runs
    letters = "abcdefghijklmnopqrstuvwxyz"
    out = letters[i % 26]
    while i >= 26:
        i //= 26
        out = letters[i % 26] + out
    return out


def _filler_words(n: int) -> list[str]:
    return [f"fill{_alpha(i)}" for i in range(n)]


def _draw_active_labels(rng: np.random.Generator, spec: SyntheticSpec) -> list[int]:
    active = [j for j in range(spec.n_labels) if rng.random() < spec.label_rate]
    if spec.cooccur_boost > 0:
        for j in list(active):
            nxt = (j + 1) % spec.n_labels
            if nxt not in active and rng.random() < spec.cooccur_boost:
                active.append(nxt)
    return sorted(set(active))


def generate_synthetic_corpus(
    spec: SyntheticSpec, out_dir: str | Path
) -> tuple[Path, Path]:
    """Write NOTEEVENTS.csv / DIAGNOSES_ICD.csv for a reproducible
    synthetic corpus and return their paths.

    Ground truth is recoverable from the note text by construction; the
    generator re-scans every note and raises if an emitted label
    disagrees with the stated rule.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    keywords = synthetic_keywords(spec)
    filler = _filler_words(spec.filler_vocab_size)
    if spec.order_sensitive and spec.negator in {w for lex in keywords for w in lex}:
        raise ConfigError("negator token collides with a label keyword")

    notes_path = out_dir / "NOTEEVENTS.csv"
    diag_path = out_dir / "DIAGNOSES_ICD.csv"
    row_id = 0
    diag_row_id = 0

    with open(notes_path, "w", newline="", encoding="utf-8") as nf, open(
        diag_path, "w", newline="", encoding="utf-8"
    ) as df:
        notes_writer = csv.writer(nf, lineterminator="\n")
        diag_writer = csv.writer(df, lineterminator="\n")
        notes_writer.writerow(
            ["ROW_ID", "SUBJECT_ID", "HADM_ID", "CHARTDATE", "CATEGORY", "DESCRIPTION", "TEXT"]
        )
        diag_writer.writerow(["ROW_ID", "SUBJECT_ID", "HADM_ID", "SEQ_NUM", "ICD9_CODE"])

        for i in range(spec.n_notes):
            hadm_id = 100000 + i
            subject_id = 1000 + i
            chartdate = f"2100-{1 + i % 12:02d}-{1 + i % 28:02d}"

            if spec.order_sensitive:
                active, text = _compose_order_sensitive(rng, spec, keywords, filler)
            else:
                active = _draw_active_labels(rng, spec)
                text = _compose_order_free(rng, spec, keywords, filler, active)
                _check_order_free(text, keywords, active)

            row_id += 1
            notes_writer.writerow(
                [row_id, subject_id, hadm_id, chartdate, "Discharge summary", "Report", text]
            )
            # occasional duplicate summary: same content plus an addendum,
            # higher row_id, exercising the keep-latest rule downstream
            if rng.random() < spec.extra_note_rate:
                row_id += 1
                notes_writer.writerow(
                    [
                        row_id,
                        subject_id,
                        hadm_id,
                        chartdate,
                        "Discharge summary",
                        "Addendum",
                        text + "\naddendum " + filler[int(rng.integers(len(filler)))],
                    ]
                )
            # occasional non-discharge note, filtered out downstream
            if rng.random() < spec.extra_note_rate:
                row_id += 1
                notes_writer.writerow(
                    [
                        row_id,
                        subject_id,
                        hadm_id,
                        chartdate,
                        "Radiology",
                        "Report",
                        " ".join(
                            filler[int(t)] for t in rng.integers(len(filler), size=10)
                        ),
                    ]
                )

            seq = 1
            for j in active:
                diag_row_id += 1
                diag_writer.writerow([diag_row_id, subject_id, hadm_id, seq, synthetic_code(j)])
                seq += 1
            if rng.random() < spec.noise_code_rate:
                diag_row_id += 1
                noise = f"{900 + int(rng.integers(90)):03d}0"
                diag_writer.writerow([diag_row_id, subject_id, hadm_id, seq, noise])

    return notes_path, diag_path


def _compose_order_free(
    rng: np.random.Generator,
    spec: SyntheticSpec,
    keywords: list[list[str]],
    filler: list[str],
    active: list[int],
) -> str:
    length = spec.note_length_mean
    if spec.note_length_jitter > 0:
        length += int(rng.integers(-spec.note_length_jitter, spec.note_length_jitter + 1))
    length = max(length, 2 * len(active) + 4)
    tokens = [filler[int(t)] for t in rng.integers(len(filler), size=length)]
    for j in active:
        kw = keywords[j][int(rng.integers(len(keywords[j])))]
        pos = int(rng.integers(len(tokens) + 1))
        tokens.insert(pos, kw)
    return _format_note(rng, tokens)


def _compose_order_sensitive(
    rng: np.random.Generator,
    spec: SyntheticSpec,
    keywords: list[list[str]],
    filler: list[str],
) -> tuple[list[int], str]:
    """Every label's (negator, keyword) pair appears once; order decides
    the label, so the bag of signal tokens is identical for every note."""
    segments: list[list[str]] = []
    active = []
    for j in rng.permutation(spec.n_labels):
        j = int(j)
        kw = keywords[j][0]
        if rng.random() < 0.5:
            segments.append([kw, spec.negator])  # keyword first: label ON
            active.append(j)
        else:
            segments.append([spec.negator, kw])  # negated: label OFF
    tokens: list[str] = []
    for seg in segments:
        tokens.extend(seg)
        n_fill = int(rng.integers(1, 3))
        tokens.extend(filler[int(t)] for t in rng.integers(len(filler), size=n_fill))
    active = sorted(active)
    text = _format_note(rng, tokens)
    scanned = scan_order_sensitive_labels(text, keywords, spec.negator)
    if scanned != active:
        raise RuntimeError(f"order-sensitive self-check failed: {scanned} != {active}")
    return active, text


def _format_note(rng: np.random.Generator, tokens: list[str]) -> str:
    """Join tokens into prose with occasional sentence breaks and an
    embedded newline so CSV quoting is exercised."""
    parts = []
    for i, tok in enumerate(tokens):
        parts.append(tok)
        if i and i % 12 == 0:
            parts[-1] += "."
        if i and i % 25 == 0:
            parts[-1] += "\n"
    return " ".join(parts)


def _check_order_free(text: str, keywords: list[list[str]], active: list[int]) -> None:
    toks = set(text.lower().replace("\n", " ").replace(".", " ").split())
    present = sorted(j for j, lex in enumerate(keywords) if any(w in toks for w in lex))
    if present != active:
        raise RuntimeError(f"keyword self-check failed: {present} != {active}")


def scan_order_sensitive_labels(
    text: str, keywords: list[list[str]], negator: str
) -> list[int]:
    """Recover order-sensitive ground truth from a note: label j is ON
    iff its keyword occurs and the token immediately before it is not the
    negator."""
    toks = text.lower().replace("\n", " ").replace(".", " ").split()
    active = []
    for j, lex in enumerate(keywords):
        for pos, tok in enumerate(toks):
            if tok in lex:
                if pos == 0 or toks[pos - 1] != negator:
                    active.append(j)
                break
    return sorted(active)


# ---------------------------------------------------------------------------
# Dataset artifacts
# ---------------------------------------------------------------------------

_ESCAPES = {"\\": "\\\\", "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {"\\\\": "\\", "\\n": "\n", "\\r": "\r", "\\t": "\t"}


def _escape_text(text: str) -> str:
    out = text.replace("\\", "\\\\")
    for raw, esc in _ESCAPES.items():
        if raw == "\\":
            continue
        out = out.replace(raw, esc)
    return out


def _unescape_text(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        pair = text[i : i + 2]
        if pair in _UNESCAPES:
            out.append(_UNESCAPES[pair])
            i += 2
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def save_split(dataset: LabeledDataset, path: str | Path) -> None:
    """Tab-separated rows: hadm_id, multi-hot bits as a 0/1 string, text
    with newlines (and tabs/backslashes) escaped."""
    with open(path, "w", encoding="utf-8") as fh:
        for ex in dataset.examples:
            bits = "".join(str(int(b)) for b in ex.label_vector)
            fh.write(f"{ex.hadm_id}\t{bits}\t{_escape_text(ex.text)}\n")


def load_split(path: str | Path, catalog: LabelCatalog, coverage: float = 0.0) -> LabeledDataset:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 2)
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
            hadm_id, bits, text = parts
            if len(bits) != catalog.k:
                raise FormatError(f"{path}:{lineno}: bit string length != k")
            vec = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
            examples.append(
                Example(hadm_id=int(hadm_id), text=_unescape_text(text), label_vector=vec.astype(np.uint8))
            )
    return LabeledDataset(examples=examples, catalog=catalog, coverage=coverage)


def save_manifest(path: str | Path, mode: str, k: int, seed: int, coverage: float) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"mode={mode}\nk={k}\nseed={seed}\ncoverage={coverage!r}\n")


def load_manifest(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def save_catalog(catalog: LabelCatalog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#mode={catalog.mode}\n")
        for name, count in catalog.labels:
            fh.write(f"{name}\t{count}\n")


def load_catalog(path: str | Path) -> LabelCatalog:
    mode = "code"
    labels = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#mode="):
            mode = line.split("=", 1)[1].strip()
            continue
        if not line.strip():
            continue
        name, count = line.split("\t")
        labels.append((name, int(count)))
    return LabelCatalog(mode=mode, labels=tuple(labels))
