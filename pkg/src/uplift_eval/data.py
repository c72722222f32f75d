"""Dataset representations for logged bandit feedback and full-feedback twins.

A logged record is one observation (unit id, features, binary treatment,
outcome, propensity of the *logged* action). The full-feedback twin keeps both
potential outcomes; it only exists for synthetic data and is what ground-truth
metrics consume. Ranking a logged dataset by predicted uplift produces a
``ScoredDataset``, the input of every curve estimator.

All indices in the curve formulas are 1-based (position ``k`` means the top-k
prefix); in-memory arrays are ordinary 0-based numpy arrays and serialized
forms state which convention they use.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    BoundsError,
    DimensionError,
    DomainError,
    OverlapViolationError,
    ParseError,
)

__all__ = [
    "LoggedBanditRecord",
    "FullFeedbackRecord",
    "LoggedBanditDataset",
    "FullFeedbackDataset",
    "ScoredDataset",
    "TopKCounts",
    "load_dataset",
    "save_dataset",
    "rank_by_score",
    "top_k_counts",
    "CSV_COLUMNS",
]

Features = str | tuple[float, ...]

# Header of the on-disk dataset format; `score` is optional.
CSV_COLUMNS = ("unit_id", "features", "treatment", "outcome", "propensity", "score")


@dataclass(frozen=True)
class LoggedBanditRecord:
    """One logged observation: only the outcome of the action taken is known.

    ``propensity`` is the probability of the *logged* treatment arm given the
    features (for a control unit in a group treated with probability q it is
    1 - q, not q).
    """

    unit_id: int
    features: Features
    treatment: int
    outcome: float
    propensity: float


@dataclass(frozen=True)
class FullFeedbackRecord:
    """Synthetic ground truth: both potential outcomes and their difference."""

    unit_id: int
    features: Features
    outcome_treated: float
    outcome_control: float
    true_ite: float


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class LoggedBanditDataset:
    """Column-oriented logged bandit dataset with validation at construction.

    Rejects any record whose propensity is not strictly inside (0, 1): every
    unit must have had a positive probability of receiving either arm, and
    every downstream formula divides by the propensity. Treatments must be
    binary. ``binary_outcomes`` is set when all outcomes are in {0, 1}.
    """

    def __init__(
        self,
        unit_ids: Sequence[int] | np.ndarray,
        features: Sequence[Features],
        treatments: Sequence[int] | np.ndarray,
        outcomes: Sequence[float] | np.ndarray,
        propensities: Sequence[float] | np.ndarray,
        scores: Sequence[float] | np.ndarray | None = None,
    ):
        self.unit_ids = _freeze(np.asarray(unit_ids, dtype=np.int64))
        self.features = list(features)
        self.treatments = _freeze(np.asarray(treatments, dtype=np.int8))
        self.outcomes = _freeze(np.asarray(outcomes, dtype=np.float64))
        self.propensities = _freeze(np.asarray(propensities, dtype=np.float64))
        self.scores = None if scores is None else _freeze(np.asarray(scores, dtype=np.float64))

        n = len(self.unit_ids)
        for name, col in (
            ("features", self.features),
            ("treatments", self.treatments),
            ("outcomes", self.outcomes),
            ("propensities", self.propensities),
        ):
            if len(col) != n:
                raise DimensionError(f"{name} has length {len(col)}, expected {n}")
        if self.scores is not None and len(self.scores) != n:
            raise DimensionError(f"scores has length {len(self.scores)}, expected {n}")

        bad_t = ~np.isin(self.treatments, (0, 1))
        if bad_t.any():
            i = int(np.flatnonzero(bad_t)[0])
            raise DomainError(f"treatment must be 0 or 1, got {self.treatments[i]} for unit {self.unit_ids[i]}")
        bad_q = ~((self.propensities > 0.0) & (self.propensities < 1.0))
        if bad_q.any():
            i = int(np.flatnonzero(bad_q)[0])
            raise OverlapViolationError(
                f"propensity must lie strictly inside (0, 1), got {self.propensities[i]} "
                f"for unit {self.unit_ids[i]}: every unit needs a non-zero probability "
                "of both treatment and control"
            )
        if not np.isfinite(self.outcomes).all():
            raise DomainError("outcomes must be finite")
        self.binary_outcomes = bool(np.isin(self.outcomes, (0.0, 1.0)).all())

    def __len__(self) -> int:
        return len(self.unit_ids)

    def __getitem__(self, i: int) -> LoggedBanditRecord:
        return LoggedBanditRecord(
            unit_id=int(self.unit_ids[i]),
            features=self.features[i],
            treatment=int(self.treatments[i]),
            outcome=float(self.outcomes[i]),
            propensity=float(self.propensities[i]),
        )

    def __iter__(self) -> Iterator[LoggedBanditRecord]:
        return (self[i] for i in range(len(self)))

    @property
    def n_treated(self) -> int:
        return int(self.treatments.sum())

    @property
    def n_control(self) -> int:
        return len(self) - self.n_treated


class FullFeedbackDataset:
    """Both potential outcomes per unit; ``true_ite`` is their difference."""

    def __init__(
        self,
        unit_ids: Sequence[int] | np.ndarray,
        features: Sequence[Features],
        outcomes_treated: Sequence[float] | np.ndarray,
        outcomes_control: Sequence[float] | np.ndarray,
    ):
        self.unit_ids = _freeze(np.asarray(unit_ids, dtype=np.int64))
        self.features = list(features)
        self.outcomes_treated = _freeze(np.asarray(outcomes_treated, dtype=np.float64))
        self.outcomes_control = _freeze(np.asarray(outcomes_control, dtype=np.float64))
        if not (len(self.features) == len(self.outcomes_treated) == len(self.outcomes_control) == len(self.unit_ids)):
            raise DimensionError("full-feedback columns must have equal length")
        self.true_ite = _freeze(self.outcomes_treated - self.outcomes_control)

    def __len__(self) -> int:
        return len(self.unit_ids)

    def __getitem__(self, i: int) -> FullFeedbackRecord:
        return FullFeedbackRecord(
            unit_id=int(self.unit_ids[i]),
            features=self.features[i],
            outcome_treated=float(self.outcomes_treated[i]),
            outcome_control=float(self.outcomes_control[i]),
            true_ite=float(self.true_ite[i]),
        )


@dataclass(frozen=True)
class TopKCounts:
    """Arm sizes and responder counts over a top-k prefix of the ranking."""

    n_treated: int
    n_control: int
    responders_treated: int
    responders_control: int


@dataclass(frozen=True)
class ScoredDataset:
    """A dataset joined with predicted-uplift scores and its descending-score order.

    ``order`` holds 0-based record indices sorted by non-increasing score, ties
    broken by ascending original index (stable). ``iso_last`` holds the 1-based
    sorted positions that end each maximal run of equal scores; the last
    position N is always included. Instances are immutable and safe to share.
    """

    dataset: LoggedBanditDataset
    scores: np.ndarray
    order: np.ndarray
    iso_last: np.ndarray

    def __post_init__(self):
        for a in (self.scores, self.order, self.iso_last):
            a.setflags(write=False)

    def __len__(self) -> int:
        return len(self.order)

    @cached_property
    def sorted_scores(self) -> np.ndarray:
        return _freeze(self.scores[self.order])

    @cached_property
    def sorted_treatments(self) -> np.ndarray:
        return _freeze(self.dataset.treatments[self.order].astype(np.float64))

    @cached_property
    def sorted_outcomes(self) -> np.ndarray:
        return _freeze(self.dataset.outcomes[self.order])

    @cached_property
    def sorted_propensities(self) -> np.ndarray:
        return _freeze(self.dataset.propensities[self.order])

    @property
    def iso_groups(self) -> list[range]:
        """Maximal runs of equal score as ranges of 1-based sorted positions."""
        out, start = [], 1
        for last in self.iso_last:
            out.append(range(start, int(last) + 1))
            start = int(last) + 1
        return out

    @property
    def has_ties(self) -> bool:
        return len(self.iso_last) < len(self)


def rank_by_score(dataset: LoggedBanditDataset, scores: Sequence[float] | np.ndarray) -> ScoredDataset:
    """Sort a dataset by non-increasing predicted uplift.

    Ties are split deterministically by ascending original index, and the
    resulting runs of equal scores are recorded so tie-insensitive metrics can
    interpolate across them. The ranking depends on scores only through their
    order, so any strictly increasing transformation leaves it unchanged.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if len(scores) != len(dataset):
        raise DimensionError(f"{len(scores)} scores for {len(dataset)} records")
    if len(scores) == 0:
        raise DomainError("cannot rank an empty dataset")
    if not np.isfinite(scores).all():
        raise DomainError("scores must be finite")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    # 1-based positions ending each run of equal scores; position N always ends one.
    breaks = np.flatnonzero(sorted_scores[:-1] != sorted_scores[1:]) + 1
    iso_last = np.concatenate([breaks, [len(scores)]]).astype(np.int64)
    return ScoredDataset(dataset=dataset, scores=scores, order=order, iso_last=iso_last)


def top_k_counts(scored: ScoredDataset, k: int) -> TopKCounts:
    """Count arms and responders among the top-k ranked records (1 <= k <= N)."""
    n = len(scored)
    if not 1 <= k <= n:
        raise BoundsError(f"k={k} outside [1, {n}]")
    t = scored.sorted_treatments[:k]
    y = scored.sorted_outcomes[:k]
    n_treated = int(t.sum())
    return TopKCounts(
        n_treated=n_treated,
        n_control=k - n_treated,
        responders_treated=int(((t == 1) & (y == 1)).sum()),
        responders_control=int(((t == 0) & (y == 1)).sum()),
    )


def _parse_features(text: str) -> Features:
    """`|`-joined reals become a vector; anything non-numeric is a label."""
    parts = text.split("|")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        return text


def _format_features(f: Features) -> str:
    if isinstance(f, str):
        return f
    return "|".join(repr(float(v)) for v in f)


def load_dataset(source, delimiter: str = ",") -> LoggedBanditDataset:
    """Read a logged bandit dataset from CSV.

    ``source`` may be a path, a text stream, or a binary stream. The header
    ``unit_id,features,treatment,outcome,propensity[,score]`` is required;
    the optional trailing score column yields a pre-scored dataset. UTF-8,
    ``.`` decimal separator.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return _load_from_stream(fh, delimiter)
    if isinstance(source, (bytes, bytearray)):
        return _load_from_stream(io.StringIO(source.decode("utf-8")), delimiter)
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return _load_from_stream(io.StringIO(data), delimiter)
    raise TypeError(f"unsupported source type {type(source)!r}")


def _load_from_stream(fh, delimiter: str) -> LoggedBanditDataset:
    reader = csv.reader(fh, delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input, header required") from None
    header = [h.strip() for h in header]
    if header[:5] != list(CSV_COLUMNS[:5]):
        raise ParseError(f"bad header {header!r}, expected {','.join(CSV_COLUMNS[:5])}[,score]", line_no=1)
    with_score = len(header) == 6 and header[5] == "score"
    if len(header) > 5 and not with_score:
        raise ParseError(f"unexpected trailing columns {header[5:]!r}", line_no=1)
    expected_width = 6 if with_score else 5

    ids, feats, ts, ys, qs, ss = [], [], [], [], [], []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != expected_width:
            raise ParseError(f"expected {expected_width} fields, got {len(row)}", line_no=line_no)
        try:
            ids.append(int(row[0]))
            feats.append(_parse_features(row[1]))
            t = float(row[2])
            y = float(row[3])
            q = float(row[4])
            if with_score:
                ss.append(float(row[5]))
        except ValueError as e:
            raise ParseError(str(e), line_no=line_no) from None
        if t not in (0.0, 1.0):
            raise DomainError(f"line {line_no}: treatment must be 0 or 1, got {row[2]}")
        if not 0.0 < q < 1.0:
            raise OverlapViolationError(
                f"line {line_no}: propensity {q} outside (0, 1); every unit needs a "
                "non-zero probability of both treatment and control"
            )
        ts.append(int(t))
        ys.append(y)
        qs.append(q)
    return LoggedBanditDataset(ids, feats, ts, ys, qs, scores=ss if ss else None)


def save_dataset(dataset: LoggedBanditDataset, path, scores: np.ndarray | None = None) -> None:
    """Write a dataset in the CSV schema of :func:`load_dataset`.

    ``scores`` overrides the dataset's own score column when given.
    """
    scores = dataset.scores if scores is None else np.asarray(scores, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        cols = CSV_COLUMNS if scores is not None else CSV_COLUMNS[:5]
        writer.writerow(cols)
        for i in range(len(dataset)):
            row = [
                int(dataset.unit_ids[i]),
                _format_features(dataset.features[i]),
                int(dataset.treatments[i]),
                _num(dataset.outcomes[i]),
                _num(dataset.propensities[i]),
            ]
            if scores is not None:
                row.append(_num(scores[i]))
            writer.writerow(row)


def _num(x: float) -> str:
    """Shortest exact decimal form (ints rendered without trailing .0)."""
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)
