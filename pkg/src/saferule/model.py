"""CSV ingestion, preprocessing and the self-contained JSON model file.

A trained model stores everything needed to score raw rows: the categorical
levels used for dummy expansion, z-score statistics, the discretization
tables, the coefficients and the rules. Rules are written both as level
segments and as intervals in the raw units of each input column.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .discretize import DataError, DiscretizationSpec, DiscretizedDataset, discretize_apply_many, segment_to_original
from .encoding import Task, predict_levels
from .rules import RuleSegment, format_segment, parse_segment

FORMAT_NAME = "saferule-model"
FORMAT_VERSION = 1


# --- CSV ------------------------------------------------------------------


@dataclass
class Table:
    header: list
    rows: list  # list of list of str

    def column(self, name: str) -> list:
        try:
            k = self.header.index(name)
        except ValueError:
            raise DataError(f"unknown column {name!r}; header is {self.header}") from None
        return [r[k] for r in self.rows]


def read_table(path) -> Table:
    """Read a rectangular CSV with a header row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{line_no}: expected {len(header)} fields, found {len(row)}")
            rows.append([c.strip() for c in row])
    if not header or header == [""]:
        raise DataError(f"{path}: missing header")
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Table(header, rows)


def _to_float(cell: str, col: str, row: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataError(
            f"row {row}: non-numeric value {cell!r} in column {col!r} "
            "(mark it with --categorical if it is a category)"
        ) from None
    if not math.isfinite(v):
        raise DataError(f"row {row}: non-finite value {cell!r} in column {col!r}")
    return v


@dataclass
class Preprocessor:
    """Turns raw table columns into the numeric matrix the learner sees.

    Categorical columns become ``k - 1`` indicator columns (the first level
    in sorted order is the baseline). Every resulting column is z-scored
    when ``normalize`` is set.
    """

    inputs: list  # raw input column names, in order
    categories: dict  # column -> sorted list of levels
    features: list  # names after dummy expansion
    mean: Optional[list] = None
    std: Optional[list] = None

    @classmethod
    def fit(cls, table: Table, inputs: Sequence[str], categorical=(), normalize: bool = True) -> "Preprocessor":
        categorical = set(categorical)
        unknown = categorical - set(inputs)
        if unknown:
            raise DataError(f"categorical column(s) not among the inputs: {sorted(unknown)}")
        cats, feats = {}, []
        for name in inputs:
            if name in categorical:
                levels = sorted(set(table.column(name)))
                cats[name] = levels
                feats.extend(f"{name}={lv}" for lv in levels[1:])
            else:
                feats.append(name)
        pre = cls(list(inputs), cats, feats)
        if normalize:
            Z = pre._expand(table)
            mu = Z.mean(axis=0)
            sd = Z.std(axis=0)
            sd[sd == 0] = 1.0
            pre.mean, pre.std = mu.tolist(), sd.tolist()
        return pre

    def _expand(self, table: Table) -> np.ndarray:
        cols = []
        for name in self.inputs:
            raw = table.column(name)
            if name in self.categories:
                levels = self.categories[name]
                index = {lv: k for k, lv in enumerate(levels)}
                for r, cell in enumerate(raw):
                    if cell not in index:
                        raise DataError(f"row {r + 2}: unseen category {cell!r} in column {name!r}")
                for lv in levels[1:]:
                    cols.append([1.0 if cell == lv else 0.0 for cell in raw])
            else:
                cols.append([_to_float(c, name, r + 2) for r, c in enumerate(raw)])
        return np.array(cols, dtype=float).T.reshape(len(table.rows), len(self.features))

    def transform(self, table: Table) -> np.ndarray:
        Z = self._expand(table)
        if self.mean is not None:
            Z = (Z - np.asarray(self.mean)) / np.asarray(self.std)
        return Z

    def to_raw(self, j: int, value: float) -> float:
        """Map a transformed-space value of feature ``j`` back to raw units."""
        if self.mean is None or not math.isfinite(value):
            return value
        return value * self.std[j] + self.mean[j]


@dataclass
class LabelCoding:
    task: Task
    name: str
    classes: Optional[list] = None  # classification: [negative, positive]
    mean: float = 0.0
    std: float = 1.0

    @classmethod
    def fit(cls, task: Task, name: str, raw: list, normalize: bool = True) -> "LabelCoding":
        if task is Task.CLASSIFICATION:
            levels = sorted(set(raw), key=_label_key)
            if len(levels) != 2:
                raise DataError(f"classification needs exactly 2 label values, found {len(levels)}: {levels[:5]}")
            return cls(task, name, levels)
        y = np.array([_to_float(c, name, r + 2) for r, c in enumerate(raw)])
        if not normalize:
            return cls(task, name)
        sd = float(y.std()) or 1.0
        return cls(task, name, None, float(y.mean()), sd)

    def encode(self, raw: list) -> np.ndarray:
        if self.task is Task.CLASSIFICATION:
            index = {c: k for k, c in enumerate(self.classes)}
            bad = [c for c in raw if c not in index]
            if bad:
                raise DataError(f"unexpected label value {bad[0]!r}; known values are {self.classes}")
            return np.array([2.0 * index[c] - 1.0 for c in raw])
        y = np.array([_to_float(c, self.name, r + 2) for r, c in enumerate(raw)])
        return (y - self.mean) / self.std

    def decode(self, f: np.ndarray) -> np.ndarray:
        return f * self.std + self.mean


def _label_key(v: str):
    # numeric labels sort numerically so "-1" < "1" and "0" < "1"
    try:
        return (0, float(v), v)
    except ValueError:
        return (1, 0.0, v)


@dataclass
class Dataset:
    X: np.ndarray
    y: Optional[np.ndarray]
    pre: Preprocessor
    label: Optional[LabelCoding]


def load_csv(path, label: Optional[str] = None, task="regression", categorical=(), normalize: bool = True) -> Dataset:
    """Load a training table. Without ``label`` every column is an input."""
    task = Task(task)
    table = read_table(path)
    if label is not None and label not in table.header:
        raise DataError(f"label column {label!r} not found; header is {table.header}")
    inputs = [h for h in table.header if h != label]
    if not inputs:
        raise DataError("no input columns besides the label")
    pre = Preprocessor.fit(table, inputs, categorical, normalize)
    X = pre.transform(table)
    coding = y = None
    if label is not None:
        raw = table.column(label)
        coding = LabelCoding.fit(task, label, raw, normalize)
        y = coding.encode(raw)
    return Dataset(X, y, pre, coding)


# --- model file -------------------------------------------------------------


@dataclass
class Model:
    task: Task
    pre: Preprocessor
    label: LabelCoding
    disc: DiscretizedDataset  # tables only; xbar is empty
    eta: np.ndarray
    b: float
    rules: dict  # RuleSegment -> coefficient
    training: dict = field(default_factory=dict)

    @classmethod
    def from_fit(cls, data: Dataset, ds: DiscretizedDataset, state, training: dict) -> "Model":
        tables = DiscretizedDataset(
            np.zeros((0, ds.d), dtype=np.int64), ds.s, ds.zmin, ds.zmax, tuple(data.pre.features), ds.spec
        )
        rules = {seg: float(c) for seg, c in sorted(state.zeta.items()) if c != 0.0}
        return cls(data.label.task, data.pre, data.label, tables, np.asarray(state.eta, dtype=float).copy(),
                   float(state.b), rules, dict(training))

    # scoring

    def decision(self, X: np.ndarray) -> np.ndarray:
        """Model output in the learner's (transformed) space."""
        xbar = discretize_apply_many(X, self.disc)
        return predict_levels(self.eta, self.rules, self.b, X, xbar)

    def predict_table(self, table: Table) -> dict:
        f = self.decision(self.pre.transform(table))
        if self.task is Task.CLASSIFICATION:
            sign = np.where(f >= 0, 1, -1)
            return {"prediction": sign, "margin": f,
                    "class": [self.label.classes[int(v > 0)] for v in sign]}
        return {"prediction": self.label.decode(f)}

    def raw_interval(self, seg: RuleSegment) -> dict:
        box = segment_to_original(seg, self.disc)
        out = {}
        for j in seg.constrained(self.disc.s):
            lo, hi = (self.pre.to_raw(j, box.lower[j]), self.pre.to_raw(j, box.upper[j]))
            out[self.pre.features[j]] = [None if math.isinf(lo) else lo, None if math.isinf(hi) else hi]
        return out

    # serialization

    def to_dict(self) -> dict:
        s = self.disc.s
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "task": self.task.value,
            "label": {"name": self.label.name, "classes": self.label.classes,
                      "mean": self.label.mean, "std": self.label.std},
            "inputs": self.pre.inputs,
            "categories": self.pre.categories,
            "features": self.pre.features,
            "normalization": None if self.pre.mean is None else {"mean": self.pre.mean, "std": self.pre.std},
            "discretization": {
                "spec": str(self.disc.spec),
                "levels": list(s),
                "zmin": [list(v) for v in self.disc.zmin],
                "zmax": [list(v) for v in self.disc.zmax],
            },
            "intercept": self.b,
            "linear": {name: float(c) for name, c in zip(self.pre.features, self.eta)},
            "rules": [
                {
                    "segment": format_segment(seg, s),
                    "lo": list(seg.lo),
                    "hi": list(seg.hi),
                    "coefficient": c,
                    "interval": self.raw_interval(seg),
                }
                for seg, c in self.rules.items()
            ],
            "training": self.training,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, allow_nan=False)
            fh.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        if d.get("format") != FORMAT_NAME:
            raise DataError("not a saferule model file")
        if d.get("version") != FORMAT_VERSION:
            raise DataError(f"unsupported model file version {d.get('version')!r}")
        task = Task(d["task"])
        norm = d["normalization"]
        pre = Preprocessor(d["inputs"], d["categories"], d["features"],
                           None if norm is None else norm["mean"], None if norm is None else norm["std"])
        lab = d["label"]
        label = LabelCoding(task, lab["name"], lab["classes"], lab["mean"], lab["std"])
        disc_d = d["discretization"]
        s = tuple(disc_d["levels"])
        disc = DiscretizedDataset(
            np.zeros((0, len(s)), dtype=np.int64), s,
            tuple(tuple(v) for v in disc_d["zmin"]), tuple(tuple(v) for v in disc_d["zmax"]),
            tuple(pre.features), DiscretizationSpec.parse(disc_d["spec"]),
        )
        eta = np.array([d["linear"][name] for name in pre.features], dtype=float)
        rules = {}
        for r in d["rules"]:
            seg = RuleSegment(tuple(r["lo"]), tuple(r["hi"]))
            if seg != parse_segment(r["segment"], s):
                raise DataError(f"rule {r['segment']!r} disagrees with its lo/hi fields")
            rules[seg] = float(r["coefficient"])
        return cls(task, pre, label, disc, eta, float(d["intercept"]), rules, d.get("training", {}))

    @classmethod
    def load(cls, path) -> "Model":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(d)


def _finite(v):
    v = float(v)
    return v if math.isfinite(v) else None


def training_metadata(step, **extra) -> dict:
    st = step.state
    return {
        "lambda": step.lam,
        "rho": step.rho,
        "gap": _finite(st.gap),
        "primal": _finite(st.primal),
        "converged": step.converged,
        "date": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        **extra,
    }
