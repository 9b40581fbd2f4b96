"""Census geography: FIPS-style identifiers, roll-ups and block-group downscaling."""
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import LevelError, ParseError, ShapeError
from .evaluation import both_classes

LEVEL_BY_LENGTH = {2: "state", 5: "county", 11: "tract", 12: "block_group", 15: "block"}
LENGTH_BY_LEVEL = {v: k for k, v in LEVEL_BY_LENGTH.items()}
LEVELS = ("state", "county", "tract", "block_group", "block")


@dataclass(frozen=True, order=True)
class GeoId:
    code: str
    level: str

    def __str__(self):
        return self.code

    def ancestor(self, level):
        if LENGTH_BY_LEVEL[level] > len(self.code):
            raise LevelError(f"{level} is not an ancestor of {self.level}", geoid=self.code)
        return GeoId(self.code[: LENGTH_BY_LEVEL[level]], level)

    @property
    def tract(self):
        return self.ancestor("tract")


def parse_geoid(s):
    """Parse a 2/5/11/12/15-digit code; the level follows from the length."""
    if not isinstance(s, str):
        raise ParseError("geoid must be a string", value=repr(s))
    code = s.strip()
    if not code.isdigit() or not code.isascii() or len(code) not in LEVEL_BY_LENGTH:
        raise ParseError(f"malformed geoid {s!r}", value=s)
    return GeoId(code, LEVEL_BY_LENGTH[len(code)])


def format_geoid(g):
    return g.code


@dataclass
class GeoRecord:
    id: GeoId
    year: int = None
    features: dict = field(default_factory=dict)
    label: int = None
    # number of source records rolled into this one
    child_count: int = 1


def aggregate_up(records, target):
    """Sum features of finer-level records into their ``target``-level ancestors.

    Records are grouped by (ancestor code, year). Labels are not carried up.
    Output is sorted by code, then year.
    """
    records = list(records)
    if target not in LENGTH_BY_LEVEL:
        raise LevelError(f"unknown level {target!r}")
    if not records:
        return []
    levels = {r.id.level for r in records}
    if len(levels) > 1:
        raise LevelError("records mix geography levels", levels=sorted(levels))
    level = levels.pop()
    if LENGTH_BY_LEVEL[target] >= LENGTH_BY_LEVEL[level]:
        raise LevelError(f"{target} is not an ancestor level of {level}", source=level, target=target)
    schema = list(records[0].features)
    groups = OrderedDict()
    for r in records:
        if list(r.features) != schema:
            raise ShapeError("records do not share a feature schema", geoid=r.id.code)
        key = (r.id.code[: LENGTH_BY_LEVEL[target]], r.year if r.year is not None else -1)
        groups.setdefault(key, []).append(r)
    out = []
    for (code, year), members in sorted(groups.items()):
        feats = {name: sum(m.features[name] for m in members) for name in schema}
        out.append(
            GeoRecord(
                id=GeoId(code, target),
                year=None if year == -1 else year,
                features=feats,
                child_count=sum(m.child_count for m in members),
            )
        )
    return out


def records_matrix(records, feature_names):
    """Stack record features in ``feature_names`` order."""
    rows = []
    for r in records:
        missing = [f for f in feature_names if f not in r.features]
        if missing:
            raise ShapeError("record lacks model features", geoid=r.id.code, missing=missing)
        rows.append([r.features[f] for f in feature_names])
    return np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_names))


def downscale_predict(model, bg_records):
    """Block-group probabilities and intervals from a tract-trained model."""
    from .pipeline import predict_with_interval

    X = records_matrix(bg_records, model.feature_names)
    return predict_with_interval(model, X)


@dataclass
class TractConsensus:
    geoid: str
    probability: float
    lo: float
    hi: float
    n_children: int
    predicted: int
    label: int = None


@dataclass
class ConsensusReport:
    tracts: list
    metrics: dict  # class -> Metrics, over tracts that have a label
    unmatched_block_groups: list
    tracts_without_predictions: list


def tract_consensus(bg_ids, prob, tract_labels, threshold=0.5, lo=None, hi=None):
    """Classify each tract by the mean probability of its block groups.

    A tract is DAC when the mean is strictly above ``threshold``. Block groups
    whose tract has no label are listed and left out; labelled tracts with no
    block group are reported and excluded.
    """
    prob = np.asarray(prob, dtype=np.float64)
    lo = prob if lo is None else np.asarray(lo, dtype=np.float64)
    hi = prob if hi is None else np.asarray(hi, dtype=np.float64)
    if not (len(bg_ids) == len(prob) == len(lo) == len(hi)):
        raise ShapeError("block-group ids and predictions differ in length")
    labels = {str(k): v for k, v in tract_labels.items()}
    grouped = OrderedDict()
    unmatched = []
    for i, raw in enumerate(bg_ids):
        g = raw if isinstance(raw, GeoId) else parse_geoid(str(raw))
        if g.level != "block_group":
            raise LevelError("consensus expects block-group ids", geoid=g.code)
        tract = g.code[:11]
        if tract not in labels:
            unmatched.append(g.code)
            continue
        grouped.setdefault(tract, []).append(i)
    tracts = []
    for tract in sorted(grouped):
        idx = grouped[tract]
        mean = float(np.mean(prob[idx]))
        tracts.append(
            TractConsensus(
                geoid=tract,
                probability=mean,
                lo=float(np.mean(lo[idx])),
                hi=float(np.mean(hi[idx])),
                n_children=len(idx),
                predicted=int(mean > threshold),
                label=None if labels[tract] is None else int(labels[tract]),
            )
        )
    scored = [t for t in tracts if t.label is not None]
    metrics = both_classes([t.label for t in scored], [t.predicted for t in scored])
    missing = sorted(t for t in labels if t not in grouped)
    return ConsensusReport(tracts, metrics, unmatched, missing)
