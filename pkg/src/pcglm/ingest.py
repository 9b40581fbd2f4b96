"""CSV ingestion, joining, missing-value policy and synthetic data."""
import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConfigError,
    DuplicateIdError,
    EmptyInputError,
    JoinError,
    LevelError,
    ModelIOError,
    RowError,
    SchemaError,
    ShapeError,
)
from .geo import GeoRecord, aggregate_up, parse_geoid
from .glm import expit

INCOME_COLUMNS = (
    "inc_lt_10000",
    "inc_10000_14999",
    "inc_15000_19999",
    "inc_20000_24999",
    "inc_25000_29999",
    "inc_30000_34999",
    "inc_35000_39999",
    "inc_40000_44999",
    "inc_45000_49999",
    "inc_50000_59999",
    "inc_60000_74999",
    "inc_75000_99999",
    "inc_100000_124999",
    "inc_125000_149999",
    "inc_150000_199999",
    "inc_200000_plus",
    "total_population",
)
EMPLOYMENT_COLUMNS = (
    "emp_agriculture",
    "emp_mining",
    "emp_utilities",
    "emp_construction",
    "emp_manufacturing",
    "emp_wholesale",
    "emp_retail",
    "emp_transportation",
    "emp_information",
    "emp_finance",
    "emp_real_estate",
    "emp_professional",
    "emp_management",
    "emp_admin_waste",
    "emp_education",
    "emp_health",
    "emp_arts",
    "emp_accommodation",
    "emp_other_services",
    "emp_public_admin",
    "employed_population",
)
CONTINUOUS_FEATURES = ("longitude", "latitude", "area")
MISSING_TOKENS = ("", "na", "nan", "null", "none")
KEY_COLUMNS = ("geoid", "year")


def feature_kind(name):
    return "continuous" if name.lower() in CONTINUOUS_FEATURES else "count"


@dataclass
class Dataset:
    geoids: list
    level: str
    feature_names: tuple
    X: np.ndarray  # NaN marks a missing cell
    labels: np.ndarray = None  # NaN marks an unlabelled row
    year: int = None
    kinds: tuple = None
    label_name: str = "dac"

    def __post_init__(self):
        self.feature_names = tuple(self.feature_names)
        self.X = np.asarray(self.X, dtype=np.float64).reshape(len(self.geoids), len(self.feature_names))
        if self.kinds is None:
            self.kinds = tuple(feature_kind(f) for f in self.feature_names)
        if len(set(self.geoids)) != len(self.geoids):
            seen, dup = set(), None
            for g in self.geoids:
                if g in seen:
                    dup = g
                    break
                seen.add(g)
            raise DuplicateIdError(f"duplicate geoid {dup}", geoid=dup)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.float64).ravel()
            ok = np.isnan(self.labels) | (self.labels == 0) | (self.labels == 1)
            if len(self.labels) != len(self.geoids) or not ok.all():
                raise SchemaError("labels must be 0/1, one per row")

    def __len__(self):
        return len(self.geoids)

    @property
    def has_all_labels(self):
        return self.labels is not None and not np.isnan(self.labels).any()

    def subset(self, rows):
        rows = np.asarray(rows, dtype=int)
        return replace(
            self,
            geoids=[self.geoids[i] for i in rows],
            X=self.X[rows],
            labels=None if self.labels is None else self.labels[rows],
        )

    def columns(self, names):
        idx = [self.feature_names.index(n) for n in names]
        return self.X[:, idx]

    def records(self):
        out = []
        for i, g in enumerate(self.geoids):
            lab = None
            if self.labels is not None and not math.isnan(self.labels[i]):
                lab = int(self.labels[i])
            out.append(
                GeoRecord(
                    id=parse_geoid(g),
                    year=self.year,
                    features=dict(zip(self.feature_names, self.X[i].tolist())),
                    label=lab,
                )
            )
        return out

    @classmethod
    def from_records(cls, records, label_name="dac"):
        records = list(records)
        if not records:
            raise EmptyInputError("no records")
        levels = {r.id.level for r in records}
        years = {r.year for r in records}
        if len(levels) > 1 or len(years) > 1:
            raise LevelError("records mix levels or years", levels=sorted(levels), years=sorted(map(str, years)))
        names = tuple(records[0].features)
        X = [[r.features.get(n, np.nan) for n in names] for r in records]
        labels = None
        if any(r.label is not None for r in records):
            labels = [np.nan if r.label is None else r.label for r in records]
        return cls(
            geoids=[r.id.code for r in records],
            level=levels.pop(),
            feature_names=names,
            X=X,
            labels=labels,
            year=years.pop(),
            label_name=label_name,
        )


def _parse_number(text):
    if text.strip().lower() in MISSING_TOKENS:
        return math.nan
    return float(text)


def load_csv(path, expected_level=None, required=("geoid",), schema=None):
    """Read a geography-keyed CSV into records.

    ``geoid`` and the optional ``year`` column are keys; every other column
    (or just ``schema`` when given) is parsed as a real. Blank/NA cells load
    as NaN.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ModelIOError(f"cannot open {path}: {exc}", path=str(path)) from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInputError(f"{path} is empty", path=str(path))
        header = [h.strip() for h in header]
        needed = list(required) + list(schema or ())
        missing = [c for c in needed if c not in header]
        if missing:
            raise SchemaError(f"{path} is missing required columns", path=str(path), missing=missing)
        if len(set(header)) != len(header):
            raise SchemaError(f"{path} has duplicate column names", path=str(path))
        features = list(schema) if schema else [h for h in header if h not in KEY_COLUMNS]
        pos = {h: i for i, h in enumerate(header)}
        out = []
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise RowError(f"line {line}: expected {len(header)} fields, got {len(row)}", path=str(path), line=line)
            try:
                gid = parse_geoid(row[pos["geoid"]])
            except Exception as exc:
                raise RowError(
                    f"line {line}: malformed geoid {row[pos['geoid']]!r}", path=str(path), line=line
                ) from exc
            if expected_level is not None and gid.level != expected_level:
                raise RowError(
                    f"line {line}: geoid {gid.code} is {gid.level}, expected {expected_level}",
                    path=str(path),
                    line=line,
                )
            year = None
            if "year" in pos and row[pos["year"]].strip():
                try:
                    year = int(row[pos["year"]])
                except ValueError as exc:
                    raise RowError(f"line {line}: bad year", path=str(path), line=line) from exc
            feats = {}
            for name in features:
                try:
                    feats[name] = _parse_number(row[pos[name]])
                except ValueError as exc:
                    raise RowError(
                        f"line {line}: column {name} is not numeric", path=str(path), line=line, column=name
                    ) from exc
            out.append(GeoRecord(id=gid, year=year, features=feats))
    if not out:
        raise EmptyInputError(f"{path} has no data rows", path=str(path))
    return out


def load_labels(path, expected_level="tract"):
    """Read a ``geoid,dac`` file into {geoid: 0/1}."""
    recs = load_csv(path, expected_level=expected_level, required=("geoid", "dac"), schema=("dac",))
    out = {}
    for r in recs:
        v = r.features["dac"]
        if v not in (0.0, 1.0):
            raise SchemaError(f"label for {r.id.code} is not 0/1", geoid=r.id.code, value=v)
        if r.id.code in out:
            raise DuplicateIdError(f"duplicate geoid {r.id.code} in labels", geoid=r.id.code)
        out[r.id.code] = int(v)
    return out


def _index(records, source):
    out = {}
    for r in records:
        if r.id.code in out:
            raise DuplicateIdError(f"duplicate geoid {r.id.code} in {source}", geoid=r.id.code, source=source)
        out[r.id.code] = r
    return out


@dataclass
class JoinReport:
    dropped: dict = field(default_factory=dict)  # source -> geoids absent from the join
    unlabeled: list = field(default_factory=list)
    rows: int = 0


def join(*sources, labels=None, require_labels=False, names=None):
    """Inner-join feature sources on geoid, then left-join labels.

    Feature columns appear in source order. Rows are sorted by geoid.

    Returns:
        (Dataset, JoinReport)
    """
    sources = [list(s) for s in sources if s is not None]
    if not sources:
        raise JoinError("nothing to join")
    names = list(names or [f"source{i}" for i in range(len(sources))])
    indexed = [_index(s, n) for s, n in zip(sources, names)]
    levels = {r.id.level for s in sources for r in s}
    if len(levels) > 1:
        raise LevelError("sources are at different geography levels", levels=sorted(levels))
    years = {r.year for s in sources for r in s if r.year is not None}
    if len(years) > 1:
        raise JoinError("sources cover different years", years=sorted(years))
    columns = []
    for s, n in zip(sources, names):
        for f in s[0].features:
            if f in columns:
                raise SchemaError(f"feature {f} appears in more than one source", feature=f)
            columns.append(f)
    common = set(indexed[0])
    for ix in indexed[1:]:
        common &= set(ix)
    if not common:
        raise JoinError("feature sources share no geoids")
    report = JoinReport()
    for ix, n in zip(indexed, names):
        extra = sorted(set(ix) - common)
        if extra:
            report.dropped[n] = extra
    geoids = sorted(common)
    X = np.empty((len(geoids), len(columns)))
    for i, g in enumerate(geoids):
        row = []
        for ix in indexed:
            row.extend(ix[g].features.values())
        X[i] = row
    lab = None
    if labels is not None:
        lab = np.array([labels.get(g, np.nan) for g in geoids], dtype=np.float64)
        report.unlabeled = [g for g, v in zip(geoids, lab) if math.isnan(v)]
        if require_labels and report.unlabeled:
            raise JoinError("rows without labels cannot be used for fitting", geoids=report.unlabeled[:20])
        if labels:
            report.dropped["labels"] = sorted(set(labels) - common)
            if not report.dropped["labels"]:
                del report.dropped["labels"]
    elif require_labels:
        raise JoinError("labels are required")
    report.rows = len(geoids)
    ds = Dataset(
        geoids=geoids,
        level=levels.pop(),
        feature_names=tuple(columns),
        X=X,
        labels=lab,
        year=years.pop() if years else None,
    )
    return ds, report


@dataclass
class MissingReport:
    policy: str
    cells: int = 0
    rows_affected: int = 0
    dropped_geoids: list = field(default_factory=list)
    filled: list = field(default_factory=list)  # (geoid, feature)


def handle_missing(dataset, policy="drop_row"):
    """Apply an explicit missing-value policy.

    ``drop_row`` removes any row with a missing cell; ``zero_fill`` writes 0
    into missing count cells and drops rows whose missing cell is continuous.
    """
    if policy not in ("drop_row", "zero_fill"):
        raise ConfigError(f"unknown missing-value policy {policy!r}")
    miss = np.isnan(dataset.X)
    report = MissingReport(policy=policy, cells=int(miss.sum()), rows_affected=int(miss.any(axis=1).sum()))
    if not report.cells:
        return dataset, report
    if policy == "drop_row":
        bad = miss.any(axis=1)
    else:
        counts = np.array([k == "count" for k in dataset.kinds])
        bad = (miss & ~counts).any(axis=1)
        X = dataset.X.copy()
        for i, j in zip(*np.nonzero(miss & counts)):
            if not bad[i]:
                X[i, j] = 0.0
                report.filled.append((dataset.geoids[i], dataset.feature_names[j]))
        dataset = replace(dataset, X=X)
    report.dropped_geoids = [g for g, b in zip(dataset.geoids, bad) if b]
    return dataset.subset(np.flatnonzero(~bad)), report


def _format_value(v, kind):
    if math.isnan(v):
        return ""
    if kind == "count" and float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def write_csv(dataset, path, columns=None, include_year=True):
    columns = list(columns or dataset.feature_names)
    idx = [dataset.feature_names.index(c) for c in columns]
    kinds = [dataset.kinds[j] for j in idx]
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = ["geoid"] + (["year"] if include_year else []) + columns
            w.writerow(head)
            for i, g in enumerate(dataset.geoids):
                row = [g] + ([dataset.year if dataset.year is not None else ""] if include_year else [])
                row += [_format_value(dataset.X[i, j], k) for j, k in zip(idx, kinds)]
                w.writerow(row)
    except OSError as exc:
        raise ModelIOError(f"cannot write {path}: {exc}", path=str(path)) from exc


def write_labels(geoids, labels, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["geoid", "dac"])
        for g, v in zip(geoids, labels):
            w.writerow([g, int(v)])


# -- synthetic data --------------------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    n_tracts: int = 200
    bgs_per_tract: tuple = (2, 4)
    n_features: int = 5
    true_beta: tuple = (1.0, -0.8, 0.5, 0.0, 0.6)
    intercept: float = -1.0
    feature_correlation: float = 0.3
    seed: int = 0
    count_mean: float = 100.0
    count_sd: float = 30.0
    year: int = 2019
    county: str = "53033"

    def validate(self):
        if not 0.0 <= self.feature_correlation < 1.0:
            raise ConfigError("feature_correlation must lie in [0, 1)", value=self.feature_correlation)
        lo, hi = self.bgs_per_tract
        if not 1 <= lo <= hi <= 9:
            raise ConfigError("bgs_per_tract must satisfy 1 <= lo <= hi <= 9", value=list(self.bgs_per_tract))
        if len(self.true_beta) != self.n_features:
            raise ConfigError("true_beta needs one entry per feature")
        if not 2 <= self.n_tracts <= 999999:
            raise ConfigError("n_tracts out of range", value=self.n_tracts)
        if len(self.county) != 5 or not self.county.isdigit():
            raise ConfigError("county must be a 5-digit code", value=self.county)

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError("unknown synth spec keys", keys=unknown)
        d = dict(d)
        for key in ("bgs_per_tract", "true_beta"):
            if key in d:
                d[key] = tuple(d[key])
        spec = cls(**d)
        spec.validate()
        return spec


@dataclass
class SynthResult:
    block_groups: Dataset
    tracts: Dataset
    truth: dict


def generate_synthetic(spec):
    """Draw block-group counts, roll them up to tracts and plant tract labels.

    Block-group features are equicorrelated Gaussians shifted to
    ``count_mean``/``count_sd``, rounded and truncated at zero. Tract labels
    are Bernoulli draws from the logistic model with ``true_beta`` applied to
    the *standardized* tract features.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    p = spec.n_features
    rho = spec.feature_correlation
    lo, hi = spec.bgs_per_tract
    sizes = rng.integers(lo, hi + 1, size=spec.n_tracts)
    n_bg = int(sizes.sum())
    common = rng.standard_normal((n_bg, 1))
    own = rng.standard_normal((n_bg, p))
    g = math.sqrt(rho) * common + math.sqrt(1.0 - rho) * own
    counts = np.maximum(0.0, np.rint(spec.count_mean + spec.count_sd * g))
    names = tuple(f"x{j + 1}" for j in range(p))

    tract_ids = [f"{spec.county}{i + 1:06d}" for i in range(spec.n_tracts)]
    bg_ids = [f"{t}{b + 1}" for t, s in zip(tract_ids, sizes) for b in range(s)]
    owner = np.repeat(np.arange(spec.n_tracts), sizes)
    tract_X = np.zeros((spec.n_tracts, p))
    np.add.at(tract_X, owner, counts)

    means = tract_X.mean(axis=0)
    sds = tract_X.std(axis=0, ddof=1)
    if np.any(sds == 0):
        raise ConfigError("synthetic tract features have zero variance; raise n_tracts")
    beta = np.asarray(spec.true_beta, dtype=np.float64)
    eta = spec.intercept + ((tract_X - means) / sds) @ beta
    labels = (rng.random(spec.n_tracts) < expit(eta)).astype(np.float64)

    kinds = ("count",) * p
    bg = Dataset(geoids=bg_ids, level="block_group", feature_names=names, X=counts, year=spec.year, kinds=kinds)
    tracts = Dataset(
        geoids=tract_ids, level="tract", feature_names=names, X=tract_X, labels=labels, year=spec.year, kinds=kinds
    )
    truth = {
        "feature_names": list(names),
        "beta_standardized": beta.tolist(),
        "intercept_standardized": float(spec.intercept),
        "beta": (beta / sds).tolist(),
        "intercept": float(spec.intercept - np.sum(beta * means / sds)),
        "tract_means": means.tolist(),
        "tract_scales": sds.tolist(),
        "labels": dict(zip(tract_ids, labels.astype(int).tolist())),
    }
    return SynthResult(block_groups=bg, tracts=tracts, truth=truth)


def aggregate_dataset(dataset, target):
    """Roll a Dataset up to ``target`` level via geo.aggregate_up."""
    recs = aggregate_up(dataset.records(), target)
    return Dataset(
        geoids=[r.id.code for r in recs],
        level=target,
        feature_names=dataset.feature_names,
        X=[[r.features[f] for f in dataset.feature_names] for r in recs],
        year=dataset.year,
        kinds=dataset.kinds,
    )


def matrix_for(dataset, feature_names):
    """Columns of ``dataset`` in ``feature_names`` order; absent names are a shape error."""
    missing = [f for f in feature_names if f not in dataset.feature_names]
    if missing:
        raise ShapeError("dataset lacks model features", missing=missing)
    return dataset.columns(feature_names)
