"""Run configuration shared by the library entry points and the CLI."""
import json
from dataclasses import asdict, dataclass, fields, replace

from .errors import ConfigError, ModelIOError

CI_FORMS = ("symmetric", "log_scale")
MISSING_POLICIES = ("drop_row", "zero_fill")


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 0.05
    pca_mode: str = "correlation"
    rank_tolerance: float = 1e-10
    ridge: float = 0.0
    threshold: float = 0.5
    ci_form: str = "symmetric"
    seed: int = 0
    folds: int = 5
    missing_policy: str = "drop_row"
    eliminate: bool = True
    # None -> longitude/area (when present) bypass PCA, everything else enters it
    pca_features: tuple = None
    passthrough_features: tuple = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)", alpha=self.alpha)
        if self.pca_mode not in ("correlation", "covariance"):
            raise ConfigError("pca_mode must be 'correlation' or 'covariance'", pca_mode=self.pca_mode)
        if not 0.0 <= self.rank_tolerance < 1.0:
            raise ConfigError("rank_tolerance must lie in [0, 1)", rank_tolerance=self.rank_tolerance)
        if self.ridge < 0:
            raise ConfigError("ridge must be >= 0", ridge=self.ridge)
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie in (0, 1)", threshold=self.threshold)
        if self.ci_form not in CI_FORMS:
            raise ConfigError(f"ci_form must be one of {CI_FORMS}", ci_form=self.ci_form)
        if self.missing_policy not in MISSING_POLICIES:
            raise ConfigError(f"missing_policy must be one of {MISSING_POLICIES}")
        if int(self.folds) < 2:
            raise ConfigError("folds must be >= 2", folds=self.folds)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError("unknown config keys", keys=unknown)
        data = dict(data)
        for key in ("pca_features", "passthrough_features"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        return cls(**data)

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ModelIOError(f"cannot read config file: {exc}", path=str(path)) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}", path=str(path)) from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object", path=str(path))
        return cls.from_dict(data)

    def override(self, **kwargs):
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def to_dict(self):
        out = asdict(self)
        for key in ("pca_features", "passthrough_features"):
            if out[key] is not None:
                out[key] = list(out[key])
        return out
