"""Run configuration: a flat key=value text format (a TOML subset).

Lines are ``key = value`` with ``#`` comments; values are ints, floats
(`inf` allowed), booleans, or strings (quoted or bare). Unknown keys are
rejected so typos fail loudly instead of silently running defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, asdict
import math
from pathlib import Path

from .exceptions import ParameterError
from .dtm import DtmConfig
from .augment import AugPolicy
from .metrics import MetricDirections


def parse_config_text(text: str) -> dict:
    """Parse flat key=value text into a {key: value} mapping."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ParameterError(f"config line {lineno}: empty key or value in {raw!r}")
        if key in out:
            raise ParameterError(f"config line {lineno}: duplicate key {key!r}")
        # strip an inline comment unless the value is quoted
        if not (value.startswith('"') or value.startswith("'")):
            value = value.split("#", 1)[0].strip()
        out[key] = _parse_scalar(value, lineno)
    return out


def _parse_scalar(value: str, lineno: int):
    if value[0] in ("'", '"'):
        quote = value[0]
        end = value.find(quote, 1)
        if end < 0:
            raise ParameterError(f"config line {lineno}: unterminated string {value!r}")
        rest = value[end + 1 :].strip()
        if rest and not rest.startswith("#"):
            raise ParameterError(f"config line {lineno}: trailing text after string: {rest!r}")
        return value[1:end]
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)  # handles inf / -inf / nan spellings too
    except ValueError:
        pass
    return value  # bare string


# keys of RunConfig that configure nested objects
_DTM_KEYS = {
    "tau",
    "n_starts",
    "max_iters",
    "dtm_tol",
    "f1_lo",
    "f1_hi",
    "f2_lo",
    "f2_hi",
}
_AUG_KEYS = {"proportion", "domain", "placement", "w_t", "w_f"}
_DIR_KEYS = {"dir_rmse", "dir_pcc", "dir_heartbeat_error", "dir_mdr"}


@dataclass
class RunConfig:
    """Everything one batch-pipeline run needs, with canonical defaults."""

    out_dir: str = "run_out"
    input_dir: str | None = None  # None -> synthesize the dataset
    n_segments: int = 4095  # 91 trials x 45 four-second segments
    fs: float = 200.0
    duration: float = 4.0
    snr_db: float = math.inf
    seed: int = 0
    # time-frequency analysis
    win_len: int = 64
    hop: int = 4
    nfft: int = 256
    freq_max: float = 50.0
    # decomposition kernels
    kernel_time: int = 17
    kernel_freq: int = 17
    # template matching
    tau: float = 0.5
    n_starts: int = 24
    max_iters: int = 200
    dtm_tol: float = 1e-12
    f1_lo: float = 5.0
    f1_hi: float = 18.0
    f2_lo: float = 15.0
    f2_hi: float = 30.0
    # augmentation
    proportion: float = 0.2
    domain: str = "both"
    placement: str = "dtm"
    w_t: int = 24
    w_f: int = 12
    # metric directions
    dir_rmse: str = "lower"
    dir_pcc: str = "higher"
    dir_heartbeat_error: str = "lower"
    dir_mdr: str = "lower"
    # dataset split
    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1
    workers: int = 1

    def __post_init__(self):
        if not (isinstance(self.n_segments, int) and self.n_segments >= 1):
            raise ParameterError(f"n_segments must be an int >= 1, got {self.n_segments}")
        if not (self.fs > 0 and self.duration > 0):
            raise ParameterError("fs and duration must be > 0")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            raise ParameterError(f"workers must be an int >= 1, got {self.workers}")
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f < 0 for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
            raise ParameterError(f"split fractions must be >= 0 and sum to 1, got {fracs}")
        for name in ("kernel_time", "kernel_freq"):
            k = getattr(self, name)
            if not (isinstance(k, int) and k >= 1 and k % 2 == 1):
                raise ParameterError(f"{name} must be an odd int >= 1, got {k}")
        if not (0 < self.hop <= self.win_len <= self.nfft):
            raise ParameterError("need 0 < hop <= win_len <= nfft")
        # construct eagerly so bad values fail at load time
        self.dtm_config()
        self.aug_policy()
        self.directions()

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ParameterError(f"unknown config keys: {', '.join(unknown)}")
        coerced = dict(mapping)
        for f in fields(cls):
            if f.name in coerced and f.type in ("int",) and isinstance(coerced[f.name], float):
                if coerced[f.name] != int(coerced[f.name]):
                    raise ParameterError(f"{f.name} must be an integer, got {coerced[f.name]}")
                coerced[f.name] = int(coerced[f.name])
        return cls(**coerced)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        p = Path(path)
        if not p.exists():
            raise ParameterError(f"config file not found: {p}")
        return cls.from_mapping(parse_config_text(p.read_text()))

    def to_mapping(self) -> dict:
        return asdict(self)

    def dtm_config(self) -> DtmConfig:
        return DtmConfig(
            tau=self.tau,
            f1_bounds=(self.f1_lo, self.f1_hi),
            f2_bounds=(self.f2_lo, self.f2_hi),
            n_starts=self.n_starts,
            max_iters=self.max_iters,
            tol=self.dtm_tol,
        )

    def aug_policy(self, seed: int | None = None) -> AugPolicy:
        return AugPolicy(
            proportion=self.proportion,
            domain=self.domain,
            placement=self.placement,
            seed=self.seed if seed is None else seed,
            w_t=self.w_t,
            w_f=self.w_f,
        )

    def directions(self) -> MetricDirections:
        return MetricDirections(
            rmse=self.dir_rmse,
            pcc=self.dir_pcc,
            heartbeat_error=self.dir_heartbeat_error,
            mdr=self.dir_mdr,
        )
