import dataclasses
import json
from dataclasses import dataclass, field

from .errors import InvalidConfig


@dataclass(frozen=True)
class ClusterConfig:
    n_pes: int = 8
    iram_bytes: int = 4096  # per IRAM; one IRAM per PE pair
    cram_bytes: int = 32768
    n_banks: int = 4
    cluster_x: int = 0
    cluster_y: int = 0

    @property
    def n_irams(self):
        return self.n_pes // 2

    @property
    def cram_blocks(self):
        return self.cram_bytes // 32

    def validate(self):
        if self.n_pes < 2 or self.n_pes % 2:
            raise InvalidConfig(f"n_pes must be even and >= 2 (got {self.n_pes})")
        if self.n_banks < 1 or self.n_banks & (self.n_banks - 1):
            raise InvalidConfig(f"n_banks must be a power of two (got {self.n_banks})")
        if self.cram_bytes <= 0 or self.cram_bytes % (4 * self.n_banks) or self.cram_bytes % 32:
            raise InvalidConfig("cram_bytes must be divisible by n_banks words and by 32")
        if self.cram_bytes > 32768:
            raise InvalidConfig("cram_bytes must be <= 32768 (10-bit block index)")
        if self.iram_bytes <= 0 or self.iram_bytes % 32 or self.iram_bytes > 0x10000:
            raise InvalidConfig("iram_bytes must be a positive multiple of 32 and <= 65536")
        return self


@dataclass(frozen=True)
class SystemConfig:
    rows: int = 10
    cols: int = 5
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    stages: int = 2
    has_mul: bool = False
    fclk_hz: float = 250e6
    max_cycles: int = 10_000_000

    @property
    def n_clusters(self):
        return self.rows * self.cols

    @property
    def n_pes(self):
        return self.n_clusters * self.cluster.n_pes

    def validate(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidConfig(f"rows and cols must be >= 1 (got rows={self.rows}, cols={self.cols})")
        if self.rows > 256 or self.cols > 256:
            raise InvalidConfig("rows and cols must be <= 256 (8-bit coordinates)")
        if self.stages not in (2, 3):
            raise InvalidConfig(f"stages must be 2 or 3 (got {self.stages})")
        if not self.fclk_hz > 0:
            raise InvalidConfig(f"fclk_hz must be > 0 (got {self.fclk_hz})")
        if self.max_cycles < 1:
            raise InvalidConfig("max_cycles must be >= 1")
        self.cluster.validate()
        return self

    def to_dict(self):
        return dataclasses.asdict(self)


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise InvalidConfig(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise InvalidConfig(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = dict(data)
    if cls is SystemConfig and "cluster" in kwargs:
        kwargs["cluster"] = _build(ClusterConfig, kwargs["cluster"], "cluster")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise InvalidConfig(f"{where}: {e}") from None


def config_from_dict(data):
    return _build(SystemConfig, data, "config").validate()


def load_config(path):
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise InvalidConfig(f"{path}: invalid JSON ({e})") from None
    return config_from_dict(data)
