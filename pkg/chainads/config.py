from dataclasses import dataclass, fields

from chainads.crypto.accumulator import Construction
from chainads.errors import ChainAdsError
from chainads.transform.condition import Domain


INDEX_MODES = ("nil", "intra", "both")


@dataclass
class ChainConfig:
    """
    Every per chain knob, persisted as human readable key=value lines (`chain.meta`).
    """
    construction: str = "acc2"
    capacity: int = 2 ** 16
    group: str = "bls12-381"
    salt: bytes = b""
    widths: tuple = (32, 32)
    offsets: tuple = None
    scales: tuple = None
    index_mode: str = "both"
    skip_list_length: int = 5
    difficulty: int = 0
    block_policy: str = "count:8"
    ip_max_depth: int = 8
    lazy_flush_threshold: int = 16
    workers: int = 1

    def __post_init__(self):
        self.widths = tuple(self.widths)
        if self.offsets is None:
            self.offsets = tuple(0.0 for _ in self.widths)
        if self.scales is None:
            self.scales = tuple(1.0 for _ in self.widths)
        self.offsets, self.scales = tuple(self.offsets), tuple(self.scales)

    @property
    def construction_kind(self):
        """
        :rtype: Construction
        """
        return Construction.parse(self.construction)

    @property
    def domain(self):
        """
        :rtype: Domain
        """
        return Domain(self.widths, self.offsets, self.scales)

    @property
    def uses_intra_index(self):
        return self.index_mode in ("intra", "both")

    @property
    def uses_skip_list(self):
        return self.index_mode == "both"

    @property
    def effective_skip_list_length(self):
        return self.skip_list_length if self.uses_skip_list else 0

    def parsed_block_policy(self):
        """
        :return: ("count", objects per block) or ("interval", seconds per block)
        :rtype: tuple[str, int]
        """
        kind, _, value = self.block_policy.partition(":")
        if kind not in ("count", "interval") or not value.isdigit() or int(value) < 1:
            raise ConfigError(f"invalid block policy {self.block_policy!r}, expected count:N or interval:SECONDS")

        return kind, int(value)

    def validate(self):
        """
        :return: self
        :raise ConfigError: on the first invalid value
        """
        try:
            self.construction_kind
        except ChainAdsError as e:
            raise ConfigError(str(e)) from e

        if self.capacity < 2:
            raise ConfigError("capacity must be at least 2")
        if self.index_mode not in INDEX_MODES:
            raise ConfigError(f"index mode must be one of {INDEX_MODES}")
        if not self.widths or any(not 1 <= width <= 64 for width in self.widths):
            raise ConfigError("every width must be in [1, 64]")
        if not len(self.widths) == len(self.offsets) == len(self.scales):
            raise ConfigError("offsets and scales must have one entry per dimension")
        if any(scale <= 0 for scale in self.scales):
            raise ConfigError("scales must be positive")
        if not 0 <= self.skip_list_length <= 16:
            raise ConfigError("skip list length must be in [0, 16]")
        if not 0 <= self.difficulty <= 32:
            raise ConfigError("difficulty must be in [0, 32] leading zero bits")
        if self.ip_max_depth < 0:
            raise ConfigError("IP-Tree max depth must not be negative")
        if self.lazy_flush_threshold < 1:
            raise ConfigError("lazy flush threshold must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        self.parsed_block_policy()

        return self

    def to_meta(self):
        """
        :rtype: str
        """
        lines = list()
        for config_field in fields(self):
            lines.append(f"{config_field.name}={_format_value(getattr(self, config_field.name))}")

        return "\n".join(lines) + "\n"

    @classmethod
    def from_meta(cls, text):
        """
        :type text: str
        :rtype: ChainConfig
        """
        known = {config_field.name: config_field for config_field in fields(cls)}
        values = dict()
        for line_number, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue

            key, separator, raw = line.partition("=")
            key = key.strip()
            if not separator:
                raise ConfigError(f"line {line_number}: expected key=value")
            if key not in known:
                raise ConfigError(f"line {line_number}: unknown key {key!r}")

            values[key] = _parse_value(key, raw.strip(), line_number)

        return cls(**values).validate()


_INT_KEYS = {"capacity", "skip_list_length", "difficulty", "ip_max_depth", "lazy_flush_threshold", "workers"}
_FLOAT_TUPLE_KEYS = {"offsets", "scales"}


def _format_value(value):
    if isinstance(value, bytes):
        return value.hex()
    if isinstance(value, tuple):
        return ",".join(repr(item) if isinstance(item, float) else str(item) for item in value)

    return str(value)


def _parse_value(key, raw, line_number):
    try:
        if key == "salt":
            return bytes.fromhex(raw)
        if key == "widths":
            return tuple(int(item) for item in raw.split(","))
        if key in _FLOAT_TUPLE_KEYS:
            return tuple(float(item) for item in raw.split(","))
        if key in _INT_KEYS:
            return int(raw)
    except ValueError as e:
        raise ConfigError(f"line {line_number}: invalid value for {key}: {raw!r}") from e

    return raw


class ConfigError(ChainAdsError):
    pass
