import pytest

from chainads.config import ChainConfig, ConfigError


def test_meta_round_trip():
    config = ChainConfig(
        construction="acc1", salt=b"\x00chain", widths=(8, 12), offsets=(-74.5, 40.25), scales=(100.0, 0.5),
        index_mode="intra", block_policy="interval:60"
    )
    restored = ChainConfig.from_meta(config.to_meta())

    assert restored == config
    assert restored.domain == config.domain
    assert restored.parsed_block_policy() == ("interval", 60)


def test_defaults():
    config = ChainConfig().validate()

    assert config.offsets == (0.0, 0.0) and config.scales == (1.0, 1.0)
    assert config.uses_intra_index and config.uses_skip_list
    assert ChainConfig(index_mode="intra").effective_skip_list_length == 0


def test_meta_comments_and_blank_lines():
    config = ChainConfig.from_meta("# test chain\n\nconstruction = acc2\nwidths=4,4\n")
    assert config.widths == (4, 4)


@pytest.mark.parametrize("text", [
    "color=blue\n",
    "construction\n",
    "capacity=many\n",
    "widths=4,x\n",
    "salt=zz\n",
])
def test_meta_errors(text):
    with pytest.raises(ConfigError):
        ChainConfig.from_meta(text)


@pytest.mark.parametrize("overrides", [
    dict(construction="acc3"),
    dict(capacity=1),
    dict(index_mode="merkle"),
    dict(widths=(0, 4)),
    dict(widths=(4, 4), offsets=(0.0,)),
    dict(widths=(4,), scales=(0.0,)),
    dict(skip_list_length=17),
    dict(difficulty=33),
    dict(ip_max_depth=-1),
    dict(lazy_flush_threshold=0),
    dict(workers=0),
    dict(block_policy="count:0"),
    dict(block_policy="every:3"),
])
def test_validate(overrides):
    with pytest.raises(ConfigError):
        ChainConfig(**overrides).validate()
