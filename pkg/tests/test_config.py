import math

import pytest

from d2dcran.config import (
    ConfigError,
    SystemConfig,
    config_hash,
    config_lines,
    load_config,
    parse_config,
)


def test_defaults_match_reference_setup(cfg):
    assert cfg.lambda_bs == pytest.approx(10**-5.5)
    assert cfg.lambda_ext == pytest.approx(10**-3.5)
    assert (cfg.p_bs, cfg.p_max, cfg.p_ext, cfg.alpha) == (100.0, 2.5, 2.0, 3.5)
    assert cfg.file_size == 80e3 and cfg.file_size_unit == "bits"
    assert cfg.exponent == pytest.approx(2 / 3.5)
    assert cfg.inner_radius == 1500.0


def test_empty_file_gives_defaults():
    assert parse_config("") == SystemConfig()
    assert parse_config("# only a comment\n\n") == SystemConfig()


@pytest.mark.parametrize("alpha", [2.0, 1.5])
def test_alpha_at_or_below_two_rejected(alpha):
    with pytest.raises(ConfigError, match="alpha"):
        parse_config(f"alpha = {alpha}")


def test_file_size_given_twice_is_a_conflict():
    with pytest.raises(ConfigError, match="twice"):
        parse_config("file_size_bits = 8\nfile_size_bytes = 1\n")


def test_bytes_are_converted_to_bits():
    cfg = parse_config("file_size_bytes = 80000")
    assert cfg.file_size == 640e3
    assert cfg.file_size_unit == "bytes"


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match=r":2: unknown key 'lambda_foo'"):
        parse_config("alpha = 3\nlambda_foo = 1\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("alpha = 3\nalpha = 4\n")


@pytest.mark.parametrize("text", ["alpha 3", "alpha = three", "chp = 1.5", "d_max = 1e-4",
                                  "lambda_dp = -1", "p_max = nan", "e_bracket_uses_chp = maybe"])
def test_bad_values(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_round_trip_through_canonical_lines(tmp_path):
    cfg = SystemConfig(chp=0.3, lambda_dp=2e-4, e_bracket_uses_chp=True, file_size=8 * 1234.5,
                       file_size_unit="bytes")
    path = tmp_path / "c.cfg"
    path.write_text("\n".join(config_lines(cfg)) + "\n")
    back = load_config(path)
    assert back == cfg
    assert config_hash(back) == config_hash(cfg)


def test_hash_changes_with_any_field(cfg):
    assert config_hash(cfg) != config_hash(cfg.replace(chp=0.51))
    assert len(config_hash(cfg)) == 12


def test_direct_construction_validates():
    with pytest.raises(ConfigError):
        SystemConfig(region_radius=0.0)
    assert math.isfinite(SystemConfig(lambda_ext=0.0).lambda_ext)
