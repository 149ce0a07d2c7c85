import pytest

from choroidseg.kvconfig import (ConfigError, format_kv, parse_kv, read_kv,
                                 write_kv)


def test_parse_basic_pairs():
    text = "a.b = 1\npipeline.weight=0.5\n"
    assert parse_kv(text) == {"a.b": "1", "pipeline.weight": "0.5"}


def test_parse_ignores_comments_and_blanks():
    text = "# header\n\nkey = value  # trailing\n   \n"
    assert parse_kv(text) == {"key": "value"}


def test_parse_preserves_order():
    out = parse_kv("z = 1\na = 2\nm = 3\n")
    assert list(out) == ["z", "a", "m"]


def test_value_may_contain_equals():
    assert parse_kv("k = a=b\n") == {"k": "a=b"}


def test_missing_equals_reports_line_number():
    with pytest.raises(ConfigError, match=r"cfg:3"):
        parse_kv("a = 1\nb = 2\nnonsense\n", source="cfg")


def test_bad_key_rejected():
    with pytest.raises(ConfigError, match="key"):
        parse_kv("Bad-Key = 1\n")
    with pytest.raises(ConfigError):
        parse_kv("a..b = 1\n")
    with pytest.raises(ConfigError):
        parse_kv(".a = 1\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_kv("a = 1\na = 2\n")


def test_format_parse_roundtrip():
    pairs = {"geometry.nx": "200", "pipeline.sigma": "1.5", "flag": "true"}
    assert parse_kv(format_kv(pairs)) == pairs


def test_file_roundtrip(tmp_path):
    pairs = {"a.b": "x", "c": "0.25"}
    path = tmp_path / "run.cfg"
    write_kv(path, pairs)
    assert read_kv(path) == pairs


def test_read_reports_filename(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("oops\n")
    with pytest.raises(ConfigError, match="bad.cfg:1"):
        read_kv(path)
