from pathlib import Path

import pytest

from lab_config import LabConfig, load_config
from lab_errors import EXIT_CONFIG, ConfigError

SHIPPED = Path(__file__).parent.parent / "config.yaml"


def write(tmp_path, text, name="config.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_empty_file_gives_defaults(tmp_path):
    config = load_config(write(tmp_path, ""))
    assert config == LabConfig()
    assert config.contract.hbar_tilde == 0.2
    assert config.ladder.h_values == (0.01, 0.001, 0.0001)


def test_shipped_file_matches_defaults():
    assert load_config(str(SHIPPED)) == LabConfig()


def test_unknown_key_names_its_path(tmp_path):
    with pytest.raises(ConfigError) as e:
        load_config(write(tmp_path, "contract:\n  hbar_tildee: 0.2\n"))
    assert e.value.field_path == "contract.hbar_tildee"
    assert e.value.exit_code == EXIT_CONFIG


def test_type_errors(tmp_path):
    with pytest.raises(ConfigError) as e:
        load_config(write(tmp_path, "ladder:\n  m_exponent: 2.5\n"))
    assert e.value.field_path == "ladder.m_exponent"
    with pytest.raises(ConfigError) as e:
        load_config(write(tmp_path, "contract:\n  h_values: [0.01, yes]\n"))
    assert e.value.field_path == "contract.h_values[1]"


def test_grid_size_must_be_power_of_two(tmp_path):
    with pytest.raises(ConfigError) as e:
        load_config(write(tmp_path, "contract:\n  N: 1000\n"))
    assert e.value.field_path == "contract.N"


def test_h_must_not_exceed_hbar_tilde(tmp_path):
    with pytest.raises(ConfigError) as e:
        load_config(write(tmp_path, "contract:\n  hbar_tilde: 0.1\n  h_values: [0.05, 0.2]\n"))
    assert e.value.field_path == "contract.h_values[1]"


def test_ladder_certifies_every_entry_by_default(tmp_path):
    assert load_config(write(tmp_path, "")).ladder.certify_count is None
    with pytest.raises(ConfigError) as e:
        load_config(write(tmp_path, "ladder:\n  certify_count: -1\n"))
    assert e.value.field_path == "ladder.certify_count"


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.yaml")


def test_overrides_apply_to_top_level(tmp_path):
    config = load_config(write(tmp_path, "seed: 5\n"), {"seed": 7, "format": "json", "jobs": None})
    assert config.seed == 7
    assert config.format == "json"
    assert config.jobs == 1


def test_bad_override_is_refused(tmp_path):
    with pytest.raises(ConfigError) as e:
        load_config(write(tmp_path, ""), {"format": "xml"})
    assert e.value.field_path == "format"


def test_json_document_is_accepted(tmp_path):
    config = load_config(write(tmp_path, '{"ladder": {"certify_count": 3}}', name="config.json"))
    assert config.ladder.certify_count == 3


def test_digest_tracks_content(tmp_path):
    a = load_config(write(tmp_path, ""))
    b = load_config(write(tmp_path, "positivity:\n  samples: 10\n"))
    assert a.digest() == LabConfig().digest()
    assert a.digest() != b.digest()
