import pytest

from relzk import __version__
from relzk.errors import ConfigurationError
from relzk.manifest import MANIFEST_PREFIX, RunManifest, parse_manifest, read_manifest


def _manifest():
    return RunManifest(
        "run",
        7,
        params={"k": 2, "rounds": None, "strict": True},
        inputs={"graph": "demo.col", "config": None},
        outputs={"out": "t.tsv"},
    )


def test_header_is_one_sorted_json_line():
    header = _manifest().to_header()
    assert len(header) == 1
    assert header[0].startswith(MANIFEST_PREFIX + '{"inputs":')
    assert f'"version":"{__version__}"' in header[0]


def test_argv_skips_unset_values():
    assert _manifest().to_argv() == ["run", "--graph", "demo.col", "--k", "2", "--out", "t.tsv", "--seed", "7", "--strict"]


def test_parse_stops_at_first_data_line():
    header = _manifest().to_header()
    assert parse_manifest(["# note"] + header) == _manifest()
    assert parse_manifest(["p edge 2 1"] + header) is None


def test_unreadable_manifest():
    with pytest.raises(ConfigurationError):
        parse_manifest([MANIFEST_PREFIX + "{broken"])
    with pytest.raises(ConfigurationError):
        parse_manifest([MANIFEST_PREFIX + '{"colour": 1}'])


def test_read_manifest(tmp_path, caplog):
    path = tmp_path / "artefact.tsv"
    old = RunManifest("gen", 1, params={"vertices": 5}, version="0.0.1")
    path.write_text("\n".join(old.to_header()) + "\np edge 1 0\n")
    assert read_manifest(path).params == {"vertices": 5}
    assert "0.0.1" in caplog.text

    bare = tmp_path / "bare.col"
    bare.write_text("p edge 1 0\n")
    with pytest.raises(ConfigurationError, match="no run manifest"):
        read_manifest(bare)
