import pytest

from wsnauth.errors import ParamError
from wsnauth.params import DEFAULT_PARAMS, SysParams, load_params, parse_kv


def test_defaults():
    p = DEFAULT_PARAMS
    assert (p.curve_id, p.kappa, p.ell, p.id_len, p.ts_window) == ("P-256", 256, 256, 16, 60)
    assert p.omega == 8 * (16 + 2 * 16)


def test_text_roundtrip(tmp_path):
    p = SysParams(id_len=12, ts_window=30, ell=128)
    path = tmp_path / "params"
    path.write_text(p.to_text())
    assert load_params(path) == p


def test_partial_file_uses_defaults():
    assert SysParams.from_text("ts_window = 5\n# comment\n\n") == SysParams(ts_window=5)


@pytest.mark.parametrize("text", [
    "curve_id = P-384",
    "kappa = 250",
    "ell = 512",
    "id_len = 0",
    "ts_window = soon",
    "no equals sign",
    "kappa = 256\nkappa = 128",
])
def test_bad_files(text):
    with pytest.raises(ParamError):
        SysParams.from_text(text)


def test_parse_kv_strips():
    assert parse_kv("  a =  b  # c\n") == {"a": "b"}


def test_digest_depends_on_params():
    assert SysParams().digest() != SysParams(ts_window=61).digest()
