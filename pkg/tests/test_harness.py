import json
import os
from collections import namedtuple

import pytest

from toric_lab.harness import (
    Cache,
    CacheMissError,
    ConfigError,
    LMFDBClient,
    LMFDBError,
    cached_central_values,
    load_config,
    parse_config,
    resolve_form,
    run,
    write_csv,
)
from toric_lab.lfunctions import builtin_form
from toric_lab.numtheory import primes_up_to

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


# ------------------------------------------------------------------ config

def test_parse_minimal():
    cfg = parse_config("[experiment]\nkind = gauss\n[range]\nd_min = 5\nd_max = 50\n")
    assert cfg.kind == "gauss" and (cfg.d_min, cfg.d_max) == (5, 50)
    assert cfg.threads == 1 and cfg.prime_sum == 3.0


@pytest.mark.parametrize("text,line,fragment", [
    ("[experiment]\nkind = gauss\n[bogus]\n", 3, "unknown section"),
    ("[experiment]\nkind = gauss\nflavour = x\n", 3, "unknown key"),
    ("[experiment]\nkind = gauss\n[range]\nd_min = 5\nd_min = 6\n", 5, "duplicate"),
    ("[experiment]\nkind = gauss\n[range]\nd_min = five\n", 4, "bad value"),
    ("kind = gauss\n", 1, "outside any section"),
    ("[experiment]\nkind gauss\n", 2, "expected key = value"),
    ("# comment\n[experiment]\nkind = astrology\n", 3, "unknown experiment kind"),
])
def test_config_errors_name_the_line(text, line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, origin="t.cfg")
    msg = str(exc.value)
    assert f"t.cfg, line {line}" in msg and fragment in msg


def test_missing_kind():
    with pytest.raises(ConfigError, match="kind is required"):
        parse_config("[range]\nd_min = 5\n")


@pytest.mark.parametrize("name", ["gauss", "moments", "joint", "combinatorics", "lvalues",
                                  "waldspurger"])
def test_shipped_configs_parse(name):
    cfg = load_config(os.path.join(CONFIGS, f"{name}.cfg"))
    assert cfg.kind


# ------------------------------------------------------------------- cache

Rec = namedtuple("Rec", "a b c d")


def test_cache_roundtrip_bit_exact(tmp_path):
    cache = Cache(tmp_path)
    inputs = {"kind": "t", "x": 1}
    rec = Rec(0.1 + 0.2, 1e-300 / 3, (2.5, 7, "s"), None)
    cache.put(inputs, rec)
    got = cache.get(inputs, Rec)
    assert got == rec
    assert got.a.hex() == rec.a.hex() and got.b.hex() == rec.b.hex()
    assert cache.hits == 1


def test_cache_miss_and_key_sensitivity(tmp_path):
    cache = Cache(tmp_path)
    a = {"kind": "central_value", "tolerance": 1e-6}
    b = {"kind": "central_value", "tolerance": 1e-7}
    assert Cache.key(a) != Cache.key(b)
    assert Cache.key(a) == Cache.key(dict(reversed(list(a.items()))))
    cache.put(a, Rec(1.0, 2.0, 3.0, 4.0))
    assert cache.get(b, Rec) is None and cache.misses == 1


def test_cache_detects_tampering(tmp_path):
    cache = Cache(tmp_path)
    inputs = {"k": 1}
    key = cache.put(inputs, Rec(1.0, 2.0, 3.0, 4.0))
    path = os.path.join(tmp_path, key[:2], key + ".json")
    with open(path) as fh:
        payload = json.load(fh)
    payload["fields"]["a"] = {"f": "1.5"}
    with open(path, "w") as fh:
        json.dump(payload, fh)
    with pytest.raises(ValueError, match="disagree"):
        cache.get(inputs, Rec)
    Other = namedtuple("Other", "a b c d")
    with pytest.raises(ValueError):
        Cache(tmp_path).get({"k": 1}, Other)


def test_cached_central_values_reuse(tmp_path):
    cache = Cache(tmp_path)
    f = builtin_form("11a")
    first = cached_central_values(cache, f, 23)
    assert cache.misses >= 1
    again = cached_central_values(cache, f, 23)
    assert again == first and cache.hits == len(first)
    other_tol = cached_central_values(cache, f, 23, tol=1e-8)
    assert [r.value for r in other_tol] == [r.value for r in first]


# ------------------------------------------------------------------- LMFDB

def fake_lmfdb(label="11.2.a.a", traces=None):
    f = builtin_form("11a")
    traces = traces or [int(f._an[n]) for n in range(1, 200)]
    calls = []

    def transport(url):
        calls.append(url)
        if "bogus" in url:
            return json.dumps({"data": []}).encode()
        return json.dumps({"data": [{"label": label, "level": 11, "weight": 2, "dim": 1,
                                     "traces": traces}]}).encode()

    return transport, calls


def test_lmfdb_fetch_and_cache(tmp_path):
    transport, calls = fake_lmfdb()
    client = LMFDBClient(Cache(tmp_path), transport=transport)
    text = client.fetch("11.2.a.a", 150)
    assert client.requests == 1 and len(calls) == 1
    form = resolve_form("lmfdb:11.2.a.a:150", client=client)
    assert client.requests == 1
    ref = builtin_form("11a")
    assert all(form.lam_prime(p) == ref.lam_prime(p) for p in primes_up_to(150))
    assert text.startswith("# label 11.2.a.a weight 2 level 11")
    # a second client on the same cache never touches the transport
    offline = LMFDBClient(Cache(tmp_path), offline=True, transport=transport)
    assert offline.fetch("11.2.a.a", 150) == text and offline.requests == 0


def test_lmfdb_zero_offset_traces(tmp_path):
    f = builtin_form("11a")
    transport, _ = fake_lmfdb(traces=[0] + [int(f._an[n]) for n in range(1, 100)])
    text = LMFDBClient(Cache(tmp_path), transport=transport).fetch("11.2.a.a", 97)
    assert "\n2\t-2\n" in text


def test_lmfdb_errors(tmp_path):
    transport, _ = fake_lmfdb()
    client = LMFDBClient(Cache(tmp_path), transport=transport)
    with pytest.raises(LMFDBError, match="not found"):
        client.fetch("11.2.a.bogus", 50)
    with pytest.raises(LMFDBError, match="malformed"):
        client.fetch("11-2-a-a", 50)
    with pytest.raises(LMFDBError, match="exceeds"):
        client.fetch("11.2.a.a", 10000)
    with pytest.raises(CacheMissError, match="offline"):
        LMFDBClient(Cache(tmp_path / "cold"), offline=True, transport=transport).fetch(
            "11.2.a.a", 50)


def test_lmfdb_retries(tmp_path):
    def down(url):
        raise OSError("unreachable")

    client = LMFDBClient(Cache(tmp_path), transport=down, retries=3, backoff=0.0)
    with pytest.raises(LMFDBError, match="3 attempts"):
        client.fetch("11.2.a.a", 50)
    assert client.requests == 3


def test_resolve_form_file(tmp_path):
    from toric_lab.lfunctions import write_eigenvalue_file

    path = tmp_path / "e.txt"
    write_eigenvalue_file(builtin_form("5.4.a.a"), path, bound=300)
    assert resolve_form(f"file:{path}").level == 5
    with pytest.raises(KeyError):
        resolve_form("not.a.form.x")


# ------------------------------------------------------------------ running

def test_write_csv_hash(tmp_path):
    h1 = write_csv(tmp_path / "a.csv", ("x", "y"), [(1, 0.1), (2, 1 / 3)])
    h2 = write_csv(tmp_path / "b.csv", ("x", "y"), [(1, 0.1), (2, 1 / 3)])
    assert h1 == h2
    assert (tmp_path / "a.csv").read_text() == "x,y\n1,0.1\n2,0.3333333333333333\n"


def test_run_gauss(tmp_path):
    cfg = parse_config("[experiment]\nkind = gauss\n[range]\nd_min = 5\nd_max = 120\n")
    res = run(cfg, out=tmp_path / "o", cache_dir=tmp_path / "c")
    assert res.status == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["hard_checks"]["gauss_formula"]["ok"]
    assert man["outputs"]["gauss.csv"] == res.outputs["gauss.csv"]


def test_run_class_sets(tmp_path):
    cfg = parse_config("[experiment]\nkind = class_sets\n[range]\nprimes = 2, 11\n")
    res = run(cfg, out=tmp_path, cache_dir=tmp_path / "c")
    rows = (tmp_path / "class_sets.csv").read_text().splitlines()
    assert res.status == 0 and rows[2].startswith("11,2,")
