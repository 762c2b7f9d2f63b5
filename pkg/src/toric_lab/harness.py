"""Configuration, caching, eigenvalue ingestion and experiment runners."""

import csv
import hashlib
import io
import json
import os
import struct
import tempfile
import time
import urllib.error
import urllib.parse
import urllib.request
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import log, sqrt

import numpy as np

from . import __version__

__all__ = [
    "ConfigError",
    "CacheMissError",
    "LMFDBError",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "Cache",
    "LMFDBClient",
    "resolve_form",
    "cached_central_values",
    "cached_l_values",
    "run",
    "RunResult",
    "write_csv",
]


class ConfigError(ValueError):
    pass


class CacheMissError(LookupError):
    pass


class LMFDBError(RuntimeError):
    pass


# ------------------------------------------------------------------ config

def _bool(text):
    t = text.lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _intlist(text):
    text = text.strip()
    if not text:
        return ()
    return tuple(int(t) for t in text.replace(" ", "").split(","))


_SCHEMA = {
    "experiment": {"kind": str, "name": str},
    "range": {"d_min": int, "d_max": int, "step": int, "values": _intlist,
              "squarefree": _bool, "admissible": _bool, "fundamental": _bool,
              "inert_at": _intlist, "odd": _bool, "torsion_filter": _bool,
              "primes": _intlist},
    "forms": {"form1": str, "form2": str},
    "params": {"alpha": int, "beta": int, "c0": float, "eps": float, "l_max": int,
               "seed": int, "draws": int, "k_max": int, "x_max": int, "d_cap": int,
               "p": int, "observable": _intlist, "x2": float, "max_exp": int},
    "tolerances": {"plancherel": float, "orthogonality": float, "clamp": float,
                   "afe_gap": float, "root_number": float, "prime_sum": float},
    "output": {"out": str, "cache": str, "offline": _bool, "threads": int},
}

KINDS = ("gauss", "lvalues", "fractional_moments", "joint", "waldspurger",
         "combinatorics", "class_sets")


@dataclass
class ExperimentConfig:
    kind: str
    name: str = ""
    d_min: int = 0
    d_max: int = 0
    step: int = 1
    values: tuple = ()
    squarefree: bool = True
    admissible: bool = True
    fundamental: bool = False
    inert_at: tuple = ()
    odd: bool = False
    torsion_filter: bool = False
    primes: tuple = ()
    form1: str = "11.2.a.a"
    form2: str = "5.4.a.a"
    alpha: int = 1
    beta: int = 1
    c0: float = 1.0
    eps: float = 0.0
    l_max: int = 6
    seed: int = 0
    draws: int = 100
    k_max: int = 4
    x_max: int = 100
    d_cap: int = 60000
    p: int = 11
    observable: tuple = ()
    x2: float = 1.25
    max_exp: int = 3
    plancherel: float = 1e-10
    orthogonality: float = 1e-9
    clamp: float = 1e-6
    afe_gap: float = 1e-6
    root_number: float = 1e-3
    prime_sum: float = 3.0
    out: str = "out"
    cache: str = ".toric-cache"
    offline: bool = False
    threads: int = 1
    source: dict = field(default_factory=dict, repr=False)

    def resolved(self):
        """Every setting as a plain dict, for the manifest."""
        out = {}
        for name in self.__dataclass_fields__:
            if name == "source":
                continue
            v = getattr(self, name)
            out[name] = list(v) if isinstance(v, tuple) else v
        return out


def parse_config(text, origin="<config>"):
    """Strict key = value parser with [section] headers.

    Blank lines and lines starting with '#' or ';' are ignored.  Unknown
    sections, unknown keys, duplicates and malformed values are errors that
    name the offending line.
    """
    section = None
    values = {}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        where = f"{origin}, line {lineno}"
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{where}: malformed section header {line!r}")
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"{where}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected key = value, got {line!r}")
        if section is None:
            raise ConfigError(f"{where}: key outside any section")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        conv = _SCHEMA[section].get(key)
        if conv is None:
            raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")
        if key in seen:
            raise ConfigError(f"{where}: duplicate key {key!r} (first at line {seen[key]})")
        try:
            values[key] = conv(val)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
        seen[key] = lineno
    if "kind" not in values:
        raise ConfigError(f"{origin}: [experiment] kind is required")
    if values["kind"] not in KINDS:
        raise ConfigError(f"{origin}, line {seen['kind']}: unknown experiment kind "
                          f"{values['kind']!r}")
    cfg = ExperimentConfig(**values)
    cfg.source = dict(values)
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), origin=str(path))


# ------------------------------------------------------------------- cache

def _encode(v):
    if isinstance(v, (bool, np.bool_)):
        return {"b": bool(v)}
    if isinstance(v, (int, np.integer)):
        return {"i": int(v)}
    if isinstance(v, (float, np.floating)):
        return {"f": repr(float(v))}
    if isinstance(v, str):
        return {"s": v}
    if v is None:
        return {"n": None}
    if isinstance(v, (tuple, list)):
        return {"t": [_encode(x) for x in v]}
    raise TypeError(f"cannot cache value of type {type(v).__name__}")


def _decode(obj, floats):
    (tag, val), = obj.items()
    if tag == "f":
        x = floats.pop(0)
        if struct.pack("<d", float(val)) != struct.pack("<d", x):
            raise ValueError("decimal and binary payloads disagree")
        return x
    if tag == "t":
        return tuple(_decode(o, floats) for o in val)
    return val


def _floats_of(obj, out):
    (tag, val), = obj.items()
    if tag == "f":
        out.append(float(val))
    elif tag == "t":
        for o in val:
            _floats_of(o, out)
    return out


def _atomic_write(path, data):
    d = os.path.dirname(path)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Cache:
    """Content-addressed store of namedtuple records.

    Each entry is a JSON file (inputs echo, record type, decimal fields) and
    a binary sidecar holding the same floats as little-endian doubles; loads
    check both agree and that the stored inputs equal the requested ones.
    """

    def __init__(self, root, offline=False):
        self.root = str(root)
        self.offline = offline
        os.makedirs(self.root, exist_ok=True)
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(inputs):
        blob = json.dumps(inputs, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def _paths(self, key):
        sub = os.path.join(self.root, key[:2])
        os.makedirs(sub, exist_ok=True)
        return os.path.join(sub, key + ".json"), os.path.join(sub, key + ".bin")

    def put(self, inputs, record):
        key = self.key(inputs)
        jpath, bpath = self._paths(key)
        fields = {name: _encode(getattr(record, name)) for name in record._fields}
        floats = []
        for name in record._fields:
            _floats_of(fields[name], floats)
        payload = {"inputs": inputs, "type": type(record).__name__,
                   "fields": fields, "created": time.time()}
        _atomic_write(bpath, struct.pack(f"<{len(floats)}d", *floats))
        _atomic_write(jpath, json.dumps(payload, sort_keys=True, indent=1).encode())
        return key

    def get(self, inputs, cls):
        key = self.key(inputs)
        jpath, bpath = self._paths(key)
        if not (os.path.exists(jpath) and os.path.exists(bpath)):
            self.misses += 1
            return None
        with open(jpath, "rb") as fh:
            payload = json.loads(fh.read())
        if payload["inputs"] != inputs:
            raise ValueError(f"cache key collision at {key}")
        if payload["type"] != cls.__name__:
            raise ValueError(f"cache entry {key} holds {payload['type']}, not {cls.__name__}")
        with open(bpath, "rb") as fh:
            raw = fh.read()
        floats = list(struct.unpack(f"<{len(raw) // 8}d", raw))
        vals = [_decode(payload["fields"][name], floats) for name in cls._fields]
        self.hits += 1
        return cls(*vals)

    def get_text(self, inputs):
        key = self.key(inputs)
        path = os.path.join(self.root, key[:2], key + ".txt")
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                return fh.read()
        return None

    def put_text(self, inputs, text):
        key = self.key(inputs)
        sub = os.path.join(self.root, key[:2])
        os.makedirs(sub, exist_ok=True)
        _atomic_write(os.path.join(sub, key + ".txt"), text.encode("utf-8"))


# ------------------------------------------------------------------- LMFDB

_LABEL_CHARS = set("0123456789abcdefghijklmnopqrstuvwxyz.")


class LMFDBClient:
    """Fetch newform coefficients from the public LMFDB API into the cache.

    transport(url) -> bytes may be replaced for testing; requests counts
    every network attempt.
    """

    BASE = "https://www.lmfdb.org/api/mf_newforms/"

    def __init__(self, cache, offline=False, transport=None, retries=3, backoff=0.5):
        self.cache = cache
        self.offline = offline
        self.transport = transport or self._urlopen
        self.retries = retries
        self.backoff = backoff
        self.requests = 0

    @staticmethod
    def _urlopen(url):
        with urllib.request.urlopen(url, timeout=30) as resp:
            return resp.read()

    @staticmethod
    def check_label(label):
        parts = label.split(".")
        if (len(parts) != 4 or not parts[0].isdigit() or not parts[1].isdigit()
                or not parts[2].isalpha() or not parts[3].isalpha()
                or not set(label) <= _LABEL_CHARS):
            raise LMFDBError(f"malformed newform label {label!r}")

    def _get(self, url):
        last = None
        for attempt in range(self.retries):
            self.requests += 1
            try:
                return self.transport(url)
            except (urllib.error.URLError, OSError) as exc:
                last = exc
                time.sleep(self.backoff * 2 ** attempt)
        raise LMFDBError(f"HTTP failure after {self.retries} attempts: {last}")

    def _parse(self, label, body, bound):
        try:
            doc = json.loads(body)
        except json.JSONDecodeError as exc:
            raise LMFDBError(f"response is not JSON: {exc}") from None
        if not isinstance(doc, dict) or "data" not in doc or not isinstance(doc["data"], list):
            raise LMFDBError("unexpected response layout: no data list")
        if not doc["data"]:
            raise LMFDBError(f"newform {label!r} not found")
        rec = doc["data"][0]
        for key in ("label", "level", "weight", "dim", "traces"):
            if key not in rec:
                raise LMFDBError(f"response lacks field {key!r}")
        if rec["label"] != label:
            raise LMFDBError(f"asked for {label}, got {rec['label']}")
        if rec["dim"] != 1:
            raise LMFDBError("only rational newforms (dimension 1) are supported")
        tr = rec["traces"]
        if not isinstance(tr, list) or not all(isinstance(t, int) for t in tr):
            raise LMFDBError("traces must be a list of integers")
        # a_1 = 1 pins the indexing convention
        if len(tr) > 1 and tr[0] == 0 and tr[1] == 1:
            offset = 0
        elif tr and tr[0] == 1:
            offset = 1
        else:
            raise LMFDBError("cannot locate a_1 = 1 in traces")
        top = len(tr) - 1 + offset
        if bound > top:
            raise LMFDBError(f"bound {bound} exceeds available coefficients ({top})")
        from .numtheory import primes_up_to

        rows = [f"# label {label} weight {int(rec['weight'])} level {int(rec['level'])}"]
        rows += [f"{p}\t{tr[p - offset]}" for p in primes_up_to(bound)]
        return "\n".join(rows) + "\n"

    def fetch(self, label, bound):
        """Eigenvalue-file text for label with primes up to bound."""
        self.check_label(label)
        inputs = {"kind": "lmfdb", "label": label, "bound": int(bound)}
        text = self.cache.get_text(inputs)
        if text is not None:
            return text
        if self.offline:
            raise CacheMissError(f"cache miss in offline mode for {label} (bound {bound})")
        query = urllib.parse.urlencode({"label": label, "_format": "json",
                                        "_fields": "label,level,weight,dim,traces"})
        body = self._get(f"{self.BASE}?{query}")
        text = self._parse(label, body, int(bound))
        self.cache.put_text(inputs, text)
        return text


def resolve_form(spec, cache=None, offline=False, client=None):
    """A HeckeForm from 'label' (builtin), 'file:PATH' or 'lmfdb:LABEL:BOUND'."""
    from .lfunctions import builtin_form, read_eigenvalue_file

    if spec.startswith("file:"):
        return read_eigenvalue_file(spec[5:])
    if spec.startswith("lmfdb:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"expected lmfdb:LABEL:BOUND, got {spec!r}")
        client = client or LMFDBClient(cache, offline=offline)
        return read_eigenvalue_file(client.fetch(parts[1], int(parts[2])))
    return builtin_form(spec)


# ---------------------------------------------------- cached computations

def cached_central_values(cache, form, D, X2=1.25, tol=1e-6):
    """central_values through the cache, one entry per character."""
    from .lfunctions import CentralValueRecord, central_values
    from .quadratic_core import QuadField, characters, class_group

    field = QuadField(D)
    label = form if isinstance(form, str) else form.label
    chis = characters(class_group(field))

    def inputs(i):
        return {"kind": "central_value", "form": label, "D": int(D), "chi": list(
            chis[i].exponent_vector), "truncation": X2, "tolerance": tol}

    if cache is not None:
        got = [cache.get(inputs(i), CentralValueRecord) for i in range(len(chis))]
        if all(g is not None for g in got):
            return got
    recs = central_values(form, field, X2)
    if cache is not None:
        for i, r in enumerate(recs):
            cache.put(inputs(i), r)
    return recs


def cached_l_values(cache, D, forms):
    from .moment_lab import LValuesAtOne, l_values_at_one
    from .quadratic_core import QuadField

    inputs = {"kind": "l_at_one", "D": int(D), "forms": list(forms)}
    if cache is not None:
        got = cache.get(inputs, LValuesAtOne)
        if got is not None:
            return got
    lv = l_values_at_one(QuadField(D), tuple(forms))
    if cache is not None:
        cache.put(inputs, lv)
    return lv


# ----------------------------------------------------------------- output

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    data = buf.getvalue().encode("utf-8")
    _atomic_write(path, data)
    return hashlib.sha256(data).hexdigest()


RunResult = namedtuple("RunResult", "status outputs manifest")


def _d_values(cfg):
    from .numtheory import fundamental_discriminants, is_squarefree

    if cfg.values:
        return list(cfg.values)
    if cfg.fundamental:
        ds = fundamental_discriminants(cfg.d_min, cfg.d_max)
    else:
        ds = list(range(cfg.d_min, cfg.d_max + 1))
        if cfg.squarefree:
            ds = [d for d in ds if is_squarefree(d)]
        if cfg.admissible:
            ds = [d for d in ds if d % 8 not in (0, 4, 7) and d > 3]
    if cfg.odd:
        ds = [d for d in ds if d % 2]
    if cfg.inert_at:
        from .numtheory import kronecker

        ds = [d for d in ds if all(kronecker(-d, p) == -1 for p in cfg.inert_at)]
    return ds[:: max(cfg.step, 1)]


def _pmap(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _run_gauss(cfg, ctx):
    from .quaternion_orders import gauss_check
    from .ternary_forms import SUM_OF_THREE_SQUARES, representation_table

    ds = _d_values(cfg)
    counts = representation_table(SUM_OF_THREE_SQUARES, max(ds, default=1))[2]
    reps = _pmap(lambda d: gauss_check(d, int(counts[d])), ds, cfg.threads)
    rows, bad = [], 0
    for r in reps:
        expected = 24 if r.d % 8 == 3 else 12
        ok = r.ratio == expected
        bad += not ok
        rows.append((r.d, r.count, r.h, str(r.ratio), expected, int(ok)))
    ctx.csv("gauss.csv", ("d", "count", "h", "ratio", "expected", "ok"), rows)
    ctx.hard("gauss_formula", bad == 0, f"{bad} exceptions over {len(rows)} d")


def _run_class_sets(cfg, ctx):
    from .quaternion_orders import left_ideal_classes

    rows = []
    for p in cfg.primes or (2, 3, 5, 7, 11, 13):
        cs = left_ideal_classes(p)
        rows.append((p, len(cs.ideals), " ".join(map(str, cs.unit_orders)), str(cs.total_mass)))
    ctx.csv("class_sets.csv", ("p", "classes", "unit_orders", "mass"), rows)
    ctx.hard("mass_formula", True, "enumeration terminates only on the exact mass")


def _run_lvalues(cfg, ctx):
    from .lfunctions import chandee_rhs
    from .quadratic_core import QuadField, characters, class_group

    form = resolve_form(cfg.form1, ctx.cache, cfg.offline)
    Ds = _d_values(cfg)

    def one(D):
        recs = cached_central_values(ctx.cache, form, D, cfg.x2, cfg.afe_gap)
        chis = characters(class_group(QuadField(D)))
        x = max(3.0, log(D) ** 2)
        out = []
        for chi, r in zip(chis, recs):
            maj = chandee_rhs(form, chi, x)
            lv = log(r.value) if r.value > 0 else float("-inf")
            out.append((D, r.chi_id, r.value, r.epsilon, r.consistency_gap, maj, int(lv <= maj)))
        return out

    rows = [row for chunk in _pmap(one, Ds, cfg.threads) for row in chunk]
    ctx.csv("lvalues.csv", ("D", "chi", "value", "epsilon", "gap", "majorant", "below"), rows)
    ctx.hard("afe_consistency", all(r[4] < cfg.afe_gap for r in rows),
             f"max gap {max((r[4] for r in rows), default=0.0):.3g}")
    ctx.hard("root_numbers", all(abs(abs(r[3]) - 1) < cfg.root_number for r in rows), "")
    ctx.hard("chandee_majorant", all(r[6] for r in rows), "")

    # prime sums against log L(1, .) at x = (log Q)^3
    from .lfunctions import kind_conductor, l_at_one, prime_sum

    form2 = resolve_form(cfg.form2, ctx.cache, cfg.offline)

    def sums(D):
        F = QuadField(D)
        kinds = (("eta", {"field": F}), ("ad", {"form": form}),
                 ("ad_x_theta", {"field": F, "form": form}),
                 ("rs_pair_x_theta", {"field": F, "form": form, "form2": form2}))
        out = []
        for kind, kw in kinds:
            x = max(3.0, log(kind_conductor(kind, **kw)) ** 3)
            l1 = l_at_one(kind, detail=True, **kw)
            s = prime_sum(kind, x, **kw)
            out.append((D, kind, x, s, l1.value, l1.method, abs(s - log(l1.value))))
        return out

    prows = [row for chunk in _pmap(sums, Ds, cfg.threads) for row in chunk]
    ctx.csv("prime_sums.csv", ("D", "kind", "x", "prime_sum", "L1", "method", "residual"),
            prows)
    worst = max((r[6] for r in prows), default=0.0)
    ctx.hard("prime_sum_residual", worst <= cfg.prime_sum,
             f"max residual {worst:.4f} (bound {cfg.prime_sum})")


def _run_fractional(cfg, ctx):
    from .moment_lab import (FRACTIONAL_COLUMNS, fractional_moment_experiment, loglog_slope,
                             moment_parameters, moment_sample)

    forms = (cfg.form1, cfg.form2)
    if cfg.values:
        Ds = list(cfg.values)
    else:
        Ds = moment_sample(cfg.d_min, cfg.d_max, forms, inert_at=cfg.inert_at or None,
                           odd=cfg.odd)[:: max(cfg.step, 1)]

    def provider(D):
        cv = tuple(cached_central_values(ctx.cache, f, D, cfg.x2, cfg.afe_gap)
                   for f in forms)
        lv = cached_l_values(ctx.cache, D, forms if forms[0] != forms[1] else forms[:1])
        return cv, lv

    recs, skipped = fractional_moment_experiment(
        Ds, forms[0], forms[1], cfg.alpha, cfg.beta, cfg.c0, cfg.eps,
        threads=cfg.threads, clamp_tol=cfg.clamp, provider=provider)
    ctx.csv("fractional_moments.csv", FRACTIONAL_COLUMNS, [r.row() for r in recs])
    ctx.hard("nonnegative", all(r.M >= 0 for r in recs), "")
    ctx.hard("amgm", all(r.M <= r.amgm * (1 + 1e-12) for r in recs), "")
    if len(recs) >= 2:
        slope = loglog_slope([r.D for r in recs], [r.M for r in recs])
        ctx.soft("negative_slope", slope < 0, f"slope {slope:.4f} (asymptotic target -0.25)")
    hits = sum(r.window_hits for r in recs)
    total = sum(r.window_total for r in recs)
    if total:
        ctx.soft("model_window", hits / total >= 0.9, f"{hits}/{total} inside mu +- 3 sigma")
    ctx.info["skipped"] = [list(s) for s in skipped]
    if recs:
        params = {}
        for r in (recs[0], recs[-1]):
            mp = moment_parameters(r.D, forms, l_values=_lv(ctx, r.D, forms))
            params[str(r.D)] = {"x": mp.x, "z": mp.z, "Delta": mp.Delta, "k": mp.k,
                                "V": mp.V, "curlyC": mp.curlyC, "H_E": mp.H_E}
        ctx.info["parameters"] = {"D_range": [recs[0].D, recs[-1].D], "endpoints": params}


def _lv(ctx, D, forms):
    return cached_l_values(ctx.cache, D, forms if forms[0] != forms[1] else forms[:1])


def _run_joint(cfg, ctx):
    from .moment_lab import JOINT_COLUMNS, joint_equidistribution_experiment

    ds = _d_values(cfg)
    res = joint_equidistribution_experiment(ds, range(0, cfg.l_max + 1), cfg.alpha,
                                            cfg.beta, threads=cfg.threads)
    ctx.csv("joint.csv", JOINT_COLUMNS, res.rows)
    ctx.hard("plancherel", res.plancherel_gap < cfg.plancherel, f"max gap {res.plancherel_gap:.3g}")
    ctx.hard("constant_harmonic", all(r[5] == 1.0 for r in res.rows if r[2] == 0), "")
    ctx.hard("weyl_bound", all(abs(r[5]) <= sqrt(2 * r[2] + 1) for r in res.rows), "")
    ctx.soft("weyl_decay", res.pooled_slope < 0, f"pooled slope {res.pooled_slope:.4f}; "
             f"per l {res.slopes}; identically zero l {res.trivial_l}")
    ctx.info["parameters"] = {"d_range": [min(ds), max(ds)] if ds else [], "l_max": cfg.l_max}


def _run_waldspurger(cfg, ctx):
    from .moment_lab import waldspurger_ratio_probe

    Ds = list(cfg.values) or _d_values(cfg)
    rows, summ = waldspurger_ratio_probe(Ds, cfg.form1, cfg.p, cfg.observable or None)
    ctx.csv("waldspurger.csv", ("D", "chi", "period_abs", "l_value", "ratio", "flag"),
            [(r.D, r.chi_index, abs(r.period), r.l_value, r.ratio, r.flag) for r in rows])
    ctx.csv("waldspurger_summary.csv", ("D", "h", "mean", "std", "dispersion", "defined"),
            [tuple(s) for s in summ])
    ctx.info["dispersion_max"] = max((s.dispersion for s in summ if s.defined), default=None)


def _run_combinatorics(cfg, ctx):
    from .moment_lab import (combinatorial_identities, fac_check, inequality_corpus,
                             orthogonality_sweep)
    from .quadratic_core import QuadField

    fails = combinatorial_identities()
    ctx.hard("identities", not any(fails.values()), json.dumps(fails))
    rows = []
    worst = 0.0
    for D in (list(cfg.values) or [23, 47, 71, 84]):
        sw = orthogonality_sweep(QuadField(D), cfg.max_exp, seed=cfg.seed,
                                 check_torsion=cfg.torsion_filter)
        worst = max(worst, sw.max_deviation)
        for c in sw.cases:
            rows.append((D, c.n, c.params[0], str(c.params[1]), c.lhs, c.rhs, c.deviation))
    ctx.csv("orthogonality.csv", ("D", "n", "case", "exponents", "lhs", "rhs", "deviation"), rows)
    ctx.hard("orthogonality", worst < cfg.orthogonality, f"max deviation {worst:.3g}")
    res, skipped = inequality_corpus(cfg.seed, cfg.draws, cfg.k_max, cfg.x_max, cfg.d_cap)
    viol = sum(not r.holds for r in res)
    ctx.csv("inequalities.csv", ("D", "h", "x", "k", "case", "exponents", "lhs", "rhs", "holds"),
            [(r.D, r.h, r.x, r.k, r.params[0], str(r.params[1]), r.lhs, r.rhs, int(r.holds))
             for r in res])
    ctx.hard("moment_inequalities", viol == 0, f"{viol} violations over {len(res)} draws")
    margin = fac_check(50)
    ctx.hard("factorial_bound", margin > 0, f"smallest log margin {margin:.3g}")
    ctx.info["parameters"] = {"k_cap": cfg.k_max, "x_cap": cfg.x_max, "draws": cfg.draws,
                              "seed": cfg.seed, "skipped_cases": len(skipped)}


_RUNNERS = {
    "gauss": _run_gauss,
    "lvalues": _run_lvalues,
    "fractional_moments": _run_fractional,
    "joint": _run_joint,
    "waldspurger": _run_waldspurger,
    "combinatorics": _run_combinatorics,
    "class_sets": _run_class_sets,
}


class _Context:
    def __init__(self, cfg, out_dir, cache):
        self.cfg = cfg
        self.out = out_dir
        self.cache = cache
        self.outputs = {}
        self.hard_checks = {}
        self.soft_checks = {}
        self.info = {}

    def csv(self, name, columns, rows):
        self.outputs[name] = write_csv(os.path.join(self.out, name), columns, rows)

    def hard(self, name, ok, detail):
        self.hard_checks[name] = {"ok": bool(ok), "detail": detail}

    def soft(self, name, ok, detail):
        self.soft_checks[name] = {"status": "pass" if ok else "warn", "detail": detail}


def run(cfg, out=None, cache_dir=None, offline=None, threads=None, seed=None):
    """Execute a configured experiment; returns RunResult(status, outputs, manifest)."""
    if isinstance(cfg, (str, os.PathLike)):
        cfg = load_config(cfg)
    if out is not None:
        cfg.out = str(out)
    if cache_dir is not None:
        cfg.cache = str(cache_dir)
    if offline is not None:
        cfg.offline = offline
    if threads is not None:
        cfg.threads = threads
    if seed is not None:
        cfg.seed = seed
    os.makedirs(cfg.out, exist_ok=True)
    cache = Cache(cfg.cache, offline=cfg.offline)
    ctx = _Context(cfg, cfg.out, cache)
    error = None
    try:
        _RUNNERS[cfg.kind](cfg, ctx)
        ctx.info.setdefault("parameters", {"D_range": [cfg.d_min, cfg.d_max],
                                           "values": list(cfg.values)})
    except Exception as exc:  # reported in the manifest, then re-raised
        error = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        status = 0 if error is None and all(c["ok"] for c in ctx.hard_checks.values()) else 1
        manifest = {
            "tool": "toric-lab",
            "version": __version__,
            "config": cfg.resolved(),
            "hard_checks": ctx.hard_checks,
            "soft_checks": ctx.soft_checks,
            "info": ctx.info,
            "outputs": ctx.outputs,
            "status": status,
            "error": error,
            "prime_sum_bound": cfg.prime_sum,
        }
        data = json.dumps(manifest, indent=1, sort_keys=True, default=str).encode()
        _atomic_write(os.path.join(cfg.out, "manifest.json"), data)
    return RunResult(status, dict(ctx.outputs), manifest)
