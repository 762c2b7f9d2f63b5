"""toric-lab command line interface."""

import json
import sys

import click

from . import __version__


def _parse_range(text):
    for sep in ("..", "-", ":"):
        if sep in text:
            lo, hi = text.split(sep, 1)
            return int(lo), int(hi)
    raise click.BadParameter(f"expected LO..HI, got {text!r}")


def _ints(text, n=None):
    vals = tuple(int(t) for t in text.replace(" ", "").split(","))
    if n is not None and len(vals) != n:
        raise click.BadParameter(f"expected {n} comma-separated integers, got {text!r}")
    return vals


@click.group()
@click.version_option(__version__, prog_name="toric-lab")
@click.option("--offline", is_flag=True, help="Never touch the network.")
@click.option("--cache", "cache_dir", default=None, help="Cache directory.")
@click.option("--threads", type=int, default=None, help="Worker threads.")
@click.option("--seed", type=int, default=None, help="Seed for randomized corpora.")
@click.option("--out", "out_dir", default=None, help="Output directory.")
@click.pass_context
def main(ctx, offline, cache_dir, threads, seed, out_dir):
    """Class groups, toric orbits and central L-values."""
    ctx.ensure_object(dict)
    ctx.obj.update(offline=offline or None, cache=cache_dir, threads=threads, seed=seed,
                   out=out_dir)


def _run_config(ctx, cfg_path, expect=None):
    from .harness import ConfigError, load_config, run

    try:
        cfg = load_config(cfg_path)
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    if expect and cfg.kind not in expect:
        raise click.ClickException(f"config kind {cfg.kind!r} is not one of {expect}")
    o = ctx.obj
    try:
        res = run(cfg, out=o["out"], cache_dir=o["cache"], offline=o["offline"],
                  threads=o["threads"], seed=o["seed"])
    except Exception as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    for name, chk in res.manifest["hard_checks"].items():
        click.echo(f"[{'ok' if chk['ok'] else 'FAIL'}] {name} {chk['detail']}")
    for name, chk in res.manifest["soft_checks"].items():
        click.echo(f"[{chk['status']}] {name} {chk['detail']}")
    click.echo(f"outputs in {cfg.out}")
    sys.exit(res.status)


@main.command("run")
@click.argument("cfg", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def run_cmd(ctx, cfg):
    """Run the experiment described by CFG."""
    _run_config(ctx, cfg)


@main.command("moments")
@click.argument("cfg", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def moments_cmd(ctx, cfg):
    """Fractional-moment experiment from CFG."""
    _run_config(ctx, cfg, expect=("fractional_moments",))


@main.command("combinatorics-check")
@click.argument("cfg", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def combinatorics_cmd(ctx, cfg):
    """Identities, orthogonality sweeps and moment inequalities from CFG."""
    _run_config(ctx, cfg, expect=("combinatorics",))


@main.command("classgroup")
@click.argument("D", type=int)
def classgroup_cmd(d):
    """Reduced forms, structure and characters count of Cl(-D)."""
    from .quadratic_core import QuadField, class_group

    G = class_group(QuadField(d))
    click.echo(f"D = {d}  h = {G.h}  structure = {[m for _, m in G.cycle_structure]}")
    for i, f in enumerate(G.elements):
        click.echo(f"{i}\t{f.a},{f.b},{f.c}\torder {G.order(i)}")


@main.command("reps")
@click.argument("form")
@click.argument("d", type=int)
def reps_cmd(form, d):
    """Primitive representations of d by FORM (a11,a22,a33,a12,a13,a23)."""
    from .ternary_forms import enumerate_representations, parse_form

    rs = enumerate_representations(parse_form(form), d)
    click.echo(f"{len(rs.points)} primitive representations of {d}")
    for p in rs.points:
        click.echo(",".join(map(str, p)))


@main.command("gauss-check")
@click.argument("range_", metavar="RANGE")
def gauss_cmd(range_):
    """Check |R_d| / h against 24 or 12 on squarefree admissible d in LO..HI."""
    from .numtheory import is_squarefree
    from .quaternion_orders import gauss_check
    from .ternary_forms import SUM_OF_THREE_SQUARES, representation_table

    lo, hi = _parse_range(range_)
    counts = representation_table(SUM_OF_THREE_SQUARES, max(hi, 4))[2]
    bad = 0
    for d in range(max(lo, 4), hi + 1):
        if not is_squarefree(d) or d % 8 in (0, 4, 7):
            continue
        r = gauss_check(d, int(counts[d]))
        expected = 24 if d % 8 == 3 else 12
        ok = r.ratio == expected
        bad += not ok
        click.echo(f"{d}\t{r.count}\t{r.h}\t{r.ratio}\t{'ok' if ok else 'FAIL'}")
    sys.exit(1 if bad else 0)


@main.command("heegner")
@click.argument("D", type=int)
def heegner_cmd(d):
    """Heegner points of discriminant -D, reduced, with their modular bins."""
    from .heegner import heegner_points, modular_bin, reduce_to_fundamental_domain
    from .quadratic_core import QuadField

    for hp in heegner_points(QuadField(d)):
        z = reduce_to_fundamental_domain(hp.z)
        a, b, c = hp.source_form
        click.echo(f"{a},{b},{c}\t{z.real:.12f}\t{z.imag:.12f}\tbin {modular_bin(z)}")


@main.command("act")
@click.argument("D", type=int)
@click.argument("cls", metavar="CLASS")
@click.argument("point")
def act_cmd(d, cls, point):
    """Act by CLASS (a,b,c) of discriminant -D on sphere POINT (x,y,z)."""
    from .quaternion_orders import class_action, field_for_d, gamma_canonical, sphere_embedding

    x = _ints(point, 3)
    n = sum(t * t for t in x)
    if field_for_d(n).D != d:
        raise click.ClickException(f"point of norm {n} belongs to discriminant "
                                   f"-{field_for_d(n).D}, not -{d}")
    emb = sphere_embedding(n, x)
    y = class_action(emb, _ints(cls, 3), x)
    click.echo(",".join(map(str, gamma_canonical(emb.order, y))))


@main.command("ideal-classes")
@click.argument("p", type=int)
def ideal_classes_cmd(p):
    """Ideal classes of the maximal order ramified at p, with masses."""
    from .quaternion_orders import left_ideal_classes

    cs = left_ideal_classes(p)
    click.echo(f"p = {p}  classes = {len(cs.ideals)}  mass = {cs.total_mass}")
    for i, (u, m) in enumerate(zip(cs.unit_orders, cs.masses)):
        click.echo(f"{i}\tunits {u}\tweight {m}")


@main.command("lvalue")
@click.argument("form")
@click.argument("D", type=int)
@click.argument("chi", type=int)
@click.pass_context
def lvalue_cmd(ctx, form, d, chi):
    """L(1/2, FORM x chi) for character index CHI of Cl(-D)."""
    from .harness import Cache, cached_central_values, resolve_form

    o = ctx.obj
    cache = Cache(o["cache"] or ".toric-cache", offline=bool(o["offline"]))
    f = resolve_form(form, cache, bool(o["offline"]))
    recs = cached_central_values(cache, f, d)
    if not 0 <= chi < len(recs):
        raise click.ClickException(f"character index must be in 0..{len(recs) - 1}")
    r = recs[chi]
    click.echo(json.dumps({"D": d, "chi": chi, "form": r.form_id, "value": r.value,
                           "epsilon": r.epsilon, "gap": r.consistency_gap,
                           "terms": r.terms_used}))


@main.command("fetch")
@click.argument("label")
@click.argument("bound", type=int)
@click.pass_context
def fetch_cmd(ctx, label, bound):
    """Download eigenvalues of LABEL up to BOUND into the cache."""
    from .harness import Cache, CacheMissError, LMFDBClient, LMFDBError

    o = ctx.obj
    cache = Cache(o["cache"] or ".toric-cache")
    client = LMFDBClient(cache, offline=bool(o["offline"]))
    try:
        text = client.fetch(label, bound)
    except (LMFDBError, CacheMissError) as exc:
        raise click.ClickException(str(exc))
    click.echo(text, nl=False)


if __name__ == "__main__":
    main()
