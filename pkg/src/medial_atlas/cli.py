"""Command-line front end: gallery, scan, classify, trace, sectors, cover, render."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from . import export, gallery, render
from .norms import NormError
from .propagate import PropagationError, cover, estimate_delta, split, trace_arc_2d
from .scene import Scene, SceneError
from .sectors import SectorError, sector_arc, sectors_at
from .singular import C_JUMP, OracleError, classify, oracle_scan

EXIT_OK, EXIT_ARGS, EXIT_NUMERIC = 0, 2, 3


class BadArgs(Exception):
    pass


def _floats(text: str, n: Optional[int] = None, what: str = "value"):
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise BadArgs(f"cannot parse {what} {text!r}")
    if n is not None and len(vals) not in ((n,) if isinstance(n, int) else n):
        raise BadArgs(f"{what} needs {n} comma-separated numbers, got {len(vals)}")
    if not np.all(np.isfinite(vals)):
        raise BadArgs(f"{what} must be finite")
    return vals


def _params(pairs):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise BadArgs(f"--param expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.replace("-", "_")] = json.loads(v)
        except json.JSONDecodeError:
            out[k.replace("-", "_")] = v
    return out


def _gallery_item(name, params):
    kw = dict(params)
    if name == "two-point" and "randers" in kw:
        from . import norms
        kw["norm"] = norms.randers(np.eye(2), kw.pop("randers"))
    try:
        return gallery.by_name(name, **kw)
    except TypeError as e:
        raise BadArgs(f"bad parameters for {name}: {e}")


def load_source(src: str):
    """Scene or convex function from a JSON path or a gallery name."""
    if not os.path.exists(src):
        if src in gallery.GALLERY:
            item = gallery.by_name(src)
            return item if isinstance(item, gallery.ConvexFn) else item.scene
        raise BadArgs(f"no such scene file or gallery entry: {src}")
    try:
        obj = export.read_json(src)
    except (OSError, json.JSONDecodeError) as e:
        raise BadArgs(f"cannot read {src}: {e}")
    if "convex" in obj:
        return _gallery_item(obj["convex"], obj.get("params", {}))
    try:
        return Scene.from_json(obj)
    except (KeyError, TypeError, ValueError) as e:
        raise BadArgs(f"invalid scene {src}: {e}")


def _scene(src) -> Scene:
    s = load_source(src)
    if not isinstance(s, Scene):
        raise BadArgs(f"{src} describes a convex function, not a closed set")
    return s


def _emit(obj, out: Optional[str]):
    text = export.dumps(obj)
    if out:
        export.atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _figure(args, layers, title):
    if getattr(args, "figure", None):
        export.atomic_write(args.figure, render.figure_png(layers, title))


# subcommands

def cmd_gallery(args):
    params = _params(args.param)
    item = _gallery_item(args.name, params)
    oracle_path = args.oracle or os.path.splitext(args.out)[0] + ".oracle.json"
    if isinstance(item, gallery.ConvexFn):
        scene_obj = {"convex": args.name, "params": params}
        oracle = {"name": args.name, "kind": "convex", "description": item.description,
                  "depth": item.depth, "truncation_error": item.truncation_error}
        if hasattr(item, "segments"):
            oracle["segments"] = [{"index": i, "a": a, "b": b} for i, a, b in item.segments]
    else:
        scene_obj = item.scene.to_json()
        oracle = item.oracle_json()
    export.write_json(args.out, scene_obj)
    export.write_json(oracle_path, oracle)


def cmd_scan(args):
    scene = _scene(args.scene)
    window = _floats(args.window, 2 * scene.dim, "window")
    if args.h <= 0:
        raise BadArgs("--h must be positive")
    grid = oracle_scan(scene, window, args.h, args.c_jump)
    export.write_grid(args.out, grid)
    if scene.dim == 2:
        _figure(args, render.Layers(grid.centers(), args.h, scene=scene, window=tuple(window)), "scan")


def cmd_classify(args):
    src = load_source(args.scene)
    if isinstance(src, gallery.ConvexFn):
        p = _floats(args.point, 2, "point")
        r = gallery.convex_singular_probe(src, p, n_dirs=args.n_dirs)
        _emit({"point": p, "singular": r.singular, "probe": r.value, "direction": r.direction}, args.out)
        return
    p = _floats(args.point, src.dim, "point")
    _emit(classify(src, p).to_json(), args.out)


def cmd_trace(args):
    scene = _scene(args.scene)
    if scene.dim != 2:
        raise BadArgs("trace works on planar scenes")
    p = _floats(args.seed_point, 2, "seed point")
    s = classify(scene, p)
    if not s.singular or s.k != 2:
        raise PropagationError(f"seed point has {s.k} nearest clusters; tracing needs exactly 2")
    pair = split(scene, s)
    estimate_delta(scene, pair)
    bounds = _floats(args.window, 4, "window") if args.window else None
    radius = None if bounds is not None else -1.0
    arc = trace_arc_2d(pair, h=args.h, tol=args.tol, radius=radius, bounds=bounds, scene=scene)
    export.write_arc(args.out, arc)
    _figure(args, render.Layers(arcs=[arc.vertices], scene=scene, window=tuple(bounds) if bounds else None), "trace")


def cmd_sectors(args):
    scene = _scene(args.scene)
    p = _floats(args.point, 2, "point")
    fan = sectors_at(scene, p, args.delta0)
    out = fan.to_json()
    if args.arcs:
        out["arcs"] = []
        for i in range(len(fan)):
            a = sector_arc(scene, fan, i)
            out["arcs"].append({"sector": i, "tangent": a.tangent, "bisection_residual": a.bisection_residual,
                                "n_vertices": len(a.arc), "end": a.arc.vertices[-1]})
    _emit(out, args.out)


def cmd_cover(args):
    scene = _scene(args.scene)
    window = _floats(args.window, 4, "window")
    rep = cover(scene, window, h=args.h, c_jump=args.c_jump)
    export.write_json(args.out, rep.to_json())
    _figure(args, render.Layers(arcs=[a.arc.vertices for a in rep.arcs], scene=scene, window=tuple(window)),
            f"cover: {len(rep.arcs)} arcs")


def cmd_render(args):
    tables = []
    for path in args.inputs:
        try:
            header, data = export.read_table(path)
            tables.append((export.table_kind(header), header, data))
        except (OSError, ValueError) as e:
            raise BadArgs(f"cannot read {path}: {e}")
    scene = _scene(args.scene) if args.scene else None
    window = tuple(_floats(args.window, 4, "window")) if args.window else None
    try:
        layers = render.layers_from_tables(tables, scene, args.h, window)
    except ValueError as e:
        raise BadArgs(str(e))
    if not args.svg and not args.figure:
        raise BadArgs("render needs --svg and/or --figure")
    if args.svg:
        export.atomic_write(args.svg, render.svg(layers, title=", ".join(map(os.path.basename, args.inputs))))
    _figure(args, layers, ", ".join(map(os.path.basename, args.inputs)))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise BadArgs(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="medial-atlas", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gallery", help="write a gallery scene and its oracle")
    g.add_argument("name", choices=gallery.GALLERY)
    g.add_argument("--out", required=True)
    g.add_argument("--oracle", help="oracle path (default: <out stem>.oracle.json)")
    g.add_argument("--param", action="append", metavar="NAME=VALUE",
                   help="generator parameter, JSON-decoded (e.g. k=5, randers=[0.5,0])")
    g.set_defaults(func=cmd_gallery)

    s = sub.add_parser("scan", help="grid oracle scan to CSV")
    s.add_argument("--scene", required=True)
    s.add_argument("--window", required=True)
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--c-jump", type=float, default=C_JUMP)
    s.add_argument("--out", required=True)
    s.add_argument("--figure")
    s.set_defaults(func=cmd_scan)

    c = sub.add_parser("classify", help="nearest-point structure at a point")
    c.add_argument("--scene", required=True)
    c.add_argument("--point", required=True)
    c.add_argument("--n-dirs", type=int, default=16)
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    t = sub.add_parser("trace", help="trace the singular arc through a seed")
    t.add_argument("--scene", required=True)
    t.add_argument("--seed-point", required=True)
    t.add_argument("--h", type=float)
    t.add_argument("--tol", type=float, default=1e-10)
    t.add_argument("--window", help="trace until the window is left instead of the validated ball")
    t.add_argument("--out", required=True)
    t.add_argument("--figure")
    t.set_defaults(func=cmd_trace)

    f = sub.add_parser("sectors", help="sector fan at a singular point")
    f.add_argument("--scene", required=True)
    f.add_argument("--point", required=True)
    f.add_argument("--delta0", type=float)
    f.add_argument("--arcs", action="store_true", help="also trace one arc per sector")
    f.add_argument("--out")
    f.set_defaults(func=cmd_sectors)

    v = sub.add_parser("cover", help="cover the sampled singular set by traced arcs")
    v.add_argument("--scene", required=True)
    v.add_argument("--window", required=True)
    v.add_argument("--h", type=float, default=1 / 512)
    v.add_argument("--c-jump", type=float, default=C_JUMP)
    v.add_argument("--out", required=True)
    v.add_argument("--figure")
    v.set_defaults(func=cmd_cover)

    r = sub.add_parser("render", help="draw grid/arc CSV files as SVG and/or PNG")
    r.add_argument("--in", dest="inputs", nargs="+", required=True)
    r.add_argument("--svg")
    r.add_argument("--figure")
    r.add_argument("--scene", help="draw the scene primitives as a separate layer")
    r.add_argument("--window")
    r.add_argument("--h", type=float, help="cell size (inferred from the grid by default)")
    r.set_defaults(func=cmd_render)
    return ap


_LIST_OPTS = ("--window", "--point", "--seed-point")


def _glue(argv):
    """Attach comma lists to their option so a leading minus is not read as a flag."""
    out, it = [], iter(argv)
    for a in it:
        if a in _LIST_OPTS:
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(_glue(argv))
        args.func(args)
    except BadArgs as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ARGS
    except (OracleError, SceneError, NormError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ARGS
    except (PropagationError, SectorError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ARGS
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
