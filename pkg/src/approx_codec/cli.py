"""Command-line front end.

Every command prints JSON lines on stdout.  Errors are printed as
``{"error": {"code": ..., "message": ...}}`` and mapped to exit status
1 (property failure), 2 (usage or parse error) or 3 (cap exceeded).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction

from . import limits
from .codec import EncodedParameter, RoundtripLimits, TupleSet, cover_open_set, decode, encode, roundtrip
from .engine import best_approximations, find_split, splits_between
from .errors import CodecError, InvalidInput, ParseError
from .numeric import parse_rational, rational_to_json
from .systems import SystemDescriptor, default_system, verify_condition_ii

log = logging.getLogger("approx_codec")

CONFIG_ENV = "APPROX_CODEC_CONFIG"


@dataclass
class RunConfig:
    system: SystemDescriptor = field(default_factory=lambda: default_system().descriptor())
    caps: limits.Limits = field(default_factory=limits.Limits)
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "system": self.system.to_json(),
            "caps": {"search_cap": str(self.caps.search_cap),
                     "precision_cap": str(self.caps.precision_cap),
                     "depth_cap": str(self.caps.depth_cap)},
            "seed": str(self.seed),
        }

    @classmethod
    def from_json(cls, obj) -> "RunConfig":
        if not isinstance(obj, dict):
            raise ParseError("config must be a JSON object")
        if "kind" in obj:  # a bare system descriptor
            return cls(system=SystemDescriptor.from_json(obj))
        cfg = cls()
        if "system" in obj:
            cfg.system = SystemDescriptor.from_json(obj["system"])
        try:
            caps = {k: int(v) for k, v in obj.get("caps", {}).items()}
            cfg.caps = limits.Limits(**caps)
            cfg.seed = _seed(obj.get("seed", 0))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad config: {exc}") from exc
        return cfg


def _seed(text) -> int:
    try:
        seed = int(text)
    except (TypeError, ValueError):
        raise ParseError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= seed < 2**64:
        raise ParseError("seed must fit in 64 unsigned bits")
    return seed


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc


def load_config(args) -> RunConfig:
    path = args.system or os.environ.get(CONFIG_ENV)
    cfg = RunConfig.from_json(_read_json(path)) if path else RunConfig()
    overrides = {}
    for name in ("search_cap", "precision_cap", "depth_cap"):
        value = getattr(args, name, None)
        if value is not None:
            if value <= 0:
                raise ParseError(f"--{name.replace('_', '-')} must be positive")
            overrides[name] = value
    if overrides:
        cfg.caps = limits.Limits(**{**cfg.caps.__dict__, **overrides})
    if args.seed is not None:
        cfg.seed = _seed(args.seed)
    return cfg


def _emit(obj, out: str | None = None) -> None:
    text = json.dumps(obj, sort_keys=False)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _rational_arg(text: str) -> Fraction:
    return parse_rational(text)


# ---------------------------------------------------------------------------
# commands


def cmd_encode(cfg: RunConfig, args) -> int:
    system = cfg.system.build()
    A = TupleSet.from_json(_read_json(args.input))
    param = encode(system, A)
    if args.out:
        _emit(param.to_json(), args.out)
    else:
        _emit(param.to_json())
    _emit({
        "final_depth": str(param.final_depth),
        "depths": [str(d) for d in param.depths],
        "bracket_widths": [f"{b.width.approx:.6e}" for b in param.brackets],
    })
    return 0


def cmd_decode(cfg: RunConfig, args) -> int:
    obj = _read_json(args.input)
    param = EncodedParameter.from_json(obj)
    system = param.system.build()
    count = param.n_tuples if args.count is None else args.count
    m = param.m if args.m is None else args.m
    result = decode(system, param, m, count, depth=args.depth)
    _emit(result.to_json(), args.out)
    return 0


def cmd_roundtrip(cfg: RunConfig, args) -> int:
    system = cfg.system.build()
    m_values = tuple(int(x) for x in args.m_values.split(","))
    if args.trials < 0 or any(m < 1 for m in m_values) or args.max_tuples < 1 or args.max_index < 1:
        raise InvalidInput("trials must be >= 0 and the tuple limits positive")
    lim = RoundtripLimits(m_values, args.max_tuples, args.max_index)
    report = roundtrip(system, args.trials, cfg.seed, lim, bracket_points=args.bracket_points,
                       workers=args.workers, timing=args.timing)
    _emit(report, args.out)
    return 0 if report["summary"]["failures"] == 0 else 1


def cmd_explore(cfg: RunConfig, args) -> int:
    system = cfg.system.build()
    what = args.what
    if what == "best-approx":
        L, R = best_approximations(system, args.c, args.depth)
        _emit({"L": L, "R": R}, args.out)
    elif what == "split":
        if args.d2 is not None:
            _emit({"d1": args.d1, "d2": args.d2, "splits": splits_between(system, args.d1, args.d2)}, args.out)
        else:
            _emit({"d1": args.d1, "d2": find_split(system, args.d1)}, args.out)
    elif what == "condition-ii":
        w = verify_condition_ii(system, args.a, args.b, args.d, args.e)
        _emit({"lo": rational_to_json(w.lo), "hi": rational_to_json(w.hi)}, args.out)
    elif what == "gaps":
        order = system.sorted_indices(args.n)
        vals = [system.f(i) for i in order]
        # independent basis: equal values have equal coefficient vectors
        lengths = list(dict.fromkeys(y - x for x, y in zip(vals, vals[1:])))
        _emit({"n": args.n, "count": len(lengths),
               "lengths": [str(g) for g in lengths]}, args.out)
    return 0


def _box(text: str) -> list[tuple[Fraction, Fraction]]:
    """``"lo:hi,lo:hi"`` with rational endpoints."""
    out = []
    for part in text.split(","):
        lo, sep, hi = part.partition(":")
        if not sep:
            raise ParseError(f"box side {part!r} must look like lo:hi")
        out.append((parse_rational(lo), parse_rational(hi)))
    return out


def cmd_cover(cfg: RunConfig, args) -> int:
    system = cfg.system.build()
    boxes = [_box(b) for b in args.box or []]
    dims = {len(b) for b in boxes}
    if len(dims) > 1:
        raise InvalidInput("all boxes need the same dimension")
    result = cover_open_set(system, boxes, args.margin, args.depth)
    _emit({"boxes": [list(t) for t in result]}, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as structured JSON (exit 2)."""

    def error(self, message):
        _emit(ParseError(message).to_json())
        self.exit(2)


def _typed(fn):
    def conv(text):
        try:
            return fn(text)
        except (ParseError, ValueError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    conv.__name__ = fn.__name__
    return conv


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--system", help="system or run-config JSON file (fallback: $%s)" % CONFIG_ENV)
    common.add_argument("--seed", help="64-bit unsigned seed")
    common.add_argument("--depth-cap", type=int, dest="depth_cap")
    common.add_argument("--search-cap", type=int, dest="search_cap")
    common.add_argument("--precision-cap", type=int, dest="precision_cap", help="bits")
    common.add_argument("--out", help="write the main JSON result here instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="approx-codec", description="Encode finite relations into three reals and back.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    enc = sub.add_parser("encode", parents=[common], help="encode a tuple-set JSON file")
    enc.add_argument("--input", required=True)
    enc.set_defaults(func=cmd_encode)

    dec = sub.add_parser("decode", parents=[common], help="decode an encoded-parameter JSON file")
    dec.add_argument("--input", required=True)
    dec.add_argument("--count", type=int)
    dec.add_argument("--m", type=int)
    dec.add_argument("--depth", type=int)
    dec.set_defaults(func=cmd_decode)

    rt = sub.add_parser("roundtrip", parents=[common], help="seeded encode/decode trials")
    rt.add_argument("--trials", type=int, default=200)
    rt.add_argument("--m-values", default="1,2,3")
    rt.add_argument("--max-tuples", type=int, default=6)
    rt.add_argument("--max-index", type=int, default=20)
    rt.add_argument("--bracket-points", type=int, default=0,
                    help="also decode from this many random points inside each bracket")
    rt.add_argument("--workers", type=int, default=1)
    rt.add_argument("--timing", action="store_true", help="add wall-clock seconds (report no longer reproducible)")
    rt.set_defaults(func=cmd_roundtrip)

    ex = sub.add_parser("explore", help="inspect engine and system operations")
    exsub = ex.add_subparsers(dest="what", required=True, parser_class=_Parser)
    ba = exsub.add_parser("best-approx", parents=[common])
    ba.add_argument("--c", type=_typed(_rational_arg), required=True)
    ba.add_argument("--depth", type=int, required=True)
    sp = exsub.add_parser("split", parents=[common])
    sp.add_argument("--d1", type=int, required=True)
    sp.add_argument("--d2", type=int)
    c2 = exsub.add_parser("condition-ii", parents=[common])
    for name in ("a", "b"):
        c2.add_argument(f"--{name}", type=_typed(_rational_arg), required=True)
    c2.add_argument("--d", type=int, required=True)
    c2.add_argument("--e", type=int, required=True)
    gp = exsub.add_parser("gaps", parents=[common])
    gp.add_argument("--n", type=int, required=True)
    ex.set_defaults(func=cmd_explore)

    cv = sub.add_parser("cover", parents=[common], help="cover rational boxes by f-boxes")
    cv.add_argument("--box", action="append", help="lo:hi[,lo:hi...] (repeatable)")
    cv.add_argument("--margin", type=_typed(_rational_arg), required=True)
    cv.add_argument("--depth", type=int, required=True)
    cv.set_defaults(func=cmd_cover)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors (already reported) and --help
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args)
        with limits.using(cfg.caps):
            return args.func(cfg, args)
    except CodecError as exc:
        _emit(exc.to_json())
        return exc.exit_status
    except OSError as exc:
        _emit(ParseError(f"i/o error: {exc}").to_json())
        return 2


if __name__ == "__main__":
    sys.exit(main())
