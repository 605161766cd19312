"""Command-line entry point: ``lposit {codec,mul,sweep,ece,dot}``.

Format selectors are ``p8``, ``p16``, ``p32`` for standard posits and
``bp<N>r<R>`` for bounded ones (``bp8`` alone uses the canonical bound);
``--regime-bound`` overrides R.  Operands given as ``0x..``/``0b..`` are bit
patterns, anything else is parsed as a decimal real and rounded to the format.

Worker processes for sweeps default to the ``LPOSIT_THREADS`` environment
variable (1 if unset).  Output is identical for any worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from fractions import Fraction

from . import report as rpt
from .formats import NAR, FormatError, PositFormat, describe, encode, parse_format, to_exact
from .logmul import DEFAULT_CONFIGS, EXACT, MultiplierConfig, parse_config
from .mac import Quire, SimdMode, dot_product, finalize, pack_lanes, simd_mac, trace_multiply
from .metrics import SweepSpec, run_sweep
from .reliability import FaultSpec, ece_empirical, improvement_factor
from .sampling import Sampling


class UsageError(Exception):
    pass


def _parse_real(text: str):
    t = text.strip()
    if t.lower() in ("nar", "nan", "inf", "-inf"):
        return NAR
    try:
        return Fraction(t)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot parse {text!r} as a decimal real") from None


def _parse_bits(fmt: PositFormat, text: str) -> int:
    t = text.strip().lower().replace("_", "")
    try:
        if t.startswith("0x"):
            v = int(t, 16)
        elif t.startswith("0b"):
            v = int(t, 2)
        else:
            v = int(t, 10)
    except ValueError:
        raise UsageError(f"malformed bit pattern {text!r}") from None
    if v < 0 or v >> fmt.n_bits:
        raise UsageError(f"pattern {text!r} does not fit {fmt.n_bits} bits")
    return v


def _operand(fmt: PositFormat, text: str) -> int:
    t = text.strip().lower()
    if t.startswith(("0x", "0b")):
        return _parse_bits(fmt, t)
    return encode(fmt, _parse_real(text))


def _format(args) -> PositFormat:
    try:
        return parse_format(args.format, args.regime_bound)
    except FormatError as exc:
        raise UsageError(str(exc)) from None


def _config(args, fmt: PositFormat) -> MultiplierConfig:
    try:
        if getattr(args, "exact", False):
            cfg = EXACT
        elif getattr(args, "config", None):
            cfg = parse_config(args.config)
        elif args.stages is not None:
            cfg = MultiplierConfig(args.stages, args.trunc)
        else:
            cfg = DEFAULT_CONFIGS[fmt.n_bits]
        cfg.check_width(fmt.mant_width)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _sampling(args) -> Sampling:
    try:
        if args.random is not None:
            return Sampling("random", args.random, args.seed, args.distribution)
        if args.distribution != "uniform":
            raise UsageError("--distribution needs --random")
        return Sampling("exhaustive")
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _emit(args, text: str) -> None:
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _render(args, payload: dict, text_lines: list[str]) -> str:
    if args.out == "json":
        return json.dumps({"schema_version": rpt.SCHEMA_VERSION, **payload}, indent=2, sort_keys=True) + "\n"
    return "\n".join(text_lines) + "\n"


def cmd_codec(args) -> int:
    fmt = _format(args)
    if (args.bits is None) == (args.value is None):
        raise UsageError("give exactly one of --bits or --value")
    lines, payload = [], {"command": "codec"}
    if args.bits is not None:
        bits = _parse_bits(fmt, args.bits)
    else:
        value = _parse_real(args.value)
        bits = encode(fmt, value)
        payload["input"] = str(value)
        if value is not NAR and value != 0:
            mag = abs(value)
            if mag > fmt.maxpos:
                payload["saturated"] = "maxpos"
            elif mag < fmt.minpos:
                payload["saturated"] = "minpos"
    d = describe(fmt, bits)
    payload.update(d)
    payload["layout"] = f"bounded R={fmt.regime_bound}" if fmt.bounded else "standard"
    if fmt.bounded and "special" not in d:
        std = fmt.standard()
        v = to_exact(fmt, bits)
        sbits = encode(std, v)
        payload["standard_bits"] = f"{sbits:#0{fmt.n_bits // 4 + 2}x}"
        payload["standard_exact"] = to_exact(std, sbits) == v
    if args.out == "json":
        _emit(args, _render(args, payload, []))
        return 0
    if "special" in d:
        lines.append(f"{d['bits']} ({d['binary']}) {d['special']}")
    else:
        e = "-" if d["e"] is None else d["e"]
        lines.append(
            f"{d['bits']} ({d['binary']}) s={d['sign']} k={d['k']} e={e} f={d['f']} "
            f"frac_width={d['frac_width']} value={d['value']}"
        )
        term = "with terminator" if d["regime_terminator"] else "no terminator"
        lines.append(f"layout: {payload['layout']}; regime run {d['regime_run']} {term}")
        if "standard_bits" in payload:
            exact = "exact" if payload["standard_exact"] else "rounded"
            lines.append(f"standard {fmt.standard().name} encoding: {payload['standard_bits']} ({exact})")
    if "saturated" in payload:
        lines.append(f"note: input saturated to {payload['saturated']}")
    _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_mul(args) -> int:
    fmt = _format(args)
    cfg = _config(args, fmt)
    a, b = _operand(fmt, args.a), _operand(fmt, args.b)
    t = trace_multiply(fmt, cfg, a, b)
    if args.out == "json":
        _emit(args, _render(args, {"command": "mul", **asdict(t)}, []))
        return 0
    w = fmt.n_bits // 4 + 2
    lines = [f"format {t.format}, multiplier {t.config}"]
    lines.append(f"stage 1 decode: a={t.a}")
    lines.append(f"                b={t.b}")
    if t.special:
        lines.append(f"short-circuit: {t.special} operand")
        lines.append(f"stage 6 encode: {t.result_bits:#0{w}x} value={t.result_value}")
        _emit(args, "\n".join(lines) + "\n")
        return 0
    lines.append(f"stage 2 mantissas: {t.mantissa_a:#b} x {t.mantissa_b:#b}")
    lines.append(f"        truncated: {t.truncated_a:#b} x {t.truncated_b:#b}")
    for i, term in enumerate(t.stage_terms):
        lines.append(f"        stage term {i}: {term}")
    lines.append(f"        mantissa product: {t.mantissa_product} (exact {t.truncated_a * t.truncated_b})")
    lines.append(f"stage 3 scale: sign={t.sign} scale={t.scale}")
    lines.append(f"stage 4 quire: {t.quire}")
    r = t.rounding
    lines.append(
        f"stage 5 round: guard={r['guard']} round={r['round']} sticky={r['sticky']} "
        f"rounded_up={r['rounded_up']} clamped={r['clamped']}"
    )
    lines.append(f"stage 6 encode: {t.result_bits:#0{w}x} value={t.result_value}")
    lines.append(f"exact posit product: {t.exact_bits:#0{w}x} value={t.exact_value}")
    lines.append(f"ED={t.ed} RE={t.re}")
    _emit(args, "\n".join(lines) + "\n")
    return 0


def _serialise(args, reports) -> str:
    if args.out == "json":
        if len(reports) == 1:
            return rpt.to_json(reports[0])
        docs = [json.loads(rpt.to_json(r)) for r in reports]
        return json.dumps({"schema_version": rpt.SCHEMA_VERSION, "reports": docs}, indent=2, sort_keys=True) + "\n"
    if args.out == "csv":
        return rpt.to_csv(list(reports))
    return "".join(rpt.to_text(r) for r in reports)


def cmd_sweep(args) -> int:
    fmt = _format(args)
    cfg = _config(args, fmt)
    try:
        spec = SweepSpec(fmt, cfg, _sampling(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(args, _serialise(args, [run_sweep(spec, args.workers)]))
    return 0


def _parse_r_range(text: str) -> list[int]:
    try:
        if "-" in text:
            lo, hi = (int(x) for x in text.split("-", 1))
            return list(range(lo, hi + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad R range {text!r} (want e.g. 1-6 or 2,3,5)") from None


def cmd_ece(args) -> int:
    fmt = _format(args)
    fields = tuple(f.strip() for f in args.fields.split(",")) if args.fields else None
    kw = dict(sampling=_sampling(args), fields=fields, model=args.model, policy=args.policy)

    def run(f: PositFormat):
        try:
            return ece_empirical(FaultSpec(f, **kw), args.workers)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    if args.r_sweep:
        std = run(fmt.standard())
        reports = [std]
        for r in _parse_r_range(args.r_sweep):
            try:
                bf = fmt.with_bound(r)
            except FormatError as exc:
                raise UsageError(str(exc)) from None
            rep = run(bf)
            rep.gamma = improvement_factor(std, rep) if rep.eta else None
            reports.append(rep)
    elif args.paired:
        if not fmt.bounded:
            raise UsageError("--paired needs a bounded format such as bp8r2")
        std, bnd = run(fmt.standard()), run(fmt)
        bnd.gamma = improvement_factor(std, bnd)
        reports = [std, bnd]
    else:
        reports = [run(fmt)]
    if args.out == "text" and len(reports) > 1:
        lines = [f"{'format':>10} {'eta':>22} {'gamma':>22}"]
        for r in reports:
            g = "-" if r.gamma is None else repr(r.gamma)
            lines.append(f"{r.spec.format.name:>10} {r.eta!r:>22} {g:>22}")
        _emit(args, "\n".join(lines) + "\n")
    else:
        _emit(args, _serialise(args, reports))
    return 0


def read_vectors(paths: list[str]) -> tuple[list[Fraction], list[Fraction]]:
    """One file with two comma-separated columns, or two files with one value per line."""

    def rows(path):
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), 1):
                row = [c for c in (x.strip() for x in row) if c]
                if not row or row[0].startswith("#"):
                    continue
                yield lineno, row

    def num(path, lineno, text):
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"{path}:{lineno}: not a decimal value: {text!r}") from None

    if len(paths) == 1:
        a, b = [], []
        for lineno, row in rows(paths[0]):
            if len(row) != 2:
                raise UsageError(f"{paths[0]}:{lineno}: expected two columns, got {len(row)}")
            a.append(num(paths[0], lineno, row[0]))
            b.append(num(paths[0], lineno, row[1]))
        return a, b
    if len(paths) == 2:
        cols = []
        for p in paths:
            col = []
            for lineno, row in rows(p):
                if len(row) != 1:
                    raise UsageError(f"{p}:{lineno}: expected one value per line")
                col.append(num(p, lineno, row[0]))
            cols.append(col)
        if len(cols[0]) != len(cols[1]):
            raise UsageError(f"length mismatch: {len(cols[0])} vs {len(cols[1])}")
        return cols[0], cols[1]
    raise UsageError("give one two-column file or two single-column files")


def cmd_dot(args) -> int:
    fmt = _format(args)
    cfg = _config(args, fmt)
    try:
        ra, rb = read_vectors(args.vectors)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    a = [encode(fmt, x) for x in ra]
    b = [encode(fmt, x) for x in rb]
    w = fmt.n_bits // 4 + 2
    payload = {"command": "dot", "format": fmt.name, "config": cfg.label, "length": len(a)}
    res = dot_product(fmt, cfg, a, b)
    va = [to_exact(fmt, x) for x in a]
    vb = [to_exact(fmt, x) for x in b]
    if NAR in va or NAR in vb:
        exact = NAR
    else:
        exact = sum((x * y for x, y in zip(va, vb)), Fraction(0))
    exact_bits = encode(fmt, exact)
    approx = to_exact(fmt, res)
    payload.update(
        result_bits=f"{res:#0{w}x}",
        result_value=str(approx),
        oracle_exact=str(exact),
        oracle_bits=f"{exact_bits:#0{w}x}",
        oracle_value=str(to_exact(fmt, exact_bits)),
    )
    if exact is not NAR and approx is not NAR:
        ed = abs(exact - approx)
        payload["ed"] = str(ed)
        payload["re"] = str(ed / abs(exact)) if exact else None
    if args.simd:
        mode = SimdMode.parse(args.simd)
        if mode.lane_bits != fmt.n_bits:
            raise UsageError(f"{mode.name} needs a {mode.lane_bits}-bit format, got {fmt.name}")
        lanes = mode.lanes
        qs = [Quire() for _ in range(lanes)]
        for i in range(0, len(a), lanes):
            ca = a[i : i + lanes] + [0] * (lanes - len(a[i : i + lanes]))
            cb = b[i : i + lanes] + [0] * (lanes - len(b[i : i + lanes]))
            qs = simd_mac(mode, pack_lanes(mode, ca), pack_lanes(mode, cb), qs, fmt, cfg)
        simd_bits = [finalize(q, fmt) for q in qs]
        scalar_bits = [dot_product(fmt, cfg, a[j::lanes], b[j::lanes]) for j in range(lanes)]
        payload["simd_mode"] = mode.name
        payload["simd_lanes"] = [f"{x:#0{w}x}" for x in simd_bits]
        payload["scalar_lanes"] = [f"{x:#0{w}x}" for x in scalar_bits]
        payload["simd_matches_scalar"] = simd_bits == scalar_bits
    lines = [f"{k}: {v}" for k, v in payload.items() if k != "command"]
    _emit(args, _render(args, payload, lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lposit", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, outs=("text", "json")):
        sp.add_argument("--format", "-f", default="p8", help="p8|p16|p32|bp<N>r<R> (default p8)")
        sp.add_argument("--regime-bound", type=int, default=None, help="override the regime bound R")
        sp.add_argument("--out", choices=outs, default="text", help="output format")
        sp.add_argument("--output", "-o", default=None, help="output path (default stdout)")

    def multiplier(sp):
        sp.add_argument("--stages", "-n", type=int, default=None, help="logarithmic stages n")
        sp.add_argument("--trunc", "-m", type=int, default=None, help="retained operand bits m")
        sp.add_argument("--config", "-c", default=None, help="label such as LP-3_T4 or exact")
        sp.add_argument("--exact", action="store_true", help="exact mantissa multiply (reference)")

    def sampling(sp):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--exhaustive", action="store_true", help="every pattern (default)")
        g.add_argument("--random", type=int, default=None, metavar="COUNT", help="random sample size")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--distribution", choices=("uniform", "gaussian"), default="uniform")
        sp.add_argument("--workers", type=int, default=None, help="worker processes (env LPOSIT_THREADS)")

    sp = sub.add_parser("codec", help="decode a pattern or encode a real")
    common(sp)
    sp.add_argument("--bits", help="pattern, 0x.. or 0b..")
    sp.add_argument("--value", help="decimal real (or 'nar')")
    sp.set_defaults(func=cmd_codec)

    sp = sub.add_parser("mul", help="traced single multiply")
    common(sp)
    multiplier(sp)
    sp.add_argument("a")
    sp.add_argument("b")
    sp.set_defaults(func=cmd_mul)

    sp = sub.add_parser("sweep", help="error metrics against the exact posit multiplier")
    common(sp, ("text", "csv", "json"))
    multiplier(sp)
    sampling(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("ece", help="fault-injection ECE")
    common(sp, ("text", "csv", "json"))
    sampling(sp)
    sp.add_argument("--fields", default=None, help="comma list of sign,regime,exponent,fraction")
    sp.add_argument("--model", choices=("sign_magnitude", "word"), default="sign_magnitude")
    sp.add_argument("--policy", choices=("exclude", "clamp"), default="exclude")
    sp.add_argument("--paired", action="store_true", help="standard vs bounded plus gamma")
    sp.add_argument("--r-sweep", default=None, metavar="RANGE", help="bounded R values, e.g. 1-6")
    sp.set_defaults(func=cmd_ece)

    sp = sub.add_parser(
        "dot",
        help="dot product with oracle comparison",
        description="Vectors are one two-column CSV file or two files with one decimal value per line.",
    )
    common(sp)
    multiplier(sp)
    sp.add_argument("vectors", nargs="+", help="vector file(s)")
    sp.add_argument("--simd", default=None, help="P8x4|P16x2|P32x1 lane-packed run")
    sp.set_defaults(func=cmd_dot)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
