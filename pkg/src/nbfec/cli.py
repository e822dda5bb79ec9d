"""
Command-line front end.

Every subcommand writes plain CSV (header comments carry units) and a
``<out>.manifest.json`` echoing the configuration, package versions and
seeds. Output never contains timestamps, so identical configurations give
byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import platform
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .channel import AwgnChannel, esn0_db_to_sigma2, estimate_dmc
from .constellation import BUILTIN, load_constellation
from .db import read_db
from .demod import GaussianMetric
from .metrics import NU_BRACKET, analyze, mi_hd
from .nbldpc import PRESET_CHECK_DEGREE, build_code, load_code, parse_code
from .predict import (CalibrationCurve, CalibrationError, calibrate, decode_db, esn0_for_mi,
                      REFERENCE_THRESHOLD, mi_sweep, predict_post_fec,
                      universality_sweep)
from .simulate import StopRule, default_workers, simulate_point

log = logging.getLogger("nbfec")

UNITS = "# units: mi/gmi/aclb in bits/symbol, esn0 in dB, ber/ser as fractions, sigma2 per dimension"


class CliError(Exception):
    pass


def parse_grid(text: str) -> list:
    """``a:b:c`` (start, step, stop; stop inclusive), ``a,b,c`` or a single value."""
    try:
        if ":" in text:
            a, b, c = (float(t) for t in text.split(":"))
            if b <= 0 or c < a:
                raise CliError(f"bad grid {text!r}: need step > 0 and stop >= start")
            n = int(math.floor((c - a) / b + 1e-9)) + 1
            return [round(a + i * b, 10) for i in range(n)]
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliError(f"cannot parse grid {text!r}") from None
    if not vals:
        raise CliError("empty grid")
    return vals


def _constellations(text):
    return [load_constellation(s.strip()) for s in text.split(",") if s.strip()]


def _code(args):
    if args.code:
        p = Path(args.code)
        if p.exists():
            return load_code(p)
        shipped = resources.files("nbfec.data.codes").joinpath(f"{args.code}.txt")
        if shipped.is_file():
            return parse_code(shipped.read_text("utf-8"), args.code)
        raise CliError(f"code preset {args.code!r} not found (give a file or r070/r080/r090)")
    if args.rate is None:
        raise CliError("give --code or --rate")
    dc = args.check_degree or PRESET_CHECK_DEGREE.get(round(args.rate, 2))
    code = build_code(3, args.rate, args.n, seed=args.code_seed, dv=3, dc=dc)
    code.name = code.name or f"r{args.rate:.2f}-n{code.n}-s{args.code_seed}"
    return code


def _stop(args):
    return StopRule(target_errors=args.target_errors, min_frame_errors=args.min_frame_errors,
                    max_frames=args.max_frames)


def _versions():
    import numba
    import scipy
    return {"nbfec": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def _write(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def _manifest(args, outputs, failed=(), extra=None):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {"command": args.command, "config": cfg, "versions": _versions(),
           "seed": getattr(args, "seed", None), "outputs": [str(o) for o in outputs],
           "failed": list(failed)}
    if extra:
        doc.update(extra)
    _write(str(args.out) + ".manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _csv(header_lines, columns, rows):
    buf = io.StringIO()
    for h in header_lines:
        buf.write(h.rstrip() + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


POINT_COLUMNS = ["constellation", "esn0_db", "channel", "mi_bits", "i_nb_bits", "i_nb_stderr",
                 "nu_hat", "sigma2_hat", "aclb_bits", "gmi_bits", "mi_hd_bits", "pre_fec_ber",
                 "pre_fec_ser", "post_fec_ser", "frames", "symbols", "symbol_errors",
                 "frame_errors", "iterations"]


def _point_row(p):
    return [p.constellation, p.esn0_db, p.channel, float(p.mi), p.i_nb, p.i_nb_stderr, p.nu_hat,
            p.sigma2_hat, p.aclb, p.gmi, p.mi_hd, p.pre_ber, p.pre_ser, p.post_fec_ser,
            p.frames, p.symbols, p.symbol_errors, p.frame_errors, p.iterations]


def _sweep(args, channel):
    code = _code(args)
    cons = _constellations(args.constellation)
    grid = parse_grid(args.esn0)
    rows, failed = [], []
    for c in cons:
        for s in grid:
            try:
                p = simulate_point(code, c, s, args.seed, channel, _stop(args), args.workers,
                                   metric_k=args.metric_k)
                rows.append(_point_row(p))
            except Exception as exc:  # report and continue with the other points
                failed.append(f"{c.name}@{s:g}dB: {exc}")
    head = [f"# nbfec {args.command} code={code.name} n={code.n} k={code.k} seed={args.seed} "
            f"channel={channel}", UNITS]
    _write(args.out, _csv(head, POINT_COLUMNS, rows))
    if args.dmc_out and channel == "hd":
        _write_dmc(args, cons, grid)
    _manifest(args, [args.out], failed, {"code": code.name})
    for f in failed:
        print(f"failed point {f}", file=sys.stderr)
    return 1 if failed else 0


def cmd_simulate(args):
    return _sweep(args, "awgn")


def cmd_dmc(args):
    return _sweep(args, "hd")


def _write_dmc(args, cons, grid):
    rows = []
    for c in cons:
        for s in grid:
            W = estimate_dmc(c, AwgnChannel(float(esn0_db_to_sigma2(s)), args.seed),
                             args.dmc_samples)
            rows.append([c.name, s, float(mi_hd(W, c.priors))] + [float(v) for v in W.W.ravel()])
    M = cons[0].M
    cols = ["constellation", "esn0_db", "mi_hd_bits"] + [f"w_{j}_{k}" for j in range(M)
                                                          for k in range(M)]
    _write(args.dmc_out, _csv(["# transition matrices, w_j_k = P(receive j | send k)", UNITS],
                              cols, rows))


def cmd_calibrate(args):
    code = _code(args)
    cons = _constellations(args.constellation)
    rate = round(code.design_rate, 2)
    if args.esn0:
        sweep = parse_grid(args.esn0)
    else:
        centre = REFERENCE_THRESHOLD.get(rate, 3 * rate + 0.15)
        sweep = mi_sweep(cons, centre, parse_grid(args.mi_offsets))
    try:
        curve = calibrate(code, cons, args.target_ser, sweep, args.seed, stop=_stop(args),
                          workers=args.workers, metric_k=args.metric_k,
                          validate=not args.no_validate)
    except CalibrationError as exc:
        _manifest(args, [], [str(exc)])
        raise CliError(str(exc)) from None
    curve.code_id = code.name
    curve.save(args.out)
    thr = curve.threshold()
    per = curve.per_constellation()
    extra = {"threshold_mi_bits": thr, "per_constellation": per}
    try:
        extra["threshold_1e-4_loglinear"] = curve.extrapolated_threshold(1e-4)
    except CalibrationError:
        pass
    _manifest(args, [args.out], [], extra)
    print(f"threshold {thr:.4f} bits at SER {args.target_ser:g}")
    for k, v in per.items():
        print(f"  {k}: {v:.4f}")
    return 0


def cmd_analyze(args):
    db = read_db(args.db)
    c = load_constellation(args.constellation or db.constellation)
    q = GaussianMetric(args.metric_k) if args.metric_k else None
    bracket = tuple(parse_grid(args.nu_bracket)) if args.nu_bracket else NU_BRACKET
    if len(bracket) != 2:
        raise CliError("--nu-bracket takes two values lo,hi")
    rep = analyze(db, c, q, bracket=bracket)
    d = rep.as_dict()
    cols = ["n", "i_nb_bits", "i_nb_stderr", "nu_hat", "sigma2_hat", "aclb_bits", "aclb_stderr",
            "gmi_bits", "gmi_stderr", "ber", "ser"]
    keys = ["n", "i_nb", "i_nb_stderr", "nu_hat", "sigma2_hat", "aclb", "aclb_stderr", "gmi",
            "gmi_stderr", "ber", "ser"]
    row = [d[k] if k == "n" else float(d[k]) for k in keys]
    _write(args.out, _csv([f"# nbfec analyze db={Path(args.db).name} constellation={c.name}",
                           UNITS], cols, [row]))
    _manifest(args, [args.out])
    return 0


def cmd_predict(args):
    curve = CalibrationCurve.load(args.curve)
    mis = []
    if args.mi:
        mis += [("mi", v) for v in parse_grid(args.mi)]
    if args.db:
        db = read_db(args.db)
        c = load_constellation(args.constellation or db.constellation)
        mis.append((Path(args.db).name, analyze(db, c).i_nb))
    if not mis:
        raise CliError("give --mi or --db")
    rows = []
    for src, mi in mis:
        p = predict_post_fec(mi, curve)
        lo = p.lower or (math.nan, math.nan)
        hi = p.upper or (math.nan, math.nan)
        rows.append([src, float(mi), p.ser, float(lo[0]), float(lo[1]), float(hi[0]),
                     float(hi[1]), int(p.extrapolated)])
    cols = ["source", "mi_bits", "post_fec_ser", "lower_mi_bits", "lower_ser", "upper_mi_bits",
            "upper_ser", "extrapolated"]
    _write(args.out, _csv([f"# nbfec predict curve={Path(args.curve).name} "
                           f"code={curve.code_id}", UNITS], cols, rows))
    _manifest(args, [args.out])
    return 0


def cmd_decode_db(args):
    db = read_db(args.db)
    c = load_constellation(args.constellation or db.constellation)
    code = _code(args)
    ser, det = decode_db(db, code, args.seed, c, return_details=True)
    rows = [[i, e, it, int(ok)] for i, (e, it, ok) in enumerate(det)]
    head = [f"# nbfec decode-db db={Path(args.db).name} code={code.name} seed={args.seed}",
            f"# post_fec_ser={ser!r} blocks={len(det)} n={code.n}", UNITS]
    _write(args.out, _csv(head, ["block", "symbol_errors", "iterations", "syndrome_ok"], rows))
    _manifest(args, [args.out], extra={"post_fec_ser": ser})
    print(f"post-FEC SER {ser:.4g} over {len(det)} blocks")
    return 0


def _channel_arg(text):
    kind, _, val = text.partition(":")
    if kind not in ("awgn", "hd"):
        raise CliError(f"channel kind must be awgn or hd, got {kind!r}")
    return kind, (float(val) if val else None)


def cmd_universality(args):
    code = _code(args)
    c = load_constellation(args.constellation)
    ch1, ch2 = _channel_arg(args.ch1), _channel_arg(args.ch2)
    if ch1[1] is None:
        raise CliError("--ch1 needs an Es/N0 (kind:dB)")
    if ch2[1] is None:
        # match the MI of channel 1
        if ch1[0] == "awgn":
            from .metrics import mi_sd_numeric
            target = mi_sd_numeric(c, float(esn0_db_to_sigma2(ch1[1])))
        else:
            target = mi_hd(estimate_dmc(c, AwgnChannel(float(esn0_db_to_sigma2(ch1[1])),
                                                       args.seed)), c.priors)
        ch2 = (ch2[0], round(esn0_for_mi(c, target, channel=ch2[0], seed=args.seed), 4))
    gammas = parse_grid(args.gamma)
    rows, dev = universality_sweep(code, c, ch1, ch2, gammas, args.seed, args.frames,
                                   args.mi_tol)
    head = [f"# nbfec universality code={code.name} constellation={c.name} "
            f"ch1={ch1[0]}:{ch1[1]!r} ch2={ch2[0]}:{ch2[1]!r} seed={args.seed}",
            f"# max_abs_log10_deviation={dev!r}", UNITS]
    _write(args.out, _csv(head, ["gamma", "post_fec_ser", "frames", "symbol_errors",
                                 "frame_errors"],
                          [[r.gamma, r.post_fec_ser, r.frames, r.symbol_errors, r.frame_errors]
                           for r in rows]))
    _manifest(args, [args.out], extra={"max_deviation": dev, "ch2_esn0_db": ch2[1]})
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="nbfec", description="NB-LDPC post-FEC SER prediction "
                                 "from mutual-information thresholds")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=True, code=False, stop=False):
        p.add_argument("--out", required=True, help="output CSV path")
        if seed:
            p.add_argument("--seed", type=int, required=True)
        if code:
            p.add_argument("--code", help="code file or shipped preset (r070, r080, r090)")
            p.add_argument("--rate", type=float, help="build a code of this design rate")
            p.add_argument("--n", type=int, default=5000, help="target code length (symbols)")
            p.add_argument("--code-seed", type=int, default=1)
            p.add_argument("--check-degree", type=int)
        if stop:
            p.add_argument("--workers", type=int, default=default_workers())
            p.add_argument("--target-errors", type=int, default=100)
            p.add_argument("--min-frame-errors", type=int, default=10)
            p.add_argument("--max-frames", type=int, default=2000)
            p.add_argument("--metric-k", type=float,
                           help="fixed Gaussian metric variance (default: matched)")

    cons_help = f"comma list of built-ins {BUILTIN} or constellation files"
    for name, fn, hlp in (("simulate", cmd_simulate, "AWGN sweep: metrics and post-FEC SER"),
                          ("dmc", cmd_dmc, "hard-decision (DMC) sweep")):
        p = sub.add_parser(name, help=hlp)
        common(p, code=True, stop=True)
        p.add_argument("--constellation", required=True, help=cons_help)
        p.add_argument("--esn0", required=True, help="Es/N0 grid in dB, start:step:stop")
        p.add_argument("--dmc-out", help="also write transition matrices (dmc only)")
        p.add_argument("--dmc-samples", type=int, default=10**6)
        p.set_defaults(func=fn)

    p = sub.add_parser("calibrate", help="MI threshold at a target post-FEC SER")
    common(p, code=True, stop=True)
    p.add_argument("--constellation", default="C1,C2,C3", help=cons_help)
    p.add_argument("--target-ser", type=float, default=1e-3)
    p.add_argument("--esn0", help="Es/N0 grid (default: chosen from an MI grid)")
    p.add_argument("--mi-offsets", default="-0.15:0.03:0.21",
                   help="MI offsets around the expected threshold for the default grid")
    p.add_argument("--no-validate", action="store_true",
                   help="do not abort on non-monotone points")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("analyze", help="metrics of a measurement database")
    common(p, seed=False)
    p.add_argument("--db", required=True)
    p.add_argument("--constellation", help="override the constellation named in the db")
    p.add_argument("--metric-k", type=float, help="Gaussian metric variance (default 1/2)")
    p.add_argument("--nu-bracket", help="lo,hi search bracket for nu")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("predict", help="post-FEC SER from MI and a calibration curve")
    common(p, seed=False)
    p.add_argument("--curve", required=True)
    p.add_argument("--mi", help="MI values in bits (grid syntax)")
    p.add_argument("--db", help="take the MI from a measurement database")
    p.add_argument("--constellation")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("decode-db", help="decode a measurement database")
    common(p, code=True)
    p.add_argument("--db", required=True)
    p.add_argument("--constellation")
    p.set_defaults(func=cmd_decode_db)

    p = sub.add_parser("universality", help="post-FEC SER versus channel mixing fraction")
    common(p, code=True)
    p.add_argument("--constellation", required=True)
    p.add_argument("--ch1", required=True, help="kind:esn0_db, kind is awgn or hd")
    p.add_argument("--ch2", required=True, help="kind[:esn0_db]; omitted Es/N0 matches MI")
    p.add_argument("--gamma", default="0:0.25:1")
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--mi-tol", type=float, default=0.02)
    p.set_defaults(func=cmd_universality)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return int(args.func(args) or 0)
    except (CliError, OSError, ValueError) as exc:
        print(f"nbfec {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
