"""Command-line verbs: ``rate``, ``curve``, ``threshold`` and ``verify``.

Run as ``python -m qkdbounds <verb> ...``. Settings may come from a JSON
file (``--config`` or the ``QKDBOUNDS_CONFIG`` environment variable) whose
keys mirror the long flag names with dashes replaced by underscores;
explicit flags win over the file.

Exit codes: 0 success, 1 usage error, 2 abort (bound not positive),
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Any, Sequence

from . import postproc, singlephoton, verify, wcp
from .channel import ChannelParams
from .errors import DomainError, InfeasibleObservations, NoSignChange, ZeroWeightError

EXIT_OK, EXIT_USAGE, EXIT_ABORT, EXIT_VERIFY = 0, 1, 2, 3
CONFIG_ENV = "QKDBOUNDS_CONFIG"
CSV_HEADER = ("distance_km", "mu_opt", "q_opt", "rate_per_pulse", "abort")

DEFAULTS: dict[str, Any] = {
    "protocol": "bb84",
    "qber": None,
    "q": "0",
    "ad_block": None,
    "xor": False,
    "mu": "auto",
    "distance": 0.0,
    "alpha": 0.25,
    "eta_det": 0.1,
    "pdark": 1e-5,
    "visibility": 1.0,
    "decoy": False,
    "from_km": 0.0,
    "to_km": 0.0,
    "step": 1.0,
    "out": None,
    "format": "csv",
}
# config-file spellings that differ from the attribute names
_CONFIG_ALIASES = {"from": "from_km", "to": "to_km"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _sig(x: float) -> float:
    """Round to 12 significant digits."""
    if x is None or not math.isfinite(x) or x == 0:
        return x
    return float(f"{x:.12g}")


def _clean(obj):
    if isinstance(obj, float):
        return _sig(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def _dump(doc: dict, stream) -> None:
    stream.write(json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n")


def _add_common(p: argparse.ArgumentParser, channel_flags: bool = True) -> None:
    # defaults are None so that config values can fill the gaps
    p.add_argument("--protocol", choices=singlephoton.PROTOCOLS, default=None)
    p.add_argument("--q", default=None, help="flip probability in [0, 0.5] or 'auto'")
    p.add_argument("--config", default=None, help="JSON file with default settings")
    if channel_flags:
        p.add_argument("--mu", default=None, help="mean photon number or 'auto'")
        p.add_argument("--alpha", type=float, default=None, help="fiber loss in dB/km")
        p.add_argument("--eta-det", type=float, default=None)
        p.add_argument("--pdark", type=float, default=None)
        p.add_argument("--visibility", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qkdbounds", description="Lower bounds on QKD secret-key rates.")
    sub = parser.add_subparsers(dest="verb", parser_class=_Parser)
    sub.required = True

    rate = sub.add_parser("rate", help="evaluate one bound")
    rate.add_argument("mode", choices=("single", "wcp", "decoy"))
    _add_common(rate)
    rate.add_argument("--qber", type=float, default=None)
    rate.add_argument("--ad-block", type=int, default=None)
    rate.add_argument("--xor", action="store_true", default=None)
    rate.add_argument("--distance", type=float, default=None)

    curve = sub.add_parser("curve", help="sweep the per-pulse bound over distance")
    _add_common(curve)
    curve.add_argument("--decoy", action="store_true", default=None)
    curve.add_argument("--from", dest="from_km", type=float, default=None)
    curve.add_argument("--to", dest="to_km", type=float, default=None)
    curve.add_argument("--step", type=float, default=None)
    curve.add_argument("--out", default=None)
    curve.add_argument("--format", choices=("csv", "json"), default=None)

    thr = sub.add_parser("threshold", help="largest QBER with a positive single-photon bound")
    _add_common(thr, channel_flags=False)
    thr.add_argument("--ad-block", type=int, default=None, help="try block sizes 1..M")
    thr.add_argument("--xor", action="store_true", default=None)

    sub.add_parser("verify", help="run the oracle suites")
    return parser


def _load_config(path: str | None) -> dict[str, Any]:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return {_CONFIG_ALIASES.get(k, k.replace("-", "_")): v for k, v in data.items()}


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Merge built-in defaults, the config file and explicit flags (in rising priority)."""
    conf = _load_config(getattr(args, "config", None))
    unknown = set(conf) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    out = dict(DEFAULTS)
    out.update(conf)
    for key, val in vars(args).items():
        if val is not None and key in DEFAULTS:
            out[key] = val
    out["verb"] = args.verb
    if args.verb == "rate":
        out["mode"] = args.mode
    return _validate(out)


def _parse_q(raw) -> float | str:
    if isinstance(raw, str) and raw.strip().lower() == "auto":
        return "auto"
    try:
        q = float(raw)
    except (TypeError, ValueError):
        raise UsageError(f"--q must be a number in [0, 0.5] or 'auto', got {raw!r}") from None
    if not 0.0 <= q <= 0.5:
        raise UsageError(f"--q must lie in [0, 0.5], got {q}")
    return q


def _validate(cfg: dict[str, Any]) -> dict[str, Any]:
    if cfg["protocol"] not in singlephoton.PROTOCOLS:
        raise UsageError(f"unknown protocol {cfg['protocol']!r}")
    cfg["q"] = _parse_q(cfg["q"])
    if cfg["mu"] != "auto":
        try:
            cfg["mu"] = float(cfg["mu"])
        except (TypeError, ValueError):
            raise UsageError(f"--mu must be positive or 'auto', got {cfg['mu']!r}") from None
        if not cfg["mu"] > 0:
            raise UsageError("--mu must be positive")
    for key in ("eta_det", "pdark", "visibility"):
        if not 0.0 <= float(cfg[key]) <= 1.0:
            raise UsageError(f"--{key.replace('_', '-')} must lie in [0, 1]")
    if float(cfg["alpha"]) < 0 or float(cfg["distance"]) < 0:
        raise UsageError("--alpha and --distance must be non-negative")
    if cfg["ad_block"] is not None and int(cfg["ad_block"]) < 1:
        raise UsageError("--ad-block must be a positive integer")
    verb, mode = cfg["verb"], cfg.get("mode")
    if verb == "rate" and mode == "single":
        if cfg["qber"] is None:
            raise UsageError("rate single needs --qber")
        if cfg["ad_block"] is not None and cfg["protocol"] == "sarg":
            raise UsageError("advantage distillation is available for bb84 and six-state only")
    if (verb == "curve" or mode in ("wcp", "decoy")) and cfg["protocol"] == "six-state":
        raise UsageError("weak-coherent-pulse bounds exist for bb84 and sarg only")
    if verb == "curve":
        if not float(cfg["step"]) > 0:
            raise UsageError("--step must be positive")
        if cfg["format"] not in ("csv", "json"):
            raise UsageError("--format must be csv or json")
    if verb == "threshold" and cfg["xor"] and cfg["protocol"] == "sarg":
        raise UsageError("XOR blocking is available for bb84 and six-state only")
    return cfg


def _channel(cfg: dict[str, Any], length: float | None = None, mu: float = 0.1) -> ChannelParams:
    return ChannelParams(alpha=float(cfg["alpha"]), length=float(cfg["distance"] if length is None else length),
                         eta_det=float(cfg["eta_det"]), p_d=float(cfg["pdark"]),
                         V=float(cfg["visibility"]), mu=mu)


def _inputs(cfg: dict[str, Any], keys: Sequence[str]) -> dict[str, Any]:
    return {k: cfg[k] for k in keys}


_CHANNEL_KEYS = ("alpha", "eta_det", "pdark", "visibility")


def cmd_rate(cfg: dict[str, Any], stream=None) -> int:
    stream = stream or sys.stdout
    mode, protocol, q = cfg["mode"], cfg["protocol"], cfg["q"]
    if mode == "single":
        Q = float(cfg["qber"])
        if cfg["ad_block"] is not None or cfg["xor"]:
            m = int(cfg["ad_block"] or 1)
            lam = singlephoton._family_state(protocol, Q)
            best = singlephoton.best_rate_after_ad(lam, [m], "optimized" if q == "auto" else "fixed",
                                                   0.0 if q == "auto" else q, bool(cfg["xor"]))
            q_used = best["q"]
            rb = postproc.keyrate_after_ad(lam, m, q_used, bool(cfg["xor"]), method="lapack")
            value = float(best["value"])
            witness = {"m": m, "q": q_used, "p_succ": rb.witness["p_succ"], "xor": bool(cfg["xor"]),
                       "per_raw_bit": value * rb.witness["p_succ"] / m / (3 if cfg["xor"] else 1)}
        else:
            if q == "auto":
                rb = singlephoton.single_photon_rate_optimized(protocol, Q)
            else:
                rb = singlephoton.single_photon_rate(protocol, Q, q)
            value, witness = rb.value, dict(rb.witness)
        keys = ("protocol", "qber", "q", "ad_block", "xor")
        doc = {"value": value, "witness": witness, "abort": value <= 0, "unit": "bits per raw-key bit",
               "inputs": _inputs(cfg, keys)}
    else:
        decoy = mode == "decoy"
        if cfg["mu"] == "auto":
            mu, bound = wcp.optimize_mu(protocol, _channel(cfg), decoy, q)
        else:
            mu = float(cfg["mu"])
            q_fixed = q
            if q == "auto":
                q_fixed, _ = singlephoton.optimize_q(
                    lambda qq: wcp.evaluate(protocol, _channel(cfg, mu=mu), decoy, qq).value, n_grid=20, tol=1e-4)
            bound = wcp.evaluate(protocol, _channel(cfg, mu=mu), decoy, q_fixed)
        value = bound.value
        witness = dict(bound.witness, mu=mu)
        keys = ("protocol", "q", "mu", "distance") + _CHANNEL_KEYS
        doc = {"value": value, "witness": witness, "abort": bound.abort, "unit": "bits per pulse",
               "r_mu": bound.r_mu, "inputs": dict(_inputs(cfg, keys), mode=mode)}
    _dump(doc, stream)
    return EXIT_ABORT if doc["abort"] else EXIT_OK


def _distances(cfg: dict[str, Any]) -> list[float]:
    lo, hi, step = float(cfg["from_km"]), float(cfg["to_km"]), float(cfg["step"])
    if hi < lo:
        return []
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + k * step, 10) for k in range(n)]


def curve_rows(cfg: dict[str, Any]) -> list[dict[str, Any]]:
    """One row per distance, in sweep order."""
    rows = []
    protocol, q, decoy = cfg["protocol"], cfg["q"], bool(cfg["decoy"])
    for length in _distances(cfg):
        params = _channel(cfg, length=length)
        if cfg["mu"] == "auto":
            mu, bound = wcp.optimize_mu(protocol, params, decoy, q)
        else:
            mu = float(cfg["mu"])
            bound = wcp.evaluate(protocol, params.with_(mu=mu), decoy, 0.0 if q == "auto" else q)
        rows.append({"distance_km": length, "mu_opt": mu, "q_opt": bound.witness.get("q", 0.0),
                     "rate_per_pulse": bound.value, "abort": int(bound.abort)})
    return rows


def _fmt(x) -> str:
    if isinstance(x, int):
        return str(x)
    return repr(_sig(float(x)))


def render_curve(rows: list[dict[str, Any]], cfg: dict[str, Any]) -> str:
    if cfg["format"] == "json":
        keys = ("protocol", "q", "mu", "decoy", "from_km", "to_km", "step") + _CHANNEL_KEYS
        buf = io.StringIO()
        _dump({"rows": rows, "inputs": _inputs(cfg, keys)}, buf)
        return buf.getvalue()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([_fmt(row[k]) for k in CSV_HEADER])
    return buf.getvalue()


def cmd_curve(cfg: dict[str, Any], stream=None) -> int:
    stream = stream or sys.stdout
    text = render_curve(curve_rows(cfg), cfg)
    if cfg["out"]:
        try:
            with open(cfg["out"], "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {cfg['out']}: {exc}") from exc
    else:
        stream.write(text)
    return EXIT_OK


def cmd_threshold(cfg: dict[str, Any], stream=None) -> int:
    stream = stream or sys.stdout
    q = cfg["q"]
    blocks = range(1, int(cfg["ad_block"]) + 1) if cfg["ad_block"] else None
    res = singlephoton.threshold(cfg["protocol"], "optimized" if q == "auto" else "fixed",
                                 0.0 if q == "auto" else q, blocks, bool(cfg["xor"]))
    doc = {"qber": res.qber, "bracket": list(res.bracket), "trace_length": res.evaluations,
           "witness": res.witness, "inputs": _inputs(cfg, ("protocol", "q", "ad_block", "xor"))}
    _dump(doc, stream)
    return EXIT_OK


def cmd_verify(stream=None) -> int:
    stream = stream or sys.stdout
    results = verify.run_all()
    for r in results:
        stream.write(r.line() + "\n")
    ok = all(r.passed for r in results)
    stream.write(("all suites passed" if ok else "verification FAILED") + "\n")
    return EXIT_OK if ok else EXIT_VERIFY


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.verb == "verify":
            return cmd_verify()
        cfg = resolve(args)
        if args.verb == "rate":
            return cmd_rate(cfg)
        if args.verb == "curve":
            return cmd_curve(cfg)
        return cmd_threshold(cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, InfeasibleObservations, ZeroWeightError) as exc:
        print(f"qkdbounds: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoSignChange as exc:
        print(f"qkdbounds: {exc}", file=sys.stderr)
        return EXIT_ABORT
