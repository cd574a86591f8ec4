"""Command-line front end: file I/O, corpus sweeps, report emission.

Every subcommand builds a plain JSON payload, runs it through one of the
``run_*`` helpers below (the HTTP service reuses the same helpers), wraps
the result in a manifest and prints it.  Exit codes: 0 success/holds, 2 a
verdict that does not hold (or an unsound search), 1 usage or I/O trouble.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import random
import sys
import tempfile
import time
import urllib.error
import urllib.request
from fractions import Fraction
from typing import List, Optional, Tuple

from . import __version__
from .constants import (
    RefinementGrid,
    a1_constant,
    a1_plus_constant,
    ap_constant,
    fujii_wilson_constant,
    fujii_wilson_plus_constant,
    gurov_reshetnyak,
    khrushchev_constant,
)
from .core import (
    Cube,
    DomainError,
    Interval,
    ParseError,
    RangeError,
    StepWeight,
    as_fraction,
    canonical_json,
    parse_step_weight,
)
from .dyadicnd import (
    DyadicWeight,
    dyadic_fujii_wilson,
    parse_dyadic_weight,
    verify_dyadic_rhi,
    verify_superlevel_lemma,
)
from .extremal import SearchConfig, sharpness_search
from .maximal1d import Op, maximal_profile, profile_csv
from .mugrid import (
    MuCellWeight,
    build_mu_grid,
    grid_to_json,
    mu_strong_fujii_wilson,
    parse_measure,
    verify_mu_rhi,
)
from .rhi import TheoremId, _coerce_id, admissible_range, verify, verify_bsw

_ENGINE_ERRORS = (ParseError, RangeError, DomainError)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# payload helpers


def _frac(payload: dict, key: str) -> Optional[Fraction]:
    v = payload.get(key)
    return None if v is None else as_fraction(v)


def _interval(v) -> Interval:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise DomainError(f"an interval needs two endpoints, got {v!r}")
    return Interval(as_fraction(v[0]), as_fraction(v[1]))


def _load_weight(payload: dict):
    data = payload.get("weight")
    if data is None:
        raise DomainError("no weight supplied")
    kind = data.get("kind") if isinstance(data, dict) else None
    if kind == "step":
        return parse_step_weight(data)
    if kind == "dyadic":
        return parse_dyadic_weight(data)
    if kind == "mucells":
        measures = payload.get("measures")
        if not measures:
            raise DomainError("a mucells weight needs per-axis measures (--measure)")
        mus = [parse_measure(m) for m in measures]
        try:
            depth = int(data["depth"])
            cells = data["cells"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed mucells weight: missing {exc}") from None
        grid = build_mu_grid(mus, None, depth)
        return MuCellWeight(grid, tuple(as_fraction(c) for c in cells))
    raise ParseError(f"unsupported weight kind {kind!r}")


# ---------------------------------------------------------------------------
# operations (shared with the HTTP service)


def run_verify(payload: dict) -> dict:
    w = _load_weight(payload)
    theorem = payload.get("theorem")
    if not theorem:
        raise DomainError("verify needs a theorem id")
    kwargs = dict(
        r=_frac(payload, "r"),
        lam0=_frac(payload, "lam0"),
        delta=_frac(payload, "delta"),
        depth=int(payload.get("depth", 6)),
        tol=payload.get("tol"),
    )
    if payload.get("interval") is not None:
        kwargs["interval"] = _interval(payload["interval"])
    if payload.get("triple") is not None:
        kwargs["triple"] = tuple(as_fraction(x) for x in payload["triple"])
    if payload.get("regions") is not None:
        kwargs["regions"] = [_interval(x) for x in payload["regions"]]

    if isinstance(w, DyadicWeight):
        if theorem == "dyadic.superlevel":
            v = verify_superlevel_lemma(w, tol=payload.get("tol"))
        elif _coerce_id(theorem) in (TheoremId.T4_2, TheoremId.T1_1):
            v = verify_dyadic_rhi(w, r=kwargs["r"], which=_coerce_id(theorem), tol=payload.get("tol"))
        else:
            raise DomainError(f"theorem {theorem} does not take a dyadic weight file")
    elif isinstance(w, MuCellWeight):
        if _coerce_id(theorem) is not TheoremId.COR4_3:
            raise DomainError(f"theorem {theorem} does not take a mucells weight file")
        v = verify_mu_rhi(w.grid, w, r=kwargs["r"], tol=payload.get("tol"))
    elif theorem == "bsw":
        if kwargs["r"] is None:
            raise DomainError("theorem bsw needs the exponent r")
        v = verify_bsw(w, kwargs["r"], interval=kwargs.get("interval"), tol=payload.get("tol"))
    else:
        v = verify(theorem, w, **kwargs)
    return v.to_json_dict()


_STEP_KINDS = {
    "a1": lambda w, grid, p: a1_constant(w),
    "a1plus": lambda w, grid, p: a1_plus_constant(w),
    "ap": lambda w, grid, p: ap_constant(w, p, grid),
    "fw": lambda w, grid, p: fujii_wilson_constant(w, grid),
    "fwplus": lambda w, grid, p: fujii_wilson_plus_constant(w, grid),
    "khrushchev": lambda w, grid, p: khrushchev_constant(w, grid),
    "gr": lambda w, grid, p: gurov_reshetnyak(w, grid),
}


def run_constants(payload: dict) -> dict:
    w = _load_weight(payload)
    kind = payload.get("kind", "fw")
    depth = int(payload.get("depth", 6))
    if isinstance(w, DyadicWeight):
        if kind != "fw":
            raise DomainError(f"dyadic weights support only the fw constant, not {kind!r}")
        return dyadic_fujii_wilson(w).to_json_dict()
    if isinstance(w, MuCellWeight):
        if kind != "fw":
            raise DomainError(f"cell weights support only the fw constant, not {kind!r}")
        return mu_strong_fujii_wilson(w.grid, w).to_json_dict()
    if kind not in _STEP_KINDS:
        raise DomainError(f"unknown constant kind {kind!r}; pick one of {sorted(_STEP_KINDS)}")
    p = _frac(payload, "p")
    if kind == "ap" and p is None:
        raise DomainError("the Ap constant needs --p")
    grid = RefinementGrid.for_weight(w, depth)
    return _STEP_KINDS[kind](w, grid, p).to_json_dict()


def _random_step_weight(rng: random.Random, pieces: int) -> StepWeight:
    cuts = sorted(rng.sample(range(1, 32), pieces - 1))
    bps = [Fraction(0)] + [Fraction(c, 32) for c in cuts] + [Fraction(1)]
    vals = [Fraction(rng.randint(1, 16)) for _ in range(pieces)]
    return StepWeight(tuple(bps), tuple(vals))


def _random_dyadic_weight(rng: random.Random, n: int, depth: int) -> DyadicWeight:
    cells = tuple(Fraction(rng.randint(1, 16)) for _ in range((1 << depth) ** n))
    return DyadicWeight(Cube.of([0] * n, 1), depth, cells)


def _midpoint_r(delta: Fraction, theorem, n: int) -> Fraction:
    bound = admissible_range(delta, theorem, n)
    if not bound.is_exact:  # delta = 1, range unbounded
        return Fraction(2)
    return 1 + (bound.exact - 1) / 2


# random sweeps cannot invent target regions or master-lemma thresholds
_SWEEP_UNSUPPORTED = {TheoremId.L2_2, TheoremId.EMB_COR_I, TheoremId.EMB_COR_II, TheoremId.COR4_3}
_SWEEP_TRIPLE = {TheoremId.T3_1_SECOND, TheoremId.T3_3_COR_SECOND}
_SWEEP_PLUS = {
    TheoremId.T3_1_FIRST,
    TheoremId.T3_1_SECOND,
    TheoremId.T3_3,
    TheoremId.T3_3_COR_FIRST,
    TheoremId.T3_3_COR_SECOND,
}
_SWEEP_NO_R = {
    TheoremId.T1_3,
    TheoremId.L_REARINFTY,
    TheoremId.WIK_BOUND,
    TheoremId.T_AINFTY_ENDPOINT,
    TheoremId.T_ONESIDED_ENDPOINT_A1,
    TheoremId.T_ONESIDED_ENDPOINT_AINFTY,
}


def run_sweep(payload: dict) -> dict:
    theorem = payload.get("theorem")
    if not theorem:
        raise DomainError("sweep needs a theorem id")
    bsw = theorem == "bsw"
    tid = None if bsw else _coerce_id(theorem)
    if tid in _SWEEP_UNSUPPORTED:
        raise DomainError(f"sweep cannot generate inputs for {theorem}")
    if payload.get("corpus", "random") != "random":
        raise DomainError("only the random corpus is implemented")
    count = int(payload.get("count", 100))
    seed = int(payload.get("seed", 0))
    rng = random.Random(seed)
    fixed_r = _frac(payload, "r")
    tol = payload.get("tol")

    verdicts = []
    if tid is TheoremId.T4_2:
        n = int(payload.get("n", 1))
        depth = int(payload.get("depth", 3))
        for _ in range(count):
            dw = _random_dyadic_weight(rng, n, depth)
            delta = dyadic_fujii_wilson(dw).value.exact
            r = fixed_r if fixed_r is not None else _midpoint_r(delta, tid, n)
            verdicts.append(verify_dyadic_rhi(dw, r=r, tol=tol))
    else:
        pieces = int(payload.get("pieces", 6))
        for _ in range(count):
            w = _random_step_weight(rng, pieces)
            if bsw:
                delta = a1_constant(w).value.exact
                r = fixed_r if fixed_r is not None else _midpoint_r(delta, TheoremId.T1_2, 1)
                verdicts.append(verify_bsw(w, r, tol=tol))
                continue
            kwargs = {"tol": tol}
            if tid in _SWEEP_TRIPLE:
                a, c = w.support.lo, w.support.hi
                b = a + (c - a) * Fraction(rng.randint(1, 15), 16)
                kwargs["triple"] = (a, b, c)
            if tid not in _SWEEP_NO_R:
                # delta here only picks a safe default r: the exact one-sided
                # or two-sided A1 constant dominates every grid lower bound
                # the verifier may use, and the range bound shrinks as delta
                # grows, so the midpoint below stays admissible either way.
                delta_kind = a1_plus_constant if tid in _SWEEP_PLUS else a1_constant
                delta = delta_kind(w).value.exact
                kwargs["r"] = fixed_r if fixed_r is not None else _midpoint_r(delta, tid, 1)
            verdicts.append(verify(tid, w, **kwargs))

    holding = sum(1 for v in verdicts if v.holds)
    worst = max((float(v.ratio) for v in verdicts), default=0.0)
    return {
        "theorem": theorem,
        "corpus": "random",
        "seed": seed,
        "count": count,
        "holds": holding,
        "worstRatio": worst,
        "failures": [v.to_json_dict() for v in verdicts if not v.holds][:10],
    }


def run_sharpness(payload: dict) -> dict:
    cfg = SearchConfig(
        variant=payload.get("variant", "t3.1.first"),
        delta=as_fraction(payload.get("delta", 2)),
        r=as_fraction(payload.get("r", Fraction(3, 2))),
        pieces=(int(payload["pieces"]) if payload.get("pieces") is not None else None),
        budget=int(payload.get("budget", 400)),
        seed=int(payload.get("seed", 0)),
    )
    result = sharpness_search(cfg)
    out = result.to_json_dict()
    out["sound"] = result.best_ratio <= 1 + cfg.tol
    return out


def run_grid(payload: dict) -> dict:
    measures = payload.get("measures")
    if not measures:
        raise DomainError("grid construction needs at least one measure file")
    mus = [parse_measure(m) for m in measures]
    root = payload.get("root")
    if root is not None:
        root = [_interval(iv) for iv in root]
    return grid_to_json(build_mu_grid(mus, root, int(payload.get("depth", 1))))


def run_profile(payload: dict) -> dict:
    w = _load_weight(payload)
    if not isinstance(w, StepWeight):
        raise DomainError("profiles are defined for step weights")
    op = Op(payload.get("op", "M"))
    iv = _interval(payload["interval"]) if payload.get("interval") is not None else w.support
    prof = maximal_profile(w, iv, op)
    return {"csv": profile_csv(w, prof, interior=int(payload.get("points", 8)))}


_RUNNERS = {
    "verify": run_verify,
    "constants": run_constants,
    "sweep": run_sweep,
    "sharpness": run_sharpness,
    "grid": run_grid,
    "profile": run_profile,
}


# ---------------------------------------------------------------------------
# manifest plumbing


def _sha256(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def _manifest(command: str, payload: dict, hashes: dict, results: list, started: float) -> dict:
    return {
        "command": command,
        "engineVersion": __version__,
        "inputs": hashes,
        "tolerance": payload.get("tol"),
        "depth": payload.get("depth"),
        "seed": payload.get("seed"),
        "wallClockSec": round(time.monotonic() - started, 6),
        "results": results,
    }


def _write_out(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".rhi-lab-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _post(server: str, command: str, payload: dict) -> dict:
    req = urllib.request.Request(
        f"{server.rstrip('/')}/{command}",
        data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return json.loads(resp.read().decode())
    except urllib.error.HTTPError as exc:
        body = exc.read().decode(errors="replace")
        try:
            detail = json.loads(body).get("detail", body)
        except json.JSONDecodeError:
            detail = body
        raise DomainError(f"server rejected the request: {detail}") from None
    except urllib.error.URLError as exc:
        raise OSError(f"cannot reach {server}: {exc.reason}") from None


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    top = _Parser(prog="rhi-lab", description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=f"rhi-lab {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="write the report here (atomically) instead of stdout")
        p.add_argument("--server", help="delegate computation to a running service URL")
        p.add_argument("--threads", type=int, help="worker cap (RHI_LAB_THREADS overrides)")
        p.add_argument("--tol", type=float, help="comparison tolerance for inexact verdicts")

    p = sub.add_parser("verify", help="check one inequality on one weight file")
    common(p)
    p.add_argument("--theorem", required=True)
    p.add_argument("--weight", required=True, help="step, dyadic or mucells JSON file")
    p.add_argument("--measure", action="append", help="CDF JSON file (one per axis)")
    p.add_argument("--r", help="exponent, e.g. 3/2")
    p.add_argument("--interval", nargs=2, metavar=("LO", "HI"))
    p.add_argument("--triple", nargs=3, metavar=("A", "B", "C"))
    p.add_argument("--region", action="append", nargs=2, metavar=("LO", "HI"), dest="regions")
    p.add_argument("--lam0", help="threshold for the superlevel hypothesis")
    p.add_argument("--delta", help="explicit constant when the theorem takes one")
    p.add_argument("--depth", type=int, default=6, help="grid refinement depth")

    p = sub.add_parser("constants", help="compute one weight constant")
    common(p)
    p.add_argument("--weight", required=True)
    p.add_argument("--measure", action="append")
    p.add_argument("--kind", default="fw", help="a1 a1plus ap fw fwplus khrushchev gr")
    p.add_argument("--p", help="exponent for --kind ap")
    p.add_argument("--depth", type=int, default=6)

    p = sub.add_parser("sweep", help="run one theorem over a random corpus")
    common(p)
    p.add_argument("--theorem", required=True)
    p.add_argument("--corpus", default="random")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r")
    p.add_argument("--n", type=int, default=1, help="dimension for dyadic corpora")
    p.add_argument("--depth", type=int, default=3, help="dyadic depth for dyadic corpora")
    p.add_argument("--pieces", type=int, default=6, help="piece count for step corpora")

    p = sub.add_parser("sharpness", help="search for near-extremal weights")
    common(p)
    p.add_argument("--variant", default="t3.1.first")
    p.add_argument("--delta", required=True)
    p.add_argument("--r", required=True)
    p.add_argument("--pieces", type=int)
    p.add_argument("--budget", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("grid", help="build and dump a half-mass grid")
    common(p)
    p.add_argument("--measure", action="append", required=True)
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--root", action="append", nargs=2, metavar=("LO", "HI"))

    p = sub.add_parser("profile", help="emit the exact maximal-function profile as CSV")
    common(p)
    p.add_argument("--weight", required=True)
    p.add_argument("--op", default="M", help="M, Mplus or Mminus")
    p.add_argument("--interval", nargs=2, metavar=("LO", "HI"))
    p.add_argument("--points", type=int, default=8, help="interior samples per piece")

    return top


def _read_json_file(path: str, hashes: dict, label: str):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {label} file {path}: {exc.strerror}") from None
    key = f"{label}:{os.path.basename(path)}"
    hashes[key] = _sha256(blob)
    try:
        return json.loads(blob.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{label} file {path} is not valid JSON: {exc}") from None


def _payload_from_args(ns: argparse.Namespace) -> Tuple[dict, dict]:
    hashes: dict = {}
    payload: dict = {}
    if getattr(ns, "weight", None):
        payload["weight"] = _read_json_file(ns.weight, hashes, "weight")
    if getattr(ns, "measure", None):
        payload["measures"] = [_read_json_file(m, hashes, "measure") for m in ns.measure]
    for key in ("theorem", "r", "lam0", "delta", "kind", "p", "corpus", "variant", "op"):
        v = getattr(ns, key, None)
        if v is not None:
            payload[key] = v
    for key in ("depth", "count", "seed", "n", "pieces", "budget", "points"):
        v = getattr(ns, key, None)
        if v is not None:
            payload[key] = v
    if getattr(ns, "tol", None) is not None:
        payload["tol"] = ns.tol
    if getattr(ns, "interval", None):
        payload["interval"] = list(ns.interval)
    if getattr(ns, "triple", None):
        payload["triple"] = list(ns.triple)
    if getattr(ns, "regions", None):
        payload["regions"] = [list(r) for r in ns.regions]
    if getattr(ns, "root", None):
        payload["root"] = [list(r) for r in ns.root]
    return payload, hashes


def _exit_code(command: str, result: dict) -> int:
    if command == "verify":
        return 0 if result.get("holds") else 2
    if command == "sweep":
        return 0 if result.get("holds") == result.get("count") else 2
    if command == "sharpness":
        return 0 if result.get("sound", True) else 2
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    started = time.monotonic()
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    if getattr(ns, "threads", None) is not None and "RHI_LAB_THREADS" not in os.environ:
        os.environ["RHI_LAB_THREADS"] = str(ns.threads)
    try:
        payload, hashes = _payload_from_args(ns)
        if ns.server:
            result = _post(ns.server, ns.command, payload)
        else:
            result = _RUNNERS[ns.command](payload)
        if ns.command == "profile":
            _write_out(result["csv"], ns.out)
            return 0
        manifest = _manifest(ns.command, payload, hashes, [result], started)
        _write_out(canonical_json(manifest), ns.out)
        return _exit_code(ns.command, result)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    except RangeError as exc:
        print(f"range error: {exc}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
