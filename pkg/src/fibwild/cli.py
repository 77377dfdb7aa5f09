"""Batch front end: sharded runs, endpoint files and the end-to-end proof driver.

Commands keep the per-command single-letter parameters of the original
program suite (N, M, K mean different things in different commands). Data
files live in ``$FIBWILD_DATA`` (default ``~/Data``); shard outputs go to
the working directory unless ``--outdir`` is given. Every float is written
as a hex literal, so reading back is bit exact and reruns are byte identical.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attractor import (
    BoundReport,
    SegmentSet,
    TrichotomyVerdict,
    eta_from_segments,
    eta_segments,
    exit_targets,
    map_kernel,
    preimage_set,
    return_pullback,
    returning_levels,
    shard_range,
    trichotomy,
    zeta_from_complement,
    zeta_from_lower_segments,
    zeta_segments,
)
from .renorm import RenormElement, read_element, write_element

__all__ = [
    "CliError",
    "MissingData",
    "ShardOutOfRange",
    "CorruptEndpointFile",
    "JobShard",
    "Profile",
    "PROFILES",
    "data_dir",
    "degree_label",
    "write_endpoints",
    "read_endpoints",
    "write_shard_output",
    "read_shard_output",
    "save_element",
    "load_element",
    "main",
]


class CliError(Exception):
    pass


class MissingData(CliError):
    pass


class ShardOutOfRange(CliError):
    pass


class CorruptEndpointFile(CliError):
    pass


# ---------------------------------------------------------------------------
# paths and shards
# ---------------------------------------------------------------------------


def data_dir() -> Path:
    return Path(os.environ.get("FIBWILD_DATA", Path.home() / "Data"))


def degree_label(D: float) -> str:
    """Canonical file label of a degree, so 3.8 and 3.80 name the same files."""
    return f"{float(D):g}"


@dataclass(frozen=True)
class JobShard:
    """The i-th of m shards over p pieces (1-based i); the last shard takes the remainder."""

    m: int
    i: int

    def __post_init__(self):
        if self.m < 1 or not 1 <= self.i <= self.m:
            raise ShardOutOfRange(f"shard {self.i} out of range for {self.m} shards")

    def range(self, p: int) -> tuple[int, int]:
        return shard_range(p, self.m, self.i)


def _orient(name: str) -> int:
    return {"G": -1, "F": 1}[name]


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def _hex_lines(x: np.ndarray) -> str:
    return "".join(f"{float(v).hex()}\n" for v in x)


def _read_hex_column(path: Path) -> np.ndarray:
    if not path.exists():
        raise MissingData(f"missing data file {path}")
    vals = []
    for k, line in enumerate(path.read_text().splitlines()):
        line = line.strip()
        if not line:
            continue
        try:
            vals.append(float.fromhex(line))
        except ValueError as exc:
            raise CorruptEndpointFile(f"{path}:{k + 1}: not a hex float: {line!r}") from exc
    return np.array(vals, dtype=np.float64)


def write_endpoints(left: Path, right: Path, lo: np.ndarray, hi: np.ndarray) -> None:
    """One hex float per line; the k-th lines of both files form the k-th segment."""
    left.parent.mkdir(parents=True, exist_ok=True)
    left.write_text(_hex_lines(lo))
    right.write_text(_hex_lines(hi))


def read_endpoints(left: Path, right: Path) -> tuple[np.ndarray, np.ndarray]:
    lo = _read_hex_column(left)
    hi = _read_hex_column(right)
    if lo.size != hi.size:
        raise CorruptEndpointFile(f"{left} has {lo.size} lines but {right} has {hi.size}")
    if np.any(lo > hi):
        raise CorruptEndpointFile(f"{left}: a left endpoint exceeds its right endpoint")
    return lo, hi


def read_segments(left: Path, right: Path) -> SegmentSet:
    lo, hi = read_endpoints(left, right)
    return SegmentSet(lo, hi)


def write_shard_output(path: Path, header: dict, S: SegmentSet) -> None:
    """Header lines ``key value`` then one ``lo hi`` hex pair per segment."""
    lines = [f"{k} {v}" for k, v in header.items()]
    lines.append(f"segments {len(S)}")
    lines += [f"{float(a).hex()} {float(b).hex()}" for a, b in S.pairs()]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def read_shard_output(path: Path) -> tuple[dict, SegmentSet]:
    if not path.exists():
        raise MissingData(f"missing shard output {path}")
    rows = path.read_text().splitlines()
    header: dict = {}
    k = 0
    while k < len(rows) and not rows[k].startswith("segments "):
        key, _, val = rows[k].partition(" ")
        header[key] = val
        k += 1
    if k == len(rows):
        raise CorruptEndpointFile(f"{path}: no segment count line")
    count = int(rows[k].split()[1])
    body = [r for r in rows[k + 1 :] if r.strip()]
    if len(body) != count:
        raise CorruptEndpointFile(f"{path}: expected {count} segments, found {len(body)}")
    pairs = np.array([[float.fromhex(p) for p in r.split()] for r in body], dtype=np.float64).reshape(-1, 2)
    return header, SegmentSet(pairs[:, 0], pairs[:, 1])


def save_element(E: RenormElement, certificate=None, root: Path | None = None) -> None:
    """Write psi_D, phi_D, data_D and, when given, the certificate report certificate_D."""
    root = data_dir() if root is None else root
    write_element(E, root)
    if certificate is not None:
        (root / f"certificate_{degree_label(E.d)}").write_text(certificate.report())


def load_element(D: float, root: Path | None = None) -> RenormElement:
    root = data_dir() if root is None else root
    lab = degree_label(D)
    for name in ("psi", "phi", "data"):
        if not (root / f"{name}_{lab}").exists():
            raise MissingData(f"missing {root / f'{name}_{lab}'}; run `fibwild fixpoint {D}` first")
    cert = root / f"certificate_{lab}"
    if cert.exists() and "valid True" not in cert.read_text():
        raise MissingData(f"{cert} records a failed certificate")
    try:
        return read_element(D, root)
    except (IndexError, ValueError) as exc:
        raise CorruptEndpointFile(f"{root / f'data_{lab}'}: malformed element data") from exc


def _certify(D: float, N: int, K: int, delta: float):
    from .fixpoint import certify_fixed_point

    return certify_fixed_point(D, N=N, K=K, delta=delta)


def _element_or_certify(D: float, N: int, K: int, delta: float) -> RenormElement:
    try:
        return load_element(D)
    except MissingData:
        run = _certify(D, N, K, delta)
        if not run.certificate.valid:
            raise
        save_element(run.element, run.certificate)
        return run.element


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _level(L: int) -> int:
    if L < 1:
        raise CliError("L must be at least 1 (the level is L + 1)")
    return L + 1


def _outdir(args) -> Path:
    return Path(args.outdir) if args.outdir else Path.cwd()


def _zeta_names(d: float, n: int, i: int, prefix: str = "") -> tuple[Path, Path]:
    root = data_dir()
    lab = degree_label(d)
    left = "lleftpoints" if prefix == "reduced" else f"{prefix}leftpoints"
    right = "rrightpoints" if prefix == "reduced" else f"{prefix}rightpoints"
    return root / f"{left}_zeta_{lab}_{n}_{i}", root / f"{right}_zeta_{lab}_{n}_{i}"


def cmd_fixpoint(args) -> int:
    run = _certify(args.D, args.N, args.K, args.delta)
    cert = run.certificate
    print(cert.report(), end="")
    if not cert.valid:
        print("certificate failed", file=sys.stderr)
        return 1
    save_element(run.element, cert)
    print(f"wrote element files for d={degree_label(args.D)} to {data_dir()}")
    return 0


def cmd_koebe(args) -> int:
    from .distortion import koebe_constant, schwarzian_nonpositive

    E = load_element(args.D)
    if not schwarzian_nonpositive(E):
        print("Schwarzian sign not certified", file=sys.stderr)
        return 1
    b = koebe_constant(E)
    print(f"tau {b.tau}")
    print(f"C {b.C!r}")
    return 0


def _eta_name(D, M, n, i, lower):
    kind = "output_eta_lower" if lower else "output_eta"
    return f"{kind}.{degree_label(D)}.{M}.{n}.{i}"


def cmd_eta(args) -> int:
    n = _level(args.L)
    shard = JobShard(args.m, args.i)
    E = load_element(args.D)
    upper = not args.lower
    r = eta_segments(E, n, args.M, args.N, args.F, upper, (shard.m, shard.i), _orient(args.orientation))
    header = {"kind": "eta_upper" if upper else "eta_lower", "d": degree_label(args.D), "n": n, "M": args.M,
              "N": args.N, "F": args.F, "m": shard.m, "i": shard.i, "orientation": args.orientation, **r.stats}
    out = _outdir(args) / _eta_name(args.D, args.M, n, shard.i, args.lower)
    write_shard_output(out, header, r.segments)
    print(out)
    return 0


def cmd_zeta_below(args) -> int:
    n = _level(args.L)
    shard = JobShard(args.m, args.i)
    E = load_element(args.D)
    r = zeta_segments(E, n, args.M, args.Z, args.X, args.F1, args.F2, args.avoid, (shard.m, shard.i),
                      _orient(args.orientation))
    header = {"kind": "zeta_lower", "d": degree_label(args.D), "n": n, "M": args.M, "Z": args.Z, "X": args.X,
              "F1": args.F1, "F2": args.F2, "m": shard.m, "i": shard.i, "orientation": args.orientation, **r.stats}
    if args.avoid is not None:
        header["avoid"] = args.avoid
    out = _outdir(args) / f"output_zeta_below.{degree_label(args.D)}.{args.M}.{n}.{shard.i}"
    write_shard_output(out, header, r.segments)
    print(out)
    return 0


def merge_shards(paths: list[Path]) -> tuple[dict, SegmentSet]:
    """Union of the outputs of shards 1..m; the header of the first file is kept."""
    headers, sets = zip(*(read_shard_output(p) for p in paths))
    m = len(paths)
    for k, h in enumerate(headers, start=1):
        if h.get("m") != str(m) or h.get("i") != str(k):
            raise ShardOutOfRange(f"{paths[k - 1]} is shard {h.get('i')} of {h.get('m')}, expected {k} of {m}")
    return headers[0], SegmentSet.empty().union(*sets)


def cmd_merge(args) -> int:
    n = _level(args.L)
    E = load_element(args.D)
    t = map_kernel(E, _orient(args.orientation)).t
    root = _outdir(args)
    if args.kind == "zeta_below":
        paths = [root / f"output_zeta_below.{degree_label(args.D)}.{args.M}.{n}.{i}" for i in range(1, args.m + 1)]
        header, S = merge_shards(paths)
        rep = BoundReport(n, zeta_lo=zeta_from_lower_segments(S, t), parameters={"kind": "zeta_lower"})
    else:
        lower = args.kind == "eta_lower"
        paths = [root / _eta_name(args.D, args.M, n, i, lower) for i in range(1, args.m + 1)]
        header, S = merge_shards(paths)
        lo, hi = eta_from_segments(S, t, not lower)
        rep = BoundReport(n, lo, hi, parameters={"kind": args.kind})
    print(rep.to_text(), end="")
    return 0


def cmd_preimages_zeta(args) -> int:
    n = _level(args.l)
    if args.n < 1:
        raise CliError("preimage depth must be at least 1")
    E = load_element(args.d)
    levels = returning_levels(E, n, args.n, _orient(args.orientation))[1:]
    lo = np.concatenate([S.lo for S in levels])
    hi = np.concatenate([S.hi for S in levels])
    write_endpoints(*_zeta_names(args.d, n, 0), lo, hi)
    Q = lo.size - len(levels[-1]) + 1
    P = lo.size
    print(Q, P)
    return 0


def cmd_preimages_zeta_next(args) -> int:
    n = _level(args.L)
    if args.M != args.P - args.Q + 1:
        raise CliError(f"M = {args.M} does not match the index range {args.Q}..{args.P}")
    if not 1 <= args.i <= args.M:
        raise ShardOutOfRange(f"copy {args.i} out of range 1..{args.M}")
    E = load_element(args.D)
    K = map_kernel(E, _orient(args.orientation))
    lo, hi = read_endpoints(*_zeta_names(args.D, n, 0))
    j = args.Q + args.i - 2
    if not 0 <= j < lo.size:
        raise ShardOutOfRange(f"interval index {j + 1} beyond the {lo.size} stored intervals")
    cur = SegmentSet(lo[j : j + 1], hi[j : j + 1])
    outs_lo, outs_hi = [], []
    for _ in range(args.K):
        cur = preimage_set(K, cur)
        outs_lo.append(cur.lo)
        outs_hi.append(cur.hi)
    write_endpoints(*_zeta_names(args.D, n, args.i), np.concatenate(outs_lo or [np.empty(0)]),
                    np.concatenate(outs_hi or [np.empty(0)]))
    return 0


def cmd_reduce_intervals(args) -> int:
    n = _level(args.l)
    sets = [read_segments(*_zeta_names(args.d, n, i)) for i in range(args.o + 1)]
    U = SegmentSet.empty().union(*sets)
    p = len(U)
    for i in range(args.o + 1):
        j0, j1 = shard_range(p, args.o + 1, i + 1)
        write_endpoints(*_zeta_names(args.d, n, i, "reduced"), U.lo[j0:j1], U.hi[j0:j1])
    print(p)
    return 0


def cmd_preimages_ren_zeta_next(args) -> int:
    n = _level(args.L)
    if not 0 <= args.i <= args.M:
        raise ShardOutOfRange(f"copy {args.i} out of range 0..{args.M}")
    orient = _orient(args.orientation)
    E = load_element(args.D)
    W = read_segments(*_zeta_names(args.D, n, args.i, "reduced"))
    V = exit_targets(E, n, W, orient)
    B = return_pullback(E, n, V, args.K, orient)
    write_endpoints(*_zeta_names(args.D, n, args.i, "renorm_"), B.lo, B.hi)
    return 0


def cmd_compute_zeta(args) -> int:
    n = _level(args.l)
    orient = _orient(args.orientation)
    E = load_element(args.d)
    B = SegmentSet.empty().union(*(read_segments(*_zeta_names(args.d, n, i, "renorm_")) for i in range(args.o + 1)))
    t = map_kernel(E, orient).t
    rep = BoundReport(n, zeta_hi=zeta_from_complement(B, t),
                      parameters={"kind": "zeta_upper", "K": args.m, "files": args.o + 1, "segments": len(B)})
    text = rep.to_text()
    (data_dir() / f"report_zeta_{degree_label(args.d)}_{n}").write_text(text)
    print(text, end="")
    return 0


# ---------------------------------------------------------------------------
# end-to-end driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Profile:
    """Budgets of a proof run: eta (M, N), zeta from below (Mz, Z = X) and from above (N_pre, K_ret)."""

    M: int
    N: int
    Mz: int
    Z: int
    N_pre: int
    K_ret: int
    cutoff: float = 1e-3

    def starved(self, budget: int) -> "Profile":
        b = int(budget)
        return Profile(b, b, b, b, min(self.N_pre, b), min(self.K_ret, b), self.cutoff)


PROFILES = {
    "desk": Profile(M=20000, N=2000, Mz=2000, Z=2000, N_pre=10, K_ret=7),
    "overnight": Profile(M=200000, N=20000, Mz=20000, Z=20000, N_pre=14, K_ret=9),
    "proof": Profile(M=2000000, N=100000, Mz=200000, Z=100000, N_pre=16, K_ret=11),
}

DEFAULT_LEVEL = {3.8: 9, 5.1: 4}
ELEMENT_DEGREE = {3.8: 100, 5.1: 160}


def _shard_job(job):
    kind, E, n, p, shard, orient = job
    if kind == "zeta":
        return zeta_segments(E, n, p.Mz, p.Z, p.Z, p.cutoff, p.cutoff, None, shard, orient).segments
    return eta_segments(E, n, p.M, p.N, p.cutoff, kind == "eta_upper", shard, orient).segments


def _sharded(kind, E, n, p, orient, shards, workers) -> SegmentSet:
    jobs = [(kind, E, n, p, (shards, i), orient) for i in range(1, shards + 1)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_shard_job, jobs))
    else:
        parts = [_shard_job(j) for j in jobs]
    return SegmentSet.empty().union(*parts)


def prove(D: float, profile: Profile, n: int, orientation: int = -1, shards: int = 1, workers: int = 1,
          log=print) -> tuple[int, BoundReport | None, TrichotomyVerdict | None]:
    """Fixed point, Schwarzian sign, Koebe constant, eta and zeta bounds, verdict; returns (exit code, report, verdict)."""
    from .distortion import koebe_constant, schwarzian_nonpositive

    deg = ELEMENT_DEGREE.get(float(D), 160)
    try:
        E = _element_or_certify(D, deg, deg, 1e-10)
    except MissingData as exc:
        log(f"certificate failed: {exc}")
        return 1, None, None
    if not schwarzian_nonpositive(E):
        log("Schwarzian sign not certified")
        return 1, None, None
    C = koebe_constant(E).C
    log(f"C = {C!r}")
    t = map_kernel(E, orientation).t
    up = _sharded("eta_upper", E, n, profile, orientation, shards, workers)
    lo = _sharded("eta_lower", E, n, profile, orientation, shards, workers)
    eta_hi = eta_from_segments(up, t, True)[1] if n > 1 else 1.0
    eta_lo = eta_from_segments(lo, t, False)[0] if n > 1 else 1.0
    zl = _sharded("zeta", E, n, profile, orientation, shards, workers)
    zeta_lo = zeta_from_lower_segments(zl, t)
    levels = returning_levels(E, n, profile.N_pre, orientation)
    W = SegmentSet.empty().union(*levels[1:])
    B = return_pullback(E, n, exit_targets(E, n, W, orientation), profile.K_ret, orientation)
    zeta_hi = zeta_from_complement(B, t)
    params = {"d": degree_label(D), "C": repr(C), **{k: getattr(profile, k) for k in profile.__dataclass_fields__}}
    rep = BoundReport(n, eta_lo, eta_hi, zeta_lo, max(zeta_hi, zeta_lo), params)
    verdict = trichotomy(rep, C)
    log(rep.to_text().rstrip())
    log(f"verdict {verdict.name}")
    code = 2 if verdict is TrichotomyVerdict.Indeterminate_Case2Band else 0
    return code, rep, verdict


def cmd_prove(args) -> int:
    p = PROFILES[args.profile]
    if args.budget is not None:
        p = p.starved(args.budget)
    n = args.n if args.n is not None else DEFAULT_LEVEL.get(float(args.D), 4)
    code, rep, verdict = prove(args.D, p, n, _orient(args.orientation), args.shards, args.workers)
    if rep is not None:
        out = data_dir() / f"report_prove_{degree_label(args.D)}_{n}_{args.profile}"
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(rep.to_text() + f"verdict = {verdict.name}\n")
    return code


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fibwild", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, *positional, help_=None):
        p = sub.add_parser(name, help=help_)
        for arg, typ, h in positional:
            p.add_argument(arg, type=typ, help=h)
        p.add_argument("--orientation", choices=("G", "F"), default="G", help="sign of the J-branch (default G)")
        p.set_defaults(func=func)
        return p

    p = add("fixpoint", cmd_fixpoint, ("D", float, "degree of the power map"), help_="certify the fixed point and write its data files")
    p.add_argument("--N", type=int, default=160, help="truncation degree")
    p.add_argument("--K", type=int, default=160, help="size of the finite basis block")
    p.add_argument("--delta", type=float, default=1e-10, help="radius of the contraction ball")

    add("koebe", cmd_koebe, ("D", float, "degree"), help_="certify the Schwarzian sign and print the Koebe constant")

    D = ("D", float, "degree of the power map")
    L = ("L", int, "L + 1 is the renormalization level n")
    shard = [("m", int, "total number of copies"), ("i", int, "index of this copy (1..m)")]

    p = add("eta", cmd_eta, D, L, ("M", int, "number of pieces of T_1"), ("N", int, "maximum iteration time"),
            ("F", float, "refinement size cutoff relative to a piece"), *shard, help_="one shard of the eta scan")
    p.add_argument("--lower", action="store_true", help="certify the lower bound instead of the upper one")
    p.add_argument("--outdir", default=None)

    p = add("zeta_below", cmd_zeta_below, D, L, ("M", int, "number of pieces of T_1"),
            ("Z", int, "iteration budget of the first stage"), ("X", int, "iteration budget of the second stage"),
            ("F1", float, "first-stage refinement cutoff"), ("F2", float, "second-stage refinement cutoff"), *shard,
            help_="one shard of the zeta lower-bound scan")
    p.add_argument("--avoid", type=int, default=None, help="also avoid T_{n+avoid}")
    p.add_argument("--outdir", default=None)

    p = add("merge", cmd_merge, D, L, ("M", int, "number of pieces"), ("m", int, "number of shards"),
            help_="union of shard outputs and the resulting bound")
    p.add_argument("--kind", choices=("eta_upper", "eta_lower", "zeta_below"), default="eta_upper")
    p.add_argument("--outdir", default=None)

    add("preimages_zeta", cmd_preimages_zeta, ("d", float, "degree"), ("l", int, "l + 1 is the level n"),
        ("n", int, "depth of preimages of T_n"), help_="preimages of T_n; prints the first and last index of the deepest level")
    p = add("preimages_zeta_next", cmd_preimages_zeta_next, D, L, ("Q", int, "first index of the deepest level"),
            ("P", int, "last index of the deepest level"), ("M", int, "number of intervals of the deepest level"),
            ("K", int, "preimage depth"), ("i", int, "copy index (1..M)"),
            help_="preimages of one deepest-level interval")
    add("reduce_intervals", cmd_reduce_intervals, ("d", float, "degree"), ("l", int, "l + 1 is the level n"),
        ("o", int, "index of the last endpoint file"), help_="union of endpoint files 0..o, split into o + 1 files")
    add("preimages_ren_zeta_next", cmd_preimages_ren_zeta_next, D, L, ("M", int, "index of the last reduced file"),
        ("K", int, "depth of preimages under the first-return map"), ("i", int, "copy index (0..M)"),
        help_="pullback of the exit targets of one reduced file")
    add("compute_zeta", cmd_compute_zeta, ("d", float, "degree"), ("l", int, "l + 1 is the level n"),
        ("o", int, "index of the last renorm file"), ("m", int, "pullback depth used"),
        help_="union of the pullbacks and the zeta upper bound")

    p = add("prove", cmd_prove, D, help_="end-to-end run; exit 0 on Case 1 or 3, 2 if indeterminate, 1 on a failed certificate")
    p.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    p.add_argument("--budget", type=int, default=None, help="override every budget with this value")
    p.add_argument("--n", type=int, default=None, help="renormalization level")
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
