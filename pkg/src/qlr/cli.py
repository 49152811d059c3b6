"""Command-line harness: synthesize instances, decompose matrices, run sweeps.

Exit codes: 0 on success, 1 on numerical failure, 2 on flag or input
validation errors (with a single-line diagnostic on stderr).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import Hessian, hessian_from_activations, k_for_rank, synth_activations
from .ensemble import (
    DEFAULT_D,
    DEFAULT_GAIN,
    DEFAULT_M,
    DEFAULT_N,
    DEFAULT_OUTLIERS,
    synth_instance,
    synth_weights,
)
from .linalg import NotFactorizableError
from .lowrank import InitStrategy
from .matfile import MatrixFileError, atomic_write_text, read_matrix, write_matrix
from .optimizer import OptimizerConfig, Trajectory, run
from .quantize import dequantize
from .report import lr_bits_label, summarize, trajectory_rows, write_report

INIT_CHOICES = ("zero", "lrapprox", "odlri")


class CliError(Exception):
    """Flag/validation problem; rendered as a single diagnostic line, exit 2."""


def _positive(value: int, flag: str) -> int:
    if value < 1:
        raise CliError(f"{flag} must be >= 1, got {value}")
    return value


def _bits(value: int, flag: str) -> int:
    if not 2 <= value <= 16:
        raise CliError(f"{flag} must be in [2, 16], got {value}")
    return value


def _lr_bits(value: int) -> int | None:
    # 16 means the factors stay unquantized; anything else is a grid width.
    if value == 16:
        return None
    return _bits(value, "--lr-bits")


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def qlr_threads() -> int:
    raw = os.environ.get("QLR_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        raise CliError(f"QLR_THREADS must be a positive integer, got {raw!r}")
    return value


def parse_seed_list(text: str) -> list[int]:
    """Comma-separated seeds; each token is an integer or an inclusive a..b range."""
    seeds: list[int] = []
    for token in text.split(","):
        token = token.strip()
        if ".." in token:
            lo_txt, _, hi_txt = token.partition("..")
            try:
                lo, hi = int(lo_txt), int(hi_txt)
            except ValueError:
                raise CliError(f"--seeds: bad range {token!r}") from None
            if hi < lo:
                raise CliError(f"--seeds: empty range {token!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            try:
                seeds.append(int(token))
            except ValueError:
                raise CliError(f"--seeds: bad seed {token!r}") from None
    if not seeds:
        raise CliError("--seeds must name at least one seed")
    return seeds


def resolve_k_mode(mode: str, rank: int, n: int) -> int:
    if mode == "paper":
        return k_for_rank(rank, n)
    if mode == "equal-rank":
        return rank
    if mode.startswith("fixed:"):
        try:
            return int(mode.split(":", 1)[1])
        except ValueError:
            raise CliError(f"--k-mode: bad fixed value in {mode!r}") from None
    raise CliError(f"--k-mode must be paper, fixed:K, or equal-rank, got {mode!r}")


def _check_k(k: int, rank: int, n: int, flag: str) -> int:
    if not 1 <= k <= min(rank, n):
        raise CliError(f"{flag}: k={k} must be in [1, min(rank, n)] = [1, {min(rank, n)}]")
    return k


def _strategy(init: str, k: int | None) -> InitStrategy:
    if init == "odlri":
        return InitStrategy.odlri(k)
    if k is not None:
        raise CliError(f"--k only applies to --init odlri, not {init!r}")
    return InitStrategy(init)


# ---------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    for flag, value in (("--m", args.m), ("--n", args.n), ("--d", args.d)):
        _positive(value, flag)
    if args.outliers < 0 or args.outliers > args.n:
        raise CliError(f"--outliers must be in [0, {args.n}], got {args.outliers}")
    if args.gain < 1:
        raise CliError(f"--gain must be >= 1, got {args.gain}")
    out = _out_dir(args.out)
    w = synth_weights(args.m, args.n, args.seed)
    x, idx = synth_activations(args.n, args.d, args.outliers, args.gain, args.seed)
    h = hessian_from_activations(x)
    write_matrix(out / "W.qlrm", w)
    write_matrix(out / "X.qlrm", x)
    write_matrix(out / "H.qlrm", h.mat)
    atomic_write_text(out / "outliers.txt", "".join(f"{i}\n" for i in idx))
    print(f"wrote W ({args.m}x{args.n}), X ({args.n}x{args.d}), H, outliers -> {out}")
    return 0


# ------------------------------------------------------------ decompose


def _load_problem(args) -> tuple[np.ndarray, Hessian]:
    if (args.hessian is None) == (args.calib is None):
        raise CliError("exactly one of --hessian or --calib is required")
    w = read_matrix(args.weights)
    if args.hessian is not None:
        try:
            h = Hessian(read_matrix(args.hessian))
        except ValueError as exc:
            raise CliError(f"--hessian: {exc}") from None
    else:
        h = hessian_from_activations(read_matrix(args.calib))
    if h.dim != w.shape[1]:
        raise CliError(
            f"--weights has {w.shape[1]} columns but the Hessian has dim {h.dim}"
        )
    return w, h


def _decompose_config(args, n: int) -> tuple[OptimizerConfig, int]:
    rank = _positive(args.rank, "--rank")
    _bits(args.q_bits, "--q-bits")
    lr_bits = _lr_bits(args.lr_bits)
    _positive(args.iters, "--iters")
    _positive(args.inner_iters, "--inner-iters")
    if args.init == "odlri":
        k = args.k if args.k is not None else k_for_rank(rank, n)
        _check_k(k, rank, n, "--k")
    else:
        if args.k is not None:
            raise CliError(f"--k only applies to --init odlri, not {args.init!r}")
        k = 0
    cfg = OptimizerConfig(
        rank=rank,
        outer_iters=args.iters,
        inner_iters=args.inner_iters,
        q_bits=args.q_bits,
        lr_bits=lr_bits,
        init=_strategy(args.init, k if args.init == "odlri" else None),
        seed=args.seed,
    )
    return cfg, k


def _write_run_artifacts(out: Path, traj: Trajectory, rows: list[str], manifest: dict) -> None:
    write_report(out / "report.csv", rows)
    write_matrix(out / "Q.qlrm", dequantize(traj.final_q))
    write_matrix(out / "L.qlrm", traj.final_factors.l)
    write_matrix(out / "R.qlrm", traj.final_factors.r)
    atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_decompose(args) -> int:
    w, h = _load_problem(args)
    cfg, k = _decompose_config(args, w.shape[1])
    out = _out_dir(args.out)
    traj = run(w, h, cfg)
    rows = trajectory_rows(
        traj,
        seed=args.seed,
        strategy=args.init,
        rank=cfg.rank,
        k=k,
        q_bits=cfg.q_bits,
        lr_bits=cfg.lr_bits,
    )
    manifest = {
        "command": "decompose",
        "qlr_version": __version__,
        "weights": str(args.weights),
        "hessian": None if args.hessian is None else str(args.hessian),
        "calib": None if args.calib is None else str(args.calib),
        "m": w.shape[0],
        "n": w.shape[1],
        "rank": cfg.rank,
        "q_bits": cfg.q_bits,
        "q_granularity": cfg.q_granularity.value,
        "lr_bits": lr_bits_label(cfg.lr_bits),
        "init": args.init,
        "k": k if args.init == "odlri" else None,
        "iters": cfg.outer_iters,
        "inner_iters": cfg.inner_iters,
        "seed": args.seed,
        "out": str(out),
        "final_q_scales": [float(s) for s in traj.final_q.scales],
        "final_act_err": traj.records[-1].act_err,
    }
    _write_run_artifacts(out, traj, rows, manifest)
    print(f"final act_err {traj.records[-1].act_err:.6g}, artifacts -> {out}")
    return 0


# ---------------------------------------------------------------- sweep


def _sweep_runs(inits: list[str], ranks: list[int], seeds: list[int]):
    for init in inits:
        for rank in ranks:
            for seed in seeds:
                yield init, rank, seed


def cmd_sweep(args) -> int:
    inits = [s.strip() for s in args.inits.split(",") if s.strip()]
    for init in inits:
        if init not in INIT_CHOICES:
            raise CliError(f"--inits: unknown strategy {init!r}")
    if not inits:
        raise CliError("--inits must name at least one strategy")
    try:
        ranks = [int(t) for t in args.ranks.split(",") if t.strip()]
    except ValueError:
        raise CliError(f"--ranks: must be a comma list of integers, got {args.ranks!r}") from None
    if not ranks:
        raise CliError("--ranks must name at least one rank")
    seeds = parse_seed_list(args.seeds)
    for flag, value in (("--m", args.m), ("--n", args.n), ("--d", args.d)):
        _positive(value, flag)
    if args.outliers < 0 or args.outliers > args.n:
        raise CliError(f"--outliers must be in [0, {args.n}], got {args.outliers}")
    if args.gain < 1:
        raise CliError(f"--gain must be >= 1, got {args.gain}")
    _bits(args.q_bits, "--q-bits")
    lr_bits = _lr_bits(args.lr_bits)
    _positive(args.iters, "--iters")
    _positive(args.inner_iters, "--inner-iters")
    for rank in ranks:
        _positive(rank, "--ranks")
        if "odlri" in inits:
            _check_k(resolve_k_mode(args.k_mode, rank, args.n), rank, args.n, "--k-mode")
    threads = qlr_threads()
    out = _out_dir(args.out)

    def one(task: tuple[str, int, int]) -> tuple[list[str], float]:
        init, rank, seed = task
        inst = synth_instance(args.m, args.n, args.d, args.outliers, args.gain, seed)
        k = resolve_k_mode(args.k_mode, rank, args.n) if init == "odlri" else 0
        cfg = OptimizerConfig(
            rank=rank,
            outer_iters=args.iters,
            inner_iters=args.inner_iters,
            q_bits=args.q_bits,
            lr_bits=lr_bits,
            init=_strategy(init, k if init == "odlri" else None),
            seed=seed,
        )
        traj = run(inst.w, inst.h, cfg)
        rows = trajectory_rows(
            traj, seed=seed, strategy=init, rank=rank, k=k,
            q_bits=args.q_bits, lr_bits=lr_bits,
        )
        return rows, traj.records[-1].act_err

    tasks = list(_sweep_runs(inits, ranks, seeds))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(one, tasks))

    all_rows: list[str] = []
    final_errs: dict[tuple[str, int, int], float] = {}
    for (init, rank, seed), (rows, err) in zip(tasks, results):
        all_rows.extend(rows)
        final_errs[(init, rank, seed)] = err
    write_report(out / "report.csv", all_rows)
    summary = summarize(final_errs, inits)
    atomic_write_text(out / "summary.txt", summary)
    manifest = {
        "command": "sweep",
        "qlr_version": __version__,
        "inits": inits,
        "ranks": ranks,
        "seeds": seeds,
        "k_mode": args.k_mode,
        "m": args.m,
        "n": args.n,
        "d": args.d,
        "outliers": args.outliers,
        "gain": args.gain,
        "q_bits": args.q_bits,
        "lr_bits": lr_bits_label(lr_bits),
        "iters": args.iters,
        "inner_iters": args.inner_iters,
        "threads": threads,
        "out": str(out),
    }
    atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(summary)
    print(f"{len(tasks)} runs, report -> {out / 'report.csv'}")
    return 0


# ----------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qlr",
        description="Decompose weight matrices into a quantized part plus a low-rank product.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="synthesize a planted-outlier problem instance")
    p_synth.add_argument("--m", type=int, default=DEFAULT_M)
    p_synth.add_argument("--n", type=int, default=DEFAULT_N)
    p_synth.add_argument("--d", type=int, default=DEFAULT_D)
    p_synth.add_argument("--outliers", type=int, default=DEFAULT_OUTLIERS)
    p_synth.add_argument("--gain", type=float, default=DEFAULT_GAIN)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_dec = sub.add_parser("decompose", help="run the joint optimization on stored matrices")
    p_dec.add_argument("--weights", required=True)
    p_dec.add_argument("--hessian")
    p_dec.add_argument("--calib")
    p_dec.add_argument("--rank", type=int, required=True)
    p_dec.add_argument("--q-bits", type=int, default=2)
    p_dec.add_argument("--lr-bits", type=int, default=16)
    p_dec.add_argument("--init", choices=INIT_CHOICES, default="zero")
    p_dec.add_argument("--k", type=int, default=None)
    p_dec.add_argument("--iters", type=int, default=15)
    p_dec.add_argument("--inner-iters", type=int, default=10)
    p_dec.add_argument("--out", required=True)
    p_dec.add_argument("--seed", type=int, default=0)
    p_dec.set_defaults(func=cmd_decompose)

    p_sweep = sub.add_parser("sweep", help="cross-product of runs on synthetic ensembles")
    p_sweep.add_argument("--inits", default="zero,lrapprox,odlri")
    p_sweep.add_argument("--ranks", default="8")
    p_sweep.add_argument("--seeds", default="0..49")
    p_sweep.add_argument("--k-mode", default="paper")
    p_sweep.add_argument("--m", type=int, default=DEFAULT_M)
    p_sweep.add_argument("--n", type=int, default=DEFAULT_N)
    p_sweep.add_argument("--d", type=int, default=DEFAULT_D)
    p_sweep.add_argument("--outliers", type=int, default=DEFAULT_OUTLIERS)
    p_sweep.add_argument("--gain", type=float, default=DEFAULT_GAIN)
    p_sweep.add_argument("--q-bits", type=int, default=2)
    p_sweep.add_argument("--lr-bits", type=int, default=16)
    p_sweep.add_argument("--iters", type=int, default=15)
    p_sweep.add_argument("--inner-iters", type=int, default=10)
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags and 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (NotFactorizableError, np.linalg.LinAlgError) as exc:
        print(f"qlr {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 1
    except (CliError, MatrixFileError, ValueError) as exc:
        print(f"qlr {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
