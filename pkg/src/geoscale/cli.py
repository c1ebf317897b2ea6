"""Command-line front end.

Four subcommands: generate synthetic clouds, estimate the bandwidth by
geometric consistency, compare against the baselines, and run the
embedding smoothing harness. All outputs are plain CSV/JSON written
atomically; reruns with the same flags produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baselines, dataset, distortion_search, embedding_eval, kernel_laplacian
from .dataset import ParseError, PointCloud
from .distortion_search import SelectionError
from .kernel_laplacian import EpsilonGrid

GENERATORS = {
    "hourglass": dataset.generate_hourglass,
    "dome": dataset.generate_dome,
}

EXIT_COMPUTE_ERROR = 1
EXIT_INPUT_ERROR = 2


@dataclass
class RunConfig:
    command: str
    out_dir: Path
    fmt: str = "csv"
    seed: int = 0
    input_path: Path | None = None
    clean_path: Path | None = None
    noisy_path: Path | None = None
    manifold: str | None = None
    n: int = 1000
    sigma: float = 0.0
    ambient_dim: int = 13
    dim: int = 1
    eps_min: float | None = None
    eps_max: float | None = None
    count: int = 20
    n_eval: int = 200
    dual: bool = True
    replicates: int = 1
    k: int = 2
    svd_values: int = 9
    m: int = 3

    def __post_init__(self):
        if self.fmt not in ("csv", "json"):
            raise ValueError(f"format must be csv or json, got {self.fmt!r}")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.count < 2:
            raise ValueError("grid count must be at least 2")
        if self.n_eval < 1:
            raise ValueError("n-eval must be at least 1")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.eps_min is not None and self.eps_min <= 0:
            raise ValueError("eps-min must be positive")
        if self.eps_max is not None and self.eps_max <= 0:
            raise ValueError("eps-max must be positive")
        if self.eps_min is not None and self.eps_max is not None and self.eps_min >= self.eps_max:
            raise ValueError("eps-min must be below eps-max")
        if self.manifold is not None and self.manifold not in GENERATORS:
            raise ValueError(f"unknown manifold {self.manifold!r}")


def _max_workers() -> int:
    raw = os.environ.get("GEOSCALE_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"GEOSCALE_THREADS must be an integer, got {raw!r}") from None
    return max(1, value)


def _atomic(path: Path, write) -> None:
    tmp = path.with_name(path.name + ".tmp")
    write(tmp)
    os.replace(tmp, path)


def _write_json(path: Path, payload: dict) -> None:
    def write(p: Path) -> None:
        with open(p, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    _atomic(path, write)


def _jsonable(value):
    if value is None or (isinstance(value, float) and not np.isfinite(value)):
        return None
    return value


def _generate_pair(cfg: RunConfig, seed: int):
    clean = GENERATORS[cfg.manifold](cfg.n, seed)
    spec = dataset.NoiseSpec(ambient_dim=cfg.ambient_dim, sigma=cfg.sigma, seed=seed)
    noisy = dataset.embed_with_noise(clean, spec)
    return clean, noisy


def _resolve_cloud(cfg: RunConfig, seed: int) -> PointCloud:
    if cfg.input_path is not None:
        return dataset.load_csv(cfg.input_path)
    if cfg.manifold is None:
        raise ValueError("either --input or --manifold is required")
    _, noisy = _generate_pair(cfg, seed)
    return noisy


def _grid_for(cloud: PointCloud, eps_min: float | None, eps_max: float | None, count: int) -> EpsilonGrid:
    try:
        if eps_min is None or eps_max is None:
            sq = kernel_laplacian.pairwise_sq_dists(cloud)
            if eps_min is None:
                eps_min = kernel_laplacian.epsilon_min(sq)
            if eps_max is None:
                eps_max = kernel_laplacian.epsilon_max(sq)
        return kernel_laplacian.log_grid(eps_min, eps_max, count)
    except ValueError as exc:
        raise ValueError(f"bandwidth grid: {exc}") from exc


def _build_grid(cfg: RunConfig, cloud: PointCloud) -> EpsilonGrid:
    return _grid_for(cloud, cfg.eps_min, cfg.eps_max, cfg.count)


def _curve_name(base: str, seed: int, multi: bool, fmt: str) -> str:
    return f"{base}_seed{seed}.{fmt}" if multi else f"{base}.{fmt}"


def _write_curve(curve: distortion_search.DistortionCurve, path: Path) -> None:
    if path.suffix == ".json":
        _atomic(path, curve.write_json)
    else:
        _atomic(path, curve.write_csv)


def run_generate(cfg: RunConfig) -> int:
    if cfg.manifold is None:
        raise ValueError("generate requires --manifold")
    clean, noisy = _generate_pair(cfg, cfg.seed)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    clean_path = cfg.out_dir / "clean.csv"
    noisy_path = cfg.out_dir / "noisy.csv"
    _atomic(clean_path, lambda p: dataset.save_csv(clean, p))
    _atomic(noisy_path, lambda p: dataset.save_csv(noisy, p))
    manifest = {
        "generator": cfg.manifold,
        "n": cfg.n,
        "sigma": cfg.sigma,
        "ambient_dim": cfg.ambient_dim,
        "seed": cfg.seed,
        "clean_file": clean_path.name,
        "noisy_file": noisy_path.name,
        "clean_dim": clean.ambient_dim,
    }
    _write_json(cfg.out_dir / "manifest.json", manifest)
    print(f"wrote {clean_path} {noisy_path} and manifest.json (n={cfg.n}, sigma={cfg.sigma})")
    return 0


def run_estimate(cfg: RunConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    workers = _max_workers()
    multi = cfg.replicates > 1
    records = []
    for seed in range(cfg.seed, cfg.seed + cfg.replicates):
        cloud = _resolve_cloud(cfg, seed)
        grid = _build_grid(cfg, cloud)
        curve = distortion_search.select_bandwidth(
            cloud,
            cfg.dim,
            grid,
            n_eval=min(cfg.n_eval, cloud.n),
            seed=seed,
            dual=cfg.dual,
            max_workers=min(workers, grid.count),
        )
        _write_curve(curve, cfg.out_dir / _curve_name("distortion_curve", seed, multi, cfg.fmt))
        records.append({"seed": seed, "eps_hat": curve.eps_hat})
        print(f"seed {seed}: eps_hat {curve.eps_hat:.6g}")
    values = np.array([r["eps_hat"] for r in records])
    summary = {
        "command": "estimate",
        "dim": cfg.dim,
        "metric": "dual" if cfg.dual else "inverse",
        "n_eval": cfg.n_eval,
        "replicates": records,
        "eps_hat_mean": float(values.mean()),
        "eps_hat_std": float(values.std(ddof=1)) if multi else 0.0,
    }
    _write_json(cfg.out_dir / "estimate.json", summary)
    if multi:
        print(f"eps_hat mean {values.mean():.6g} std {summary['eps_hat_std']:.6g}")
    else:
        print(f"eps_hat {values[0]:.6g}")
    return 0


def run_compare(cfg: RunConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    workers = _max_workers()
    cloud = _resolve_cloud(cfg, cfg.seed)
    grid = _build_grid(cfg, cloud)
    n_eval = min(cfg.n_eval, cloud.n)
    indices = dataset.subsample(cloud, n_eval, cfg.seed)

    rows = []
    for name, dual in (("GC", True), ("GC-inverse", False)):
        try:
            curve = distortion_search.select_bandwidth(
                cloud, cfg.dim, grid, n_eval=n_eval, seed=cfg.seed, dual=dual,
                max_workers=min(workers, grid.count),
            )
            eps_hat = curve.eps_hat
        except SelectionError:
            curve, eps_hat = None, None
        if curve is not None:
            base = "gc_curve" if dual else "gcinv_curve"
            _write_curve(curve, cfg.out_dir / f"{base}.{cfg.fmt}")
        rows.append({"method": name, "eps_hat": eps_hat, "eps_lo": None, "eps_hi": None})

    rec_curve = baselines.reconstruction_curve(cloud, grid)
    rec_hat = float(grid.values[int(np.argmin(rec_curve))])
    rows.append({"method": "Rec", "eps_hat": rec_hat, "eps_lo": None, "eps_hi": None})

    limit = min(cloud.ambient_dim, cloud.n - 1)
    if cfg.k + 1 > limit:
        raise ValueError(f"k={cfg.k} needs at least {cfg.k + 1} local singular values, limit is {limit}")
    n_values = min(max(cfg.svd_values, cfg.k + 1), limit)
    profile = baselines.multiscale_svd(cloud, grid, n_values, indices)
    clmr = baselines.clmr_range(profile, cfg.k)
    rows.append(
        {
            "method": "CLMR",
            "eps_hat": None,
            "eps_lo": clmr.eps_lo if clmr.defined_lo else None,
            "eps_hi": clmr.eps_hi if clmr.defined_hi else None,
        }
    )

    def write_table(p: Path) -> None:
        with open(p, "w") as fh:
            fh.write("method,eps_hat,eps_lo,eps_hi\n")
            for row in rows:
                cells = [row["method"]] + [
                    "" if row[c] is None else f"{row[c]:.17g}" for c in ("eps_hat", "eps_lo", "eps_hi")
                ]
                fh.write(",".join(cells) + "\n")

    _atomic(cfg.out_dir / "comparison.csv", write_table)
    _write_json(
        cfg.out_dir / "comparison.json",
        {"rows": [{k: _jsonable(v) for k, v in row.items()} for row in rows], "seed": cfg.seed},
    )
    def write_rec(p: Path) -> None:
        with open(p, "w") as fh:
            fh.write("epsilon,reconstruction_error\n")
            for eps, val in zip(grid.values, rec_curve):
                fh.write(f"{eps:.17g},{val:.17g}\n")

    _atomic(cfg.out_dir / "rec_curve.csv", write_rec)
    _atomic(cfg.out_dir / "svd_profile.csv", profile.write_csv)
    _atomic(cfg.out_dir / "clmr_range.json", clmr.write_json)

    for row in rows:
        span = (
            f"[{row['eps_lo']}, {row['eps_hi']}]"
            if row["method"] == "CLMR"
            else (f"{row['eps_hat']:.6g}" if row["eps_hat"] is not None else "undefined")
        )
        print(f"{row['method']}: {span}")
    return 0


def run_smoothing(cfg: RunConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    workers = _max_workers()
    if cfg.clean_path is not None or cfg.noisy_path is not None:
        if cfg.clean_path is None or cfg.noisy_path is None:
            raise ValueError("smoothing needs both --clean and --noisy (or a --manifold spec)")
        clean = dataset.load_csv(cfg.clean_path)
        noisy = dataset.load_csv(cfg.noisy_path)
    elif cfg.manifold is not None:
        clean, noisy = _generate_pair(cfg, cfg.seed)
    else:
        raise ValueError("smoothing needs --clean/--noisy files or a --manifold spec")

    grid = _build_grid(cfg, noisy)
    star_grid = _grid_for(clean, None, None, cfg.count)

    curve = distortion_search.select_bandwidth(
        noisy, cfg.dim, grid, n_eval=min(cfg.n_eval, noisy.n), seed=cfg.seed, dual=cfg.dual,
        max_workers=min(workers, grid.count),
    )
    smoothing = embedding_eval.smoothing_delta(clean, noisy, grid, star_grid, m=cfg.m)
    _atomic(cfg.out_dir / "smoothing_curve.csv", smoothing.write_csv)

    eps_hat = curve.eps_hat
    hat_idx = int(np.argmin(np.abs(grid.values - eps_hat)))
    delta_at_hat = float(smoothing.delta[hat_idx])
    finite = smoothing.delta[np.isfinite(smoothing.delta)]
    min_delta = float(finite.min()) if finite.size else float("nan")
    min_eps = (
        float(grid.values[int(np.nanargmin(smoothing.delta))]) if finite.size else float("nan")
    )
    _write_json(
        cfg.out_dir / "smoothing.json",
        {
            "eps_hat": eps_hat,
            "delta_at_eps_hat": _jsonable(delta_at_hat),
            "min_delta": _jsonable(min_delta),
            "min_delta_eps": _jsonable(min_eps),
            "m": cfg.m,
            "seed": cfg.seed,
        },
    )
    print(f"eps_hat {eps_hat:.6g} delta {delta_at_hat:.6g} (grid min delta {min_delta:.6g})")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")


def _add_grid_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--eps-min", type=float, default=None, help="grid lower end (default: from data)")
    parser.add_argument("--eps-max", type=float, default=None, help="grid upper end (default: from data)")
    parser.add_argument("--count", type=int, default=20, help="grid size")


def _add_input_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", type=Path, default=None, help="point cloud CSV")
    _add_generator_flags(parser)


def _add_generator_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifold", choices=sorted(GENERATORS), default=None)
    parser.add_argument("--n", type=int, default=1000)
    parser.add_argument("--sigma", type=float, default=0.0)
    parser.add_argument("--ambient-dim", type=int, default=13)


def _add_estimate_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dim", type=int, default=1, help="working tangent dimension")
    parser.add_argument("--n-eval", type=int, default=200, help="evaluation subsample size")
    parser.add_argument("--metric", choices=("dual", "inverse"), default="dual")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoscale",
        description="Heat-kernel bandwidth selection by geometric self-consistency.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write synthetic clean/noisy clouds")
    _add_generator_flags(p_gen)
    _add_common(p_gen)

    p_est = sub.add_parser("estimate", help="select the bandwidth for a cloud")
    _add_input_flags(p_est)
    _add_grid_flags(p_est)
    _add_estimate_flags(p_est)
    p_est.add_argument("--replicates", type=int, default=1, help="rerun with seeds seed..seed+R-1")
    _add_common(p_est)

    p_cmp = sub.add_parser("compare", help="bandwidths from all methods side by side")
    _add_input_flags(p_cmp)
    _add_grid_flags(p_cmp)
    _add_estimate_flags(p_cmp)
    p_cmp.add_argument("--k", type=int, default=2, help="assumed upper bound on intrinsic dimension")
    p_cmp.add_argument("--svd-values", type=int, default=9, help="singular values kept in the profile")
    _add_common(p_cmp)

    p_smo = sub.add_parser("smoothing", help="embedding discrepancy harness for a clean/noisy pair")
    p_smo.add_argument("--clean", type=Path, default=None, help="clean cloud CSV")
    p_smo.add_argument("--noisy", type=Path, default=None, help="noisy cloud CSV")
    _add_generator_flags(p_smo)
    _add_grid_flags(p_smo)
    _add_estimate_flags(p_smo)
    p_smo.add_argument("--m", type=int, default=3, help="embedding dimensions")
    _add_common(p_smo)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=args.command,
        out_dir=Path(args.out),
        fmt=args.fmt,
        seed=args.seed,
        input_path=getattr(args, "input", None),
        clean_path=getattr(args, "clean", None),
        noisy_path=getattr(args, "noisy", None),
        manifold=getattr(args, "manifold", None),
        n=getattr(args, "n", 1000),
        sigma=getattr(args, "sigma", 0.0),
        ambient_dim=getattr(args, "ambient_dim", 13),
        dim=getattr(args, "dim", 1),
        eps_min=getattr(args, "eps_min", None),
        eps_max=getattr(args, "eps_max", None),
        count=getattr(args, "count", 20),
        n_eval=getattr(args, "n_eval", 200),
        dual=getattr(args, "metric", "dual") == "dual",
        replicates=getattr(args, "replicates", 1),
        k=getattr(args, "k", 2),
        svd_values=getattr(args, "svd_values", 9),
        m=getattr(args, "m", 3),
    )


COMMANDS = {
    "generate": run_generate,
    "estimate": run_estimate,
    "compare": run_compare,
    "smoothing": run_smoothing,
}

COMPUTE_ERRORS = (
    SelectionError,
    distortion_search.DistortionUndefinedError,
    embedding_eval.EigensolverError,
    np.linalg.LinAlgError,
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except ValueError as exc:
        print(f"geoscale {args.command}: config: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        return COMMANDS[cfg.command](cfg)
    except COMPUTE_ERRORS as exc:
        print(f"geoscale {cfg.command}: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE_ERROR
    except ParseError as exc:
        print(f"geoscale {cfg.command}: parse error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (OSError, ValueError) as exc:
        print(f"geoscale {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
