"""Command line entry point: ``raresynth <command> --config run.toml``.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""

from __future__ import annotations

import os

# thread caps must be in place before numpy / numba load their pools
_threads = os.environ.get("RARESYNTH_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import io  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
from dataclasses import dataclass, field  # noqa: E402
from pathlib import Path  # noqa: E402

import pandas as pd  # noqa: E402
import tomli  # noqa: E402

from . import data as D  # noqa: E402
from . import schema as S  # noqa: E402
from .errors import RaresynthError, ValidationError  # noqa: E402

log = logging.getLogger("raresynth")

COMMANDS = ("ingest", "fixture", "train", "sample", "evaluate", "optimize", "sweep", "report")
DEFAULT_TRIALS = 100


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    path: Path
    seed: int = 0
    out: Path = Path("out")
    source: str = "fixture"
    input: Path | None = None
    mapping: Path | None = None
    fixture_rows: int = 5000
    fixture_rate: float = 0.02
    kind: str = "GC"
    hyperparameters: object = "default"
    n_samples: int = 1000
    k: int = 5
    test_fraction: float = 0.3
    envelope: tuple = (0.8, 1.2)
    n_trials: int = DEFAULT_TRIALS
    tuner_seed: int | None = None
    sizes: list = field(default_factory=lambda: [100, 500, 1000, 2000])
    sweep_seeds: list = field(default_factory=lambda: [0])
    plots: bool = False


def _resolve(base: Path, value):
    if value in (None, ""):
        return None
    p = Path(value)
    return p if p.is_absolute() else (base / p)


def load_config(path, seed=None, out=None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"{path}: config file not found")
    try:
        raw = tomli.loads(path.read_text(encoding="utf-8"))
    except tomli.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    base = path.parent
    d, m = raw.get("data", {}), raw.get("model", {})
    ev, tu, sw = raw.get("evaluate", {}), raw.get("tuner", {}), raw.get("sweep", {})
    try:
        cfg = RunConfig(
            path=path,
            seed=int(raw.get("seed", 0)),
            out=_resolve(base, raw.get("out", "out")),
            source=str(d.get("source", "fixture")),
            input=_resolve(base, d.get("input")),
            mapping=_resolve(base, d.get("mapping")),
            fixture_rows=int(d.get("fixture_rows", 5000)),
            fixture_rate=float(d.get("fixture_rate", 0.02)),
            kind=str(m.get("kind", "GC")),
            hyperparameters=m.get("hyperparameters", "default"),
            n_samples=int(raw.get("sample", {}).get("n", 1000)),
            k=int(ev.get("k", 5)),
            test_fraction=float(ev.get("test_fraction", 0.3)),
            envelope=tuple(float(v) for v in ev.get("envelope", (0.8, 1.2))),
            n_trials=int(tu.get("n_trials", DEFAULT_TRIALS)),
            tuner_seed=tu.get("seed"),
            sizes=[int(v) for v in sw.get("sizes", [100, 500, 1000, 2000])],
            sweep_seeds=[int(v) for v in sw.get("seeds", [0])],
            plots=bool(raw.get("plots", False)),
        )
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    if seed is not None:
        cfg.seed = int(seed)
    if out is not None:
        cfg.out = Path(out)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    from .generators.base import KINDS

    where = str(cfg.path)
    if cfg.source not in ("fixture", "csv"):
        raise ValidationError(f"{where}: data.source must be 'fixture' or 'csv'")
    if cfg.source == "csv":
        if cfg.input is None or not cfg.input.exists():
            raise ValidationError(f"{where}: data.input {cfg.input} does not exist")
    if cfg.mapping is not None and not cfg.mapping.exists():
        raise ValidationError(f"{where}: data.mapping {cfg.mapping} does not exist")
    if cfg.kind not in KINDS:
        raise ValidationError(f"{where}: model.kind must be one of {', '.join(KINDS)}")
    hp = cfg.hyperparameters
    if isinstance(hp, str):
        if hp != "default" and not hp.startswith("optimized:"):
            raise ValidationError(f"{where}: model.hyperparameters must be a table, 'default' or 'optimized:<path>'")
    elif not isinstance(hp, dict):
        raise ValidationError(f"{where}: model.hyperparameters has the wrong type")
    if cfg.sizes != sorted(cfg.sizes):
        raise ValidationError(f"{where}: sweep.sizes must be ascending")
    if not 0 < cfg.test_fraction < 1:
        raise ValidationError(f"{where}: evaluate.test_fraction must be in (0, 1)")
    if cfg.k < 2:
        raise ValidationError(f"{where}: evaluate.k must be >= 2")
    if cfg.n_trials < 1:
        raise ValidationError(f"{where}: tuner.n_trials must be >= 1")


# ---------------------------------------------------------------------------
# atomic output


def _atomic_write(path: Path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        if isinstance(payload, bytes):
            tmp.write_bytes(payload)
        else:
            with open(tmp, "w", encoding="utf-8", newline="") as fh:
                fh.write(payload)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def _write_table(path: Path, table: pd.DataFrame, schema=None):
    _atomic_write(path, D.to_csv_text(table, schema))


def _write_json(path: Path, obj):
    _atomic_write(path, json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n")


# ---------------------------------------------------------------------------
# shared steps


def _corpus(cfg: RunConfig) -> D.FlightCorpus:
    if cfg.source == "fixture":
        return D.preprocess(D.generate_fixture_corpus(cfg.seed, cfg.fixture_rows, cfg.fixture_rate))
    mapping = D.load_mapping(cfg.mapping) if cfg.mapping else None
    return D.load_corpus(cfg.input, mapping)


def _hyperparameters(cfg: RunConfig) -> dict:
    hp = cfg.hyperparameters
    if isinstance(hp, dict):
        return dict(hp)
    if hp == "default":
        return {}
    from .tuner import load_history

    hist_path = _resolve(cfg.path.parent, hp.split(":", 1)[1])
    history = load_history(hist_path)
    if not history:
        raise ValidationError(f"{cfg.path}: no trials in {hist_path}")
    best = max(history, key=lambda t: (t.composite, -t.index))
    return dict(best.params)


def _model_path(cfg):
    return cfg.out / f"{cfg.kind}.rsyn"


def _save_svg(fig, path: Path):
    import matplotlib.pyplot as plt

    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    _atomic_write(path, buf.getvalue())


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "raresynth"
    import matplotlib.pyplot as plt

    return plt


# ---------------------------------------------------------------------------
# commands


def cmd_fixture(cfg: RunConfig, args) -> list:
    n = args.n if args.n is not None else cfg.fixture_rows
    rate = args.rate if args.rate is not None else cfg.fixture_rate
    raw = D.generate_fixture_corpus(cfg.seed, n, rate)
    path = cfg.out / "fixture.csv"
    _write_table(path, raw, S.RAW_SCHEMA)
    return [path]


def cmd_ingest(cfg: RunConfig, args) -> list:
    corpus = _corpus(cfg)
    full, div = cfg.out / "corpus.csv", cfg.out / "diversions.csv"
    _write_table(full, corpus.full, S.FLIGHT_SCHEMA)
    _write_table(div, corpus.diversions, S.GENERATION_SCHEMA)
    log.info("corpus %s, diversions %s, dropped %s", corpus.full.shape, corpus.diversions.shape, corpus.dropped)
    return [full, div]


def cmd_train(cfg: RunConfig, args) -> list:
    from .generators import GeneratorSpec, fit
    from .generators.io import dumps

    corpus = _corpus(cfg)
    spec = GeneratorSpec(cfg.kind, _hyperparameters(cfg), cfg.seed)
    model = fit(corpus.diversions, spec, S.GENERATION_SCHEMA)
    path = _model_path(cfg)
    _atomic_write(path, dumps(model))
    return [path]


def _load_model(cfg, args):
    from .generators.io import load_model

    path = Path(args.model) if getattr(args, "model", None) else _model_path(cfg)
    if not path.exists():
        raise ValidationError(f"model file {path} not found; run 'train' first")
    return load_model(path)


def cmd_sample(cfg: RunConfig, args) -> list:
    from .generators import sample

    model = _load_model(cfg, args)
    corpus = _corpus(cfg)
    n = args.n if args.n is not None else cfg.n_samples
    syn = sample(model, n, cfg.seed)
    full = D.reconstruct_relational(syn, corpus)
    cleaned, rejected = D.reject_invalid_routes(full, corpus.route_set)
    paths = [cfg.out / "sampled.csv", cfg.out / "reconstructed.csv", cfg.out / "cleaned.csv"]
    _write_table(paths[0], syn, S.GENERATION_SCHEMA)
    _write_table(paths[1], full, S.FLIGHT_SCHEMA)
    _write_table(paths[2], cleaned, S.FLIGHT_SCHEMA)
    log.info("sampled %s, reconstructed %s, cleaned %s (%d rejected)", syn.shape, full.shape, cleaned.shape, rejected)
    return paths


def cmd_evaluate(cfg: RunConfig, args) -> list:
    from .evaluation import diversity_pca, evaluate

    corpus = _corpus(cfg)
    syn_path = Path(args.synthetic) if args.synthetic else cfg.out / "sampled.csv"
    if not syn_path.exists():
        raise ValidationError(f"synthetic table {syn_path} not found; run 'sample' first")
    syn = D.load_csv(syn_path, schema=S.GENERATION_SCHEMA)
    rep = evaluate(corpus, syn, seed=cfg.seed, k=cfg.k, test_fraction=cfg.test_fraction, envelope=cfg.envelope)
    path = cfg.out / "report.json"
    _atomic_write(path, rep.to_json())
    paths = [path]
    if cfg.plots or args.plots:
        plt = _plt()
        real = corpus.diversions
        kept, _ = D.reject_invalid_routes(D.reconstruct_relational(syn, corpus), corpus.route_set)
        pr, po, _ = diversity_pca(real, kept[S.GENERATION_COLUMNS], S.GENERATION_SCHEMA)
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.scatter(pr[:, 0], pr[:, 1], s=8, label="real")
        ax.scatter(po[:, 0], po[:, 1], s=8, alpha=0.5, label="synthetic")
        ax.set_xlabel("PC1")
        ax.set_ylabel("PC2")
        ax.legend()
        svg = cfg.out / "diversity_pca.svg"
        _save_svg(fig, svg)
        paths.append(svg)
    return paths


def cmd_optimize(cfg: RunConfig, args) -> list:
    from .tuner import build_space, generator_objective, run_study

    corpus = _corpus(cfg)
    space = build_space(cfg.kind)
    objective = generator_objective(corpus, cfg.kind, cfg.n_samples, cfg.k, cfg.test_fraction, cfg.seed)
    n_trials = args.trials if args.trials is not None else cfg.n_trials
    seed = cfg.tuner_seed if cfg.tuner_seed is not None else cfg.seed
    hist = cfg.out / f"{cfg.kind}_history.jsonl"
    hist.parent.mkdir(parents=True, exist_ok=True)
    best, history = run_study(objective, space, n_trials, seed=int(seed), history_path=hist)
    path = cfg.out / f"{cfg.kind}_best.json"
    _write_json(path, {"kind": cfg.kind, "index": best.index, "params": best.params,
                       "scores": best.scores, "composite": best.composite, "seed": best.seed})
    return [hist, path]


def cmd_sweep(cfg: RunConfig, args) -> list:
    from .evaluation import augmentation_sweep, class_balance_point, sweep_frame

    model = _load_model(cfg, args)
    corpus = _corpus(cfg)
    rows = augmentation_sweep(corpus, model, cfg.sizes, cfg.sweep_seeds)
    frame = sweep_frame(rows)
    path = cfg.out / "sweep.csv"
    _atomic_write(path, frame.to_csv(index=False, lineterminator="\n", float_format="%.17g"))
    log.info("class-balance point (seed %d): %d synthetic rows",
             cfg.sweep_seeds[0], class_balance_point(corpus, cfg.sweep_seeds[0], cfg.test_fraction))
    paths = [path]
    if cfg.plots or args.plots:
        paths.append(_sweep_svg(frame, cfg.out / "sweep.svg"))
    return paths


def _sweep_svg(frame, path):
    plt = _plt()
    agg = frame.groupby("size").median(numeric_only=True)
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3.5))
    a1.plot(agg.index, agg["trtr_pr_auc"], "o-", label="TRTR")
    a1.plot(agg.index, agg["tatr_pr_auc"], "o-", label="TATR")
    a1.set_ylabel("PR-AUC")
    a2.plot(agg.index, agg["trtr_mcc"], "o-", label="TRTR")
    a2.plot(agg.index, agg["tatr_mcc"], "o-", label="TATR")
    a2.set_ylabel("normalized MCC")
    for ax in (a1, a2):
        ax.set_xlabel("augmentation size")
        ax.legend()
    fig.tight_layout()
    _save_svg(fig, path)
    return path


def cmd_report(cfg: RunConfig, args) -> list:
    """Charts from existing report.json and sweep.csv in the output directory."""
    paths = []
    rep_path, sweep_path = cfg.out / "report.json", cfg.out / "sweep.csv"
    if not rep_path.exists() and not sweep_path.exists():
        raise ValidationError(f"nothing to report in {cfg.out}")
    if rep_path.exists():
        plt = _plt()
        rep = json.loads(rep_path.read_text(encoding="utf-8"))
        bars = {
            "realism": rep["realism"], "marginal": rep["statistical"]["marginal"],
            "bivariate": rep["statistical"]["bivariate"], "TATR PR-AUC": rep["utility"]["tatr"]["pr_auc"],
            "1 - fidelity F1": 1 - rep["fidelity"]["f1"], "composite": rep["composite"],
        }
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.bar(list(bars), list(bars.values()))
        ax.set_ylim(0, 1)
        ax.tick_params(axis="x", rotation=30)
        fig.tight_layout()
        svg = cfg.out / "report.svg"
        _save_svg(fig, svg)
        paths.append(svg)
    if sweep_path.exists():
        paths.append(_sweep_svg(pd.read_csv(sweep_path), cfg.out / "sweep.svg"))
    return paths


HANDLERS = {
    "ingest": cmd_ingest, "fixture": cmd_fixture, "train": cmd_train, "sample": cmd_sample,
    "evaluate": cmd_evaluate, "optimize": cmd_optimize, "sweep": cmd_sweep, "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="raresynth", description="Synthetic rare-event flight records.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=(HANDLERS[name].__doc__ or "").strip().split("\n")[0] or None)
        p.add_argument("--config", required=True, help="run configuration (TOML)")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--quiet", action="store_true", help="only print errors")
        if name == "fixture":
            p.add_argument("--n", type=int, default=None, help="rows")
            p.add_argument("--rate", type=float, default=None, help="diversion rate")
        if name == "sample":
            p.add_argument("--n", type=int, default=None, help="rows to sample")
        if name in ("sample", "sweep"):
            p.add_argument("--model", default=None, help="model file (default: <out>/<kind>.rsyn)")
        if name == "evaluate":
            p.add_argument("--synthetic", default=None, help="sampled 14-column CSV")
        if name in ("evaluate", "sweep"):
            p.add_argument("--plots", action="store_true", help="also write SVG charts")
        if name == "optimize":
            p.add_argument("--trials", type=int, default=None, help="override tuner.n_trials")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True,
    )
    if _threads:
        try:
            import numba

            numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))
        except ValueError:
            pass
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        paths = HANDLERS[args.command](cfg, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RaresynthError, Exception) as exc:  # noqa: BLE001 - mapped to the runtime exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return 2
    if not args.quiet:
        for p in paths:
            print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
