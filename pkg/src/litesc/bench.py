"""Experiment runner: flat key/value configs, sweeps and CSV results.

Usage::

    python -m litesc.bench validate sweep.cfg
    python -m litesc.bench run sweep.cfg
    python -m litesc.bench plot results.csv fig7

``LITESC_OUTPUT_DIR`` overrides the config's ``output_dir``. Trained models
are cached under ``LITESC_CACHE_DIR`` (default ``~/.cache/litesc``), keyed by
their full training setup and the package source, so repeated sweeps and the
test suite reuse them.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from . import classic, csi, deepsc, slim
from .channel import KINDS, channel_stats
from .textpipe import Corpus, load_corpus

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SCHEMA_LINE = f"# litesc-results v{SCHEMA_VERSION}"
COLUMNS = ("experiment", "seed", "channel", "csi_mode", "snr_db", "gamma", "m_bits", "metric", "value", "wall_time")
EXPERIMENTS = ("train", "evaluate", "sweep-snr", "sweep-sparsity", "sweep-bits", "estimator-mse", "baseline")
OUTPUT_ENV = "LITESC_OUTPUT_DIR"
CACHE_ENV = "LITESC_CACHE_DIR"


class ValidationError(ValueError):
    """Raised with every problem found in a config, one per line."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid config:\n  " + "\n  ".join(problems))


# -- config ----------------------------------------------------------------------------
def _floats(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v.strip()]


def _ints(s: str) -> list[int]:
    return [int(v) for v in s.split(",") if v.strip()]


def _strs(s: str) -> list[str]:
    return [v.strip() for v in s.split(",") if v.strip()]


def _range(s: str) -> tuple[float, float]:
    lo, _, hi = s.partition(":")
    return (float(lo), float(hi or lo))


# key -> (parser, default); list-valued keys take comma-separated values
KEYS: dict[str, tuple[Callable, object]] = {
    "experiment": (str, None),
    "channel": (str, "rayleigh"),
    "csi_mode": (_strs, ["perfect"]),
    "snr_db": (_floats, [0.0, 6.0, 12.0, 18.0]),
    "gamma": (_floats, [0.0]),
    "m_bits": (_ints, [32]),
    "seeds": (_ints, [0]),
    "corpus": (str, "toy"),
    "checkpoint": (str, ""),
    "output_dir": (str, "."),
    "output": (str, "results.csv"),
    "train_size": (int, 5000),
    "test_size": (int, 500),
    "epochs": (int, 12),
    "train_snr": (_range, (0.0, 12.0)),
    "batch_size": (int, 64),
    "lr": (float, 1e-3),
    "k": (float, 2.0),
    "fine_tune_epochs": (int, 3),
    "constellation_bits": (_ints, []),
    "schemes": (_strs, ["huffman", "fixed5"]),
    "trials": (int, 10_000),
    "with_model": (lambda s: s.strip().lower() in ("1", "true", "yes"), False),
}
LIST_KEYS = ("csi_mode", "snr_db", "gamma", "m_bits", "seeds", "schemes")


@dataclass
class ExperimentConfig:
    experiment: str
    channel: str = "rayleigh"
    csi_mode: list = field(default_factory=lambda: ["perfect"])
    snr_db: list = field(default_factory=lambda: [0.0, 6.0, 12.0, 18.0])
    gamma: list = field(default_factory=lambda: [0.0])
    m_bits: list = field(default_factory=lambda: [32])
    seeds: list = field(default_factory=lambda: [0])
    corpus: str = "toy"
    checkpoint: str = ""
    output_dir: str = "."
    output: str = "results.csv"
    train_size: int = 5000
    test_size: int = 500
    epochs: int = 12
    train_snr: tuple = (0.0, 12.0)
    batch_size: int = 64
    lr: float = 1e-3
    k: float = 2.0
    fine_tune_epochs: int = 3
    constellation_bits: list = field(default_factory=list)
    schemes: list = field(default_factory=lambda: ["huffman", "fixed5"])
    trials: int = 10_000
    with_model: bool = False
    base_dir: str = "."

    @property
    def out_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or Path(self.base_dir) / self.output_dir)

    @property
    def out_path(self) -> Path:
        return self.out_dir / self.output

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p


def parse_config(text: str, base_dir=".") -> ExperimentConfig:
    """Parse ``key = value`` lines; collects every problem before raising."""
    problems, values = [], {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            problems.append(f"line {no}: expected 'key = value', got {raw.strip()!r}")
            continue
        if key not in KEYS:
            problems.append(f"line {no}: unknown key {key!r}")
            continue
        if key in values:
            problems.append(f"line {no}: duplicate key {key!r}")
        try:
            values[key] = KEYS[key][0](value)
        except ValueError as exc:
            problems.append(f"line {no}: bad value for {key}: {exc}")
    if "experiment" not in values:
        problems.append("missing required key 'experiment'")
    cfg = ExperimentConfig(**{"experiment": "", **values}, base_dir=str(base_dir))
    problems += check_config(cfg, skip_experiment="experiment" not in values)
    if problems:
        raise ValidationError(problems)
    return cfg


def check_config(cfg: ExperimentConfig, skip_experiment: bool = False) -> list[str]:
    p = []
    if not skip_experiment and cfg.experiment not in EXPERIMENTS:
        p.append(f"experiment {cfg.experiment!r} not in {EXPERIMENTS}")
    if cfg.channel not in KINDS:
        p.append(f"channel {cfg.channel!r} not in {KINDS}")
    for key in LIST_KEYS:
        if not getattr(cfg, key):
            p.append(f"{key} must not be empty")
    p += [f"csi_mode {m!r} not in {deepsc.CSI_MODES}" for m in cfg.csi_mode if m not in deepsc.CSI_MODES]
    p += [f"gamma {g} outside [0, 1)" for g in cfg.gamma if not 0.0 <= g < 1.0]
    p += [f"m_bits {m} < 1" for m in cfg.m_bits if m < 1]
    p += [f"constellation_bits {m} < 1" for m in cfg.constellation_bits if m < 1]
    p += [f"scheme {s!r} not in {tuple(classic.SCHEMES)}" for s in cfg.schemes if s not in classic.SCHEMES]
    for key in ("train_size", "test_size", "epochs", "batch_size", "trials"):
        if getattr(cfg, key) < 1:
            p.append(f"{key} must be >= 1")
    if cfg.fine_tune_epochs < 0:
        p.append("fine_tune_epochs must be >= 0")
    if cfg.train_snr[0] > cfg.train_snr[1]:
        p.append(f"empty train_snr range {cfg.train_snr}")
    if cfg.corpus != "toy" and not cfg.resolve(cfg.corpus).is_file():
        p.append(f"corpus file not found: {cfg.resolve(cfg.corpus)}")
    if cfg.experiment == "evaluate":
        if not cfg.checkpoint:
            p.append("evaluate needs a checkpoint")
        elif not cfg.resolve(cfg.checkpoint).is_file():
            p.append(f"checkpoint not found: {cfg.resolve(cfg.checkpoint)}")
    return p


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ValidationError([f"config file not found: {path}"])
    return parse_config(path.read_text(), base_dir=path.parent)


# -- results ---------------------------------------------------------------------------
@dataclass
class ResultRow:
    experiment: str
    seed: int
    channel: str
    csi_mode: str
    snr_db: float | str
    gamma: float | str
    m_bits: int | str
    metric: str
    value: float
    wall_time: float = 0.0


class ResultWriter:
    """Single CSV writer; every row is flushed so a crash loses at most the in-flight point."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._f = open(self.path, "w", newline="")
        self._f.write(SCHEMA_LINE + "\n")
        self._w = csv.DictWriter(self._f, fieldnames=COLUMNS)
        self._w.writeheader()
        self._f.flush()
        self.count = 0

    def write(self, rows: list[ResultRow]) -> None:
        for r in rows:
            d = asdict(r)
            d["value"] = repr(float(d["value"]))
            d["wall_time"] = f"{d['wall_time']:.3f}"
            self._w.writerow(d)
        self._f.flush()
        self.count += len(rows)

    def close(self) -> None:
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_results(path) -> list[dict]:
    with open(path, newline="") as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# -- model cache -----------------------------------------------------------------------
# modules whose code changes what a trained model looks like
TRAINING_SOURCES = ("nncore", "channel.py", "csi.py", "deepsc.py", "textpipe.py", "data")


def _source_digest() -> str:
    h = hashlib.sha256()
    root = Path(__file__).parent
    for name in TRAINING_SOURCES:
        target = root / name
        files = sorted(target.rglob("*")) if target.is_dir() else [target]
        for p in files:
            if p.is_file() and p.suffix in (".py", ".txt"):
                h.update(p.relative_to(root).as_posix().encode())
                h.update(p.read_bytes())
    return h.hexdigest()[:16]


def cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV) or Path.home() / ".cache" / "litesc")


def cached(tag: str, spec: dict, build: Callable[[], "deepsc.TransceiverModel"]) -> "deepsc.TransceiverModel":
    """Load ``build()``'s model from the cache, training it on a miss."""
    key = hashlib.sha256((repr(sorted(spec.items())) + _source_digest()).encode()).hexdigest()[:20]
    path = cache_dir() / f"{tag}-{key}.npz"
    if path.is_file():
        try:
            return deepsc.TransceiverModel.load(path)
        except Exception as exc:  # stale or truncated file; retrain
            log.warning("ignoring unreadable cache entry %s: %s", path, exc)
    model = build()
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    model.save(tmp)
    os.replace(tmp, path)
    return model


_CORPORA: dict[str, Corpus] = {}


def corpus_for(cfg: ExperimentConfig) -> Corpus:
    key = "toy" if cfg.corpus == "toy" else str(cfg.resolve(cfg.corpus))
    if key not in _CORPORA:
        _CORPORA[key] = load_corpus(None if key == "toy" else key)
    return _CORPORA[key]


def trained_model(
    corpus: Corpus,
    channel: str,
    csi_mode: str,
    seed: int,
    epochs: int = 12,
    train_size: int = 5000,
    train_snr=(0.0, 12.0),
    batch_size: int = 64,
    lr: float = 1e-3,
    k: float = 2.0,
    n_ant: int = 1,
    corpus_key: str = "toy",
) -> "deepsc.TransceiverModel":
    """Train (or fetch from cache) one transceiver on the first ``train_size`` sentences."""
    spec = dict(channel=channel, csi_mode=csi_mode, seed=seed, epochs=epochs, train_size=train_size,
                train_snr=tuple(train_snr), batch_size=batch_size, lr=lr, k=k, n_ant=n_ant, corpus=corpus_key)

    def build():
        model = deepsc.TransceiverModel(deepsc.ModelConfig(len(corpus.vocab.itos), n_ant=n_ant), seed=seed)
        tc = deepsc.TrainConfig(csi_mode, channel, tuple(train_snr), batch_size, epochs, lr, seed, k, eval_size=8)
        den = denoiser_for(channel, n_ant, seed, k) if csi_mode == "refined" else None
        deepsc.train(model, corpus.train[:train_size], tc, denoiser=den)
        return model

    return cached(f"{channel}-{csi_mode}-s{seed}", spec, build)


_DENOISERS: dict[tuple, csi.DenoiserModel] = {}


def denoiser_for(channel: str, n_ant: int, seed: int, k: float = 2.0) -> csi.DenoiserModel:
    key = (channel, n_ant, seed, k)
    if key not in _DENOISERS:
        _DENOISERS[key] = deepsc.default_denoiser(channel, n_ant, seed, k)
    return _DENOISERS[key]


def _model_for(cfg: ExperimentConfig, corpus: Corpus, mode: str, seed: int):
    return trained_model(corpus, cfg.channel, mode, seed, cfg.epochs, cfg.train_size, cfg.train_snr,
                         cfg.batch_size, cfg.lr, cfg.k, corpus_key=cfg.corpus)


def point_seed(seed: int, index: int) -> int:
    """Independent RNG stream per (master seed, sweep point)."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


# -- experiments -----------------------------------------------------------------------
Points = Iterator[list[ResultRow]]


def _row(cfg, seed, mode="", snr="", gamma="", m="", metric="", value=0.0):
    return ResultRow(cfg.experiment, seed, cfg.channel, mode, snr, gamma, m, metric, value)


def _bleu(cfg, model, corpus, snr, mode, seed, den=None):
    return deepsc.evaluate(model, corpus.test[: cfg.test_size], cfg.channel, snr, mode, seed=seed, k=cfg.k, denoiser=den)["bleu"]


def _den(cfg, mode, seed, model):
    return denoiser_for(cfg.channel, model.cfg.n_ant, seed, cfg.k) if mode == "refined" else None


def exp_train(cfg: ExperimentConfig) -> Points:
    corpus = corpus_for(cfg)
    ckpt_dir = cfg.out_dir / "checkpoints"
    for seed in cfg.seeds:
        for mode in cfg.csi_mode:
            model = _model_for(cfg, corpus, mode, seed)
            ckpt_dir.mkdir(parents=True, exist_ok=True)
            nbytes = model.save(ckpt_dir / f"{cfg.channel}-{mode}-s{seed}.npz")
            yield [_row(cfg, seed, mode, metric="checkpoint_bytes", value=nbytes)]


def exp_sweep_snr(cfg: ExperimentConfig) -> Points:
    corpus = corpus_for(cfg)
    i = 0
    for seed in cfg.seeds:
        for mode in cfg.csi_mode:
            model = _model_for(cfg, corpus, mode, seed)
            den = _den(cfg, mode, seed, model)
            for bits in cfg.constellation_bits or [None]:
                if bits is None:
                    model.constellation = None
                else:
                    deepsc.calibrate_constellation(model, corpus.train[: cfg.train_size], bits, seed=seed)
                for snr in cfg.snr_db:
                    i += 1
                    b = _bleu(cfg, model, corpus, snr, mode, point_seed(seed, i), den)
                    yield [_row(cfg, seed, mode, snr, "", bits if bits else 32, "bleu", b)]


def exp_evaluate(cfg: ExperimentConfig) -> Points:
    corpus = corpus_for(cfg)
    model = deepsc.TransceiverModel.load(cfg.resolve(cfg.checkpoint))
    i = 0
    for seed in cfg.seeds:
        for mode in cfg.csi_mode:
            den = _den(cfg, mode, seed, model)
            for snr in cfg.snr_db:
                i += 1
                yield [_row(cfg, seed, mode, snr, metric="bleu", value=_bleu(cfg, model, corpus, snr, mode, point_seed(seed, i), den))]


def _tune_cfg(cfg, mode, seed):
    return deepsc.TrainConfig(mode, cfg.channel, cfg.train_snr, cfg.batch_size, 1, cfg.lr, seed + 1, cfg.k, eval_size=8)


def exp_sweep_sparsity(cfg: ExperimentConfig) -> Points:
    corpus = corpus_for(cfg)
    i = 0
    for seed in cfg.seeds:
        for mode in cfg.csi_mode:
            base = _model_for(cfg, corpus, mode, seed)
            den = _den(cfg, mode, seed, base)
            for gamma in cfg.gamma:
                model = _clone(base)
                masks = slim.prune_model(model, gamma)
                if gamma > 0 and cfg.fine_tune_epochs:
                    slim.finetune_pruned(model, corpus.train[: cfg.train_size], cfg.fine_tune_epochs, _tune_cfg(cfg, mode, seed), den)
                rows = [_row(cfg, seed, mode, "", gamma, 32, "sparsity", slim.sparsity(masks))]
                for snr in cfg.snr_db:
                    i += 1
                    rows.append(_row(cfg, seed, mode, snr, gamma, 32, "bleu", _bleu(cfg, model, corpus, snr, mode, point_seed(seed, i), den)))
                yield rows


def exp_sweep_bits(cfg: ExperimentConfig) -> Points:
    seed = cfg.seeds[0]
    for gamma in cfg.gamma:
        for m in cfg.m_bits:
            yield [_row(cfg, seed, "", "", gamma, m, "psi", slim.nominal_ratio(gamma, m))]
    if not cfg.with_model:
        return
    corpus = corpus_for(cfg)
    i = 0
    for seed in cfg.seeds:
        for mode in cfg.csi_mode:
            base = _model_for(cfg, corpus, mode, seed)
            den = _den(cfg, mode, seed, base)
            for gamma in cfg.gamma:
                for m in cfg.m_bits:
                    model = _clone(base)
                    masks = slim.prune_model(model, gamma)
                    train = corpus.train[: cfg.train_size]
                    if m < 32:
                        slim.qat_finetune(model, slim.QuantConfig(m), train, max(cfg.fine_tune_epochs, 1), _tune_cfg(cfg, mode, seed), den)
                    elif gamma > 0 and cfg.fine_tune_epochs:
                        slim.finetune_pruned(model, train, cfg.fine_tune_epochs, _tune_cfg(cfg, mode, seed), den)
                    rows = [_row(cfg, seed, mode, "", gamma, m, "psi_measured", slim.CompressionReport.from_masks(masks, gamma, m).psi)]
                    for snr in cfg.snr_db:
                        i += 1
                        rows.append(_row(cfg, seed, mode, snr, gamma, m, "bleu", _bleu(cfg, model, corpus, snr, mode, point_seed(seed, i), den)))
                    yield rows


def exp_estimator_mse(cfg: ExperimentConfig) -> Points:
    n_ant = 2
    stats = channel_stats(cfg.channel, cfg.k)
    for seed in cfg.seeds:
        den = None
        if cfg.channel != "awgn":
            pairs = csi.make_pairs(cfg.channel, n_ant, 20_000, (0.0, 10.0), np.random.default_rng(10_000 + seed), k=cfg.k)
            den = csi.train_denoiser(pairs, (0.0, 10.0), kind=cfg.channel, epochs=6, seed=seed)
        for i, snr in enumerate(cfg.snr_db):
            rough, H, s2 = csi.make_pairs(cfg.channel, n_ant, cfg.trials, (snr, snr), np.random.default_rng(point_seed(seed, i)), k=cfg.k)
            rows = [
                _row(cfg, seed, "rough", snr, metric="mse_ls", value=csi.channel_mse(rough, H)),
                _row(cfg, seed, "lmmse", snr, metric="mse_lmmse", value=csi.channel_mse(csi.lmmse_estimate(rough, stats, s2[0]), H)),
            ]
            if den is not None:
                rows.append(_row(cfg, seed, "refined", snr, metric="mse_refined", value=csi.channel_mse(csi.refine(den, rough, s2), H)))
            yield rows


def exp_baseline(cfg: ExperimentConfig) -> Points:
    corpus = corpus_for(cfg)
    test = corpus.test[: cfg.test_size]
    i = 0
    for seed in cfg.seeds:
        for scheme in cfg.schemes:
            book = classic.build_codebook(scheme, corpus.train)
            for mode in cfg.csi_mode:
                for snr in cfg.snr_db:
                    i += 1
                    res = classic.baseline_pipeline(test, book, classic.SCHEMES[scheme], cfg.channel, snr, mode, seed=point_seed(seed, i),
                                                    k=cfg.k, vocab_size=len(corpus.vocab.itos))
                    yield [_row(cfg, seed, mode, snr, metric=f"bleu_{scheme}", value=res.bleu)]


def _clone(model):
    out = deepsc.TransceiverModel(model.cfg, seed=model.seed)
    out.params.load_state(model.params.state())
    out.constellation = model.constellation
    return out


RUNNERS = {
    "train": exp_train,
    "evaluate": exp_evaluate,
    "sweep-snr": exp_sweep_snr,
    "sweep-sparsity": exp_sweep_sparsity,
    "sweep-bits": exp_sweep_bits,
    "estimator-mse": exp_estimator_mse,
    "baseline": exp_baseline,
}


def run(cfg: ExperimentConfig) -> Path:
    """Execute every point of ``cfg``, writing rows as each point completes."""
    path = cfg.out_path
    with ResultWriter(path) as out:
        points = RUNNERS[cfg.experiment](cfg)
        while True:
            t0 = time.perf_counter()
            try:
                rows = next(points)
            except StopIteration:
                break
            dt = time.perf_counter() - t0
            for r in rows:
                r.wall_time = dt
            out.write(rows)
    return path


# -- plot data -------------------------------------------------------------------------
# figure id -> (experiment filter, metric filter, channel filter, x column, series column)
FIGURES = {
    "fig5": ("sweep-snr", ("bleu",), None, "snr_db", "m_bits"),
    "fig6": ("estimator-mse", ("mse_ls", "mse_lmmse", "mse_refined"), None, "snr_db", "metric"),
    "fig7": (("sweep-snr", "baseline"), None, "rician", "snr_db", "csi_mode+metric"),
    "fig8": (("sweep-snr", "baseline"), None, "rayleigh", "snr_db", "csi_mode+metric"),
    "fig9": ("sweep-sparsity", ("bleu",), None, "snr_db", "gamma"),
    "fig10": ("sweep-bits", ("bleu",), None, "snr_db", "m_bits"),
}
REQUIRED = ("experiment", "channel", "metric", "value", "snr_db", "csi_mode", "gamma", "m_bits")


def emit_plotdata(csv_path, figure_id: str, out_path=None) -> Path:
    """Project result rows onto an ``x, y, series`` table for one figure analog."""
    if figure_id not in FIGURES:
        raise ValueError(f"unknown figure id {figure_id!r}; expected one of {sorted(FIGURES)}")
    rows = read_results(csv_path)
    with open(csv_path, newline="") as f:
        header = next(csv.reader(ln for ln in f if not ln.startswith("#")), [])
    missing = [c for c in REQUIRED if c not in header]
    if missing:
        raise ValueError(f"{csv_path} lacks required columns: {', '.join(missing)}")
    exps, metrics, channel, xcol, scol = FIGURES[figure_id]
    exps = (exps,) if isinstance(exps, str) else exps
    out_path = Path(out_path) if out_path else Path(csv_path).with_name(f"{figure_id}.csv")
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "y", "series"])
        for r in rows:
            if r["experiment"] not in exps or (metrics and r["metric"] not in metrics):
                continue
            if channel and r["channel"] != channel:
                continue
            if r["snr_db"] == "" or not r["metric"].startswith(("bleu", "mse")):
                continue
            series = "/".join(r[c] for c in scol.split("+") if r[c])
            w.writerow([r[xcol], r["value"], series])
    return out_path


# -- CLI -------------------------------------------------------------------------------
def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python -m litesc.bench", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config")
    p_val = sub.add_parser("validate", help="check a config and list every problem")
    p_val.add_argument("config")
    p_plot = sub.add_parser("plot", help="write x,y,series plot data for a figure analog")
    p_plot.add_argument("csv")
    p_plot.add_argument("figure_id", choices=sorted(FIGURES))
    p_plot.add_argument("-o", "--output")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    if args.cmd == "plot":
        try:
            print(emit_plotdata(args.csv, args.figure_id, args.output))
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        return 0
    try:
        cfg = load_config(args.config)
    except ValidationError as exc:
        print(exc, file=sys.stderr)
        return 2
    if args.cmd == "validate":
        print(f"ok: {cfg.experiment} -> {cfg.out_path}")
        return 0
    try:
        path = run(cfg)
    except Exception:
        log.exception("run aborted; completed rows kept in %s", cfg.out_path)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
