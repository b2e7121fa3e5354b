"""End-to-end pipeline stages behind the command line.

Every stage reads and writes inside the run's output directory::

    <output_dir>/
        config.json                 resolved configuration
        corpus/                     corpus.csv, corpus.bin, corpus.json
        discriminator/              pretrained gender discriminator checkpoint
        fader/, fader-noadv/        fader checkpoints and losses.csv
        eval/                       report.json plus ROC, PCA-scatter and MI CSVs

All randomness comes from named substreams of the run seed and no wall-clock
values are written, so a rerun with the same configuration reproduces every
file byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, replace
from importlib import metadata
from pathlib import Path

import numpy as np

from . import fader as fd
from .config import RunConfig
from .errors import DataError, NumericError, ValidationError
from .metrics import (
    SpeakerClassifier, binary_accuracy, eer, mi_table, pca_fit, pca_project, probe_accuracy,
    roc_curve, select_mi_pair, verification_trials,
)
from .speaker_space import (
    Corpus, fit_standardizer, generate_corpus, read_corpus_binary, split_utterances, substream,
    write_corpus_binary, write_corpus_csv,
)

log = logging.getLogger(__name__)

REPORT_FORMAT = "voxfader-report/1"
MODES = ("original", "est_gender", "inv_gender", "de_gender")
MI_ROWS = MODES + ("latent_code",)
VARIANTS = {"adversarial": "fader", "no_adversarial": "fader-noadv"}
_CONDITIONING = {"est_gender": fd.ESTIMATED, "inv_gender": fd.INVERTED, "de_gender": fd.NEUTRAL}


def _write_config(cfg: RunConfig) -> None:
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "config.json").write_text(cfg.to_json())


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


# ------------------------------------------------------------ stages

def gen_data(cfg: RunConfig) -> Path:
    """Generate the synthetic corpus in CSV and binary form."""
    _write_config(cfg)
    corpus = generate_corpus(cfg.corpus)
    directory = cfg.out / "corpus"
    write_corpus_binary(corpus, directory, cfg.corpus)
    write_corpus_csv(corpus, directory / "corpus.csv")
    log.info("wrote %d utterances to %s", len(corpus), directory)
    return directory


def load_corpus(cfg: RunConfig) -> Corpus:
    directory = cfg.out / "corpus"
    manifest = directory / "corpus.json"
    if not manifest.exists():
        raise DataError(f"{directory}: no corpus found; run gen-data first")
    try:
        stored = json.loads(manifest.read_text()).get("config_sha256")
        corpus = read_corpus_binary(directory)
    except (OSError, ValueError) as exc:
        raise DataError(f"{directory}: unreadable corpus ({exc})") from None
    if stored != cfg.corpus.digest():
        raise DataError(f"{directory}: corpus was generated from a different configuration")
    return corpus


def _split(cfg: RunConfig, corpus: Corpus):
    return split_utterances(corpus, cfg.split.holdout_fraction, cfg.seed)


def _disc_meta(cfg: RunConfig) -> dict:
    return {"seed": cfg.seed, "pretrain": asdict(cfg.pretrain), "corpus_sha256": cfg.corpus.digest(),
            "holdout_fraction": cfg.split.holdout_fraction}


def pretrain(cfg: RunConfig) -> fd.PretrainedDiscriminator:
    """Fit the gender discriminator on the training split and checkpoint it."""
    corpus = load_corpus(cfg)
    train_idx, held_idx = _split(cfg, corpus)
    h, g = corpus.embeddings, corpus.genders
    standardizer = fit_standardizer(h[train_idx])
    disc = fd.pretrain_discriminator(h[train_idx], g[train_idx], standardizer, cfg.pretrain, cfg.seed,
                                     heldout=(h[held_idx], g[held_idx]))
    directory = cfg.out / "discriminator"
    fd.save_discriminator(disc, directory)
    meta_path = directory / "run.json"
    meta_path.write_text(_dumps(_disc_meta(cfg)))
    log.info("discriminator held-out accuracy %.4f", disc.history[-1].get("heldout_accuracy", float("nan")))
    return disc


def load_pretrained(cfg: RunConfig, directory: Path | None = None) -> fd.PretrainedDiscriminator:
    directory = cfg.out / "discriminator" if directory is None else Path(directory)
    if not (directory / "manifest.json").exists():
        raise DataError(f"{directory}: no discriminator checkpoint; run pretrain first")
    meta = json.loads((directory / "run.json").read_text()) if (directory / "run.json").exists() else None
    if meta != _disc_meta(cfg):
        raise DataError(f"{directory}: discriminator was trained under a different configuration")
    return fd.load_discriminator(directory)


def _write_losses(path: Path, history) -> None:
    _write_csv(path, fd.HISTORY_FIELDS, ([row[k] for k in fd.HISTORY_FIELDS] for row in history))


def train(cfg: RunConfig, adversarial: bool = True, resume: bool = False,
          until_epoch: int | None = None) -> fd.FaderModel:
    """Train one fader variant, checkpointing every ``train.checkpoint_every`` epochs.

    The discriminator is pretrained first unless a matching checkpoint exists.
    With ``resume`` an existing fader checkpoint is continued; ``until_epoch``
    stops early and leaves a resumable checkpoint behind.
    """
    corpus = load_corpus(cfg)
    train_idx, _ = _split(cfg, corpus)
    if (cfg.out / "discriminator" / "manifest.json").exists():
        disc = load_pretrained(cfg)
    else:
        disc = pretrain(cfg)
    fcfg = cfg.fader if adversarial else replace(cfg.fader, use_adversarial=False)
    h = corpus.embeddings[train_idx]
    labels = fd.training_labels(corpus.genders[train_idx], h, fcfg, disc)
    trainer = fd.FaderTrainer(h, labels, disc.standardizer, fcfg, cfg.seed)
    directory = cfg.out / VARIANTS["adversarial" if adversarial else "no_adversarial"]
    if resume and (directory / "manifest.json").exists():
        try:
            trainer.restore(directory)
        except ValidationError as exc:
            raise DataError(str(exc)) from None
        log.info("resuming %s at epoch %d", directory, trainer.epoch)

    stop = fcfg.epochs if until_epoch is None else min(until_epoch, fcfg.epochs)

    def checkpoint(t: fd.FaderTrainer) -> None:
        if t.epoch % cfg.train.checkpoint_every == 0 or t.epoch == stop:
            t.model.trained = t.epoch >= fcfg.epochs
            t.save(directory)
            _write_losses(directory / "losses.csv", t.history)

    start = trainer.epoch
    model = trainer.train(stop, on_epoch=checkpoint)
    if trainer.epoch == start:
        checkpoint(trainer)
    return model


# ------------------------------------------------------------ evaluation

def _finite(name: str, x: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values in {name}")
    return x


def _representations(model: fd.FaderModel, disc: fd.PretrainedDiscriminator, h: np.ndarray) -> dict:
    reps = {"original": h}
    for mode, cond in _CONDITIONING.items():
        reps[mode] = _finite(mode, fd.manipulate(model, disc, h, cond))
    reps["latent_code"] = _finite("latent_code", model.encode(h))
    return reps


def evaluate(cfg: RunConfig, ckpt_dir=None) -> dict:
    """Run the full metric battery on the held-out split and write the report files."""
    ckpt = cfg.out if ckpt_dir is None else Path(ckpt_dir)
    corpus = load_corpus(cfg)
    train_idx, held_idx = _split(cfg, corpus)
    disc = load_pretrained(cfg, ckpt / "discriminator")
    if disc.params["disc.W1"].shape[1] != corpus.dim:
        raise DataError("discriminator input dimension does not match the corpus")
    h, g, spk = corpus.embeddings[held_idx], corpus.genders[held_idx], corpus.speaker_ids[held_idx]
    ev = cfg.evaluation
    out = cfg.out / "eval"
    out.mkdir(parents=True, exist_ok=True)

    clf = SpeakerClassifier(corpus.embeddings[train_idx], corpus.speaker_ids[train_idx])
    report = {
        "format": REPORT_FORMAT,
        "seed": cfg.seed,
        "config": {k: v for k, v in cfg.to_dict().items() if k != "output_dir"},
        "config_sha256": cfg.digest(),
        "corpus_sha256": hashlib.sha256((cfg.out / "corpus" / "corpus.bin").read_bytes()).hexdigest(),
        "discriminator_heldout_accuracy": binary_accuracy(disc.posterior(h), g),
        "gender_accuracy": {}, "latent_probe_accuracy": {}, "speaker_eer": {}, "mutual_information": {},
        "pca_pair": {},
        "runtime": _runtime(len(train_idx), len(held_idx)),
    }
    found = False
    for variant, sub in VARIANTS.items():
        if not (ckpt / sub / "manifest.json").exists():
            continue
        found = True
        model = fd.load_fader(ckpt / sub)
        if not model.trained:
            raise DataError(f"{ckpt / sub}: training did not finish; resume it before evaluating")
        if model.ae["enc.W"].shape[1] != corpus.dim:
            raise DataError(f"{ckpt / sub}: checkpoint dimension does not match the corpus")
        reps = _representations(model, disc, h)
        report["gender_accuracy"][variant] = {m: binary_accuracy(disc.posterior(reps[m]), g) for m in MODES}
        report["latent_probe_accuracy"][variant] = probe_accuracy(
            model.encode(corpus.embeddings), corpus.genders, corpus.speaker_ids, ev.probe_max_iter)

        eers = {}
        for mode in MODES:
            trials = verification_trials(clf, reps[mode], spk, substream(cfg.seed, "trials"), ev.n_impostors)
            eers[mode] = eer(trials)
            _write_csv(out / f"roc_{variant}_{mode}.csv", ("fpr", "tpr"), roc_curve(trials))
        report["speaker_eer"][variant] = eers

        mi_rows, mi_csv = {}, []
        for row in MI_ROWS:
            proj = pca_project(pca_fit(reps[row]), reps[row], min(ev.pca_dims, reps[row].shape[1]))
            pair, value = select_mi_pair(proj, g, ev.k)
            mi_rows[row] = {"mi": value, "pair": list(pair)}
            table = mi_table(proj, g, ev.k)
            mi_csv += [(row, i, j, table[i, j]) for i in range(proj.shape[1]) for j in range(i + 1, proj.shape[1])]
            _write_csv(out / f"pca_scatter_{variant}_{row}.csv",
                       ("speaker_id", "gender", f"pc{pair[0]}", f"pc{pair[1]}"),
                       zip(spk.tolist(), g.tolist(), proj[:, pair[0]], proj[:, pair[1]]))
        _write_csv(out / f"mi_{variant}.csv", ("representation", "i", "j", "mi"), mi_csv)
        report["mutual_information"][variant] = mi_rows
        report["pca_pair"][variant] = mi_rows["original"]["pair"]
    if not found:
        raise DataError(f"{ckpt}: no fader checkpoints found; run train first")
    (out / "report.json").write_text(_dumps(report))
    return report


def _runtime(n_train: int, n_held: int) -> dict:
    versions = {}
    for dist in ("numpy", "scipy", "scikit-learn"):
        try:
            versions[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            versions[dist] = None
    return {"n_train": n_train, "n_heldout": n_held, "versions": versions}


def run_all(cfg: RunConfig, ablation: bool = True) -> dict:
    """gen-data, pretrain, train (and the no-adversarial ablation), eval."""
    gen_data(cfg)
    pretrain(cfg)
    train(cfg, adversarial=True)
    if ablation:
        train(cfg, adversarial=False)
    return evaluate(cfg)


# ------------------------------------------------------------ aggregation

def collect_reports(directory) -> list[dict]:
    paths = sorted(Path(directory).rglob("report.json"))
    reports = []
    for p in paths:
        try:
            data = json.loads(p.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"{p}: unreadable report ({exc})") from None
        if data.get("format") == REPORT_FORMAT:
            reports.append(data)
    if not reports:
        raise DataError(f"{directory}: no evaluation reports found")
    return reports


def _mean_tables(reports: list[dict]) -> dict:
    """Average every numeric leaf of the metric tables across reports."""
    def merge(values):
        if all(isinstance(v, dict) for v in values):
            keys = sorted(set.intersection(*(set(v) for v in values)))
            return {k: merge([v[k] for v in values]) for k in keys}
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            return float(np.mean(values))
        return None

    tables = ("gender_accuracy", "latent_probe_accuracy", "speaker_eer", "discriminator_heldout_accuracy")
    out = {t: merge([r[t] for r in reports]) for t in tables}
    out["mutual_information"] = merge([
        {v: {row: cell["mi"] for row, cell in rows.items()} for v, rows in r["mutual_information"].items()}
        for r in reports])
    return out


def aggregate(directory, out_path) -> dict:
    """Mean tables over every report found below ``directory``; Markdown or JSON by suffix."""
    reports = collect_reports(directory)
    summary = {"format": "voxfader-summary/1", "seeds": [r["seed"] for r in reports], "mean": _mean_tables(reports)}
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if out_path.suffix == ".json":
        out_path.write_text(_dumps(summary))
    else:
        out_path.write_text(render_markdown(summary, reports))
    return summary


def render_markdown(summary: dict, reports: list[dict]) -> str:
    mean = summary["mean"]
    seeds = summary["seeds"]
    lines = [f"# Evaluation summary ({len(seeds)} run{'s' if len(seeds) != 1 else ''}, seeds {seeds})", ""]

    def table(title, rows, cols, cell, scale=100.0, fmt="{:.1f}"):
        lines.extend([f"## {title}", "", "| row | " + " | ".join(cols) + " |", "|---" * (len(cols) + 1) + "|"])
        for row in rows:
            vals = []
            for c in cols:
                v = cell(row, c)
                vals.append("-" if v is None else fmt.format(v * scale))
            lines.append(f"| {row} | " + " | ".join(vals) + " |")
        lines.append("")

    ga = mean["gender_accuracy"] or {}
    table("Gender accuracy of the pretrained discriminator (%)", MODES, list(ga),
          lambda r, c: ga.get(c, {}).get(r))
    eers = mean["speaker_eer"] or {}
    table("Speaker verification EER (%)", MODES, list(eers), lambda r, c: eers.get(c, {}).get(r))
    mi = mean["mutual_information"] or {}
    table("Mutual information with gender (nats)", MI_ROWS, list(mi),
          lambda r, c: mi.get(c, {}).get(r), scale=1.0, fmt="{:.3f}")
    probe = mean["latent_probe_accuracy"] or {}
    table("Latent-code probe accuracy (%)", ["latent_code"], list(probe), lambda r, c: probe.get(c))
    return "\n".join(lines)
