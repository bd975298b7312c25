"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
The default seed is 42 unless ``PATHANON_SEED`` is set.
"""
from __future__ import annotations

import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

import click

from . import __version__
from .anonymize import McAdamsConfig, PitchShiftConfig
from .audio_io import read_wav, write_wav
from .dsp import ASV_PRESET, CLASSIFIER_PRESET, compute_log_mel
from .embedding import SpeakerEmbedding, write_embeddings
from .errors import DataError, NumericalError, PathanonError
from .experiment import (
    AnonymizerSpec,
    DatasetManifest,
    FeatureStore,
    UtteranceRecord,
    canonical_json,
    emit_report,
    load_manifest,
    load_report,
    make_report,
    render_report,
    run_fairness_eval,
    run_inversion_attack,
    run_privacy_eval,
    run_sweep,
    run_utility_comparison,
    write_corpus,
    write_manifest,
)
from .experiment.evaluation import validate_alphas
from .metrics import identification_odds

SEED_ENV = "PATHANON_SEED"
DEFAULT_ALPHAS = "0.5:1.0:0.1"


def parse_alphas(text: str) -> List[float]:
    """``min:max:step`` (inclusive) or a comma-separated list; sorted, in (0, 1.2]."""
    try:
        if ":" in text:
            lo, hi, step = (float(p) for p in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            n = int(round((hi - lo) / step)) + 1
            values = [round(lo + i * step, 10) for i in range(n)]
        else:
            values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise click.BadParameter(f"expected min:max:step or a comma list, got {text!r}") from None
    try:
        return validate_alphas(values)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None


def _seed_option(f):
    return click.option("--seed", type=int, default=42, envvar=SEED_ENV, show_default=True,
                        help=f"Global seed (env {SEED_ENV}).")(f)


def _jobs_option(f):
    return click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
                        help="Worker processes; results do not depend on this.")(f)


def _method_options(f):
    for opt in reversed([
        click.option("--method", type=click.Choice(["mcadams", "pitch", "identity"]), default="mcadams",
                     show_default=True),
        click.option("--alpha", type=float, default=None, help="Fixed McAdams coefficient."),
        click.option("--alpha-min", type=float, default=0.75, show_default=True),
        click.option("--alpha-max", type=float, default=0.90, show_default=True),
        click.option("--semitone-min", type=float, default=2.0, show_default=True),
        click.option("--semitone-max", type=float, default=5.0, show_default=True),
    ]):
        f = opt(f)
    return f


def _spec(method, alpha, alpha_min, alpha_max, semitone_min, semitone_max) -> AnonymizerSpec:
    return AnonymizerSpec(
        method,
        alpha=alpha if method == "mcadams" else None,
        mcadams=McAdamsConfig(alpha_min=alpha_min, alpha_max=alpha_max),
        pitch=PitchShiftConfig(semitone_min=semitone_min, semitone_max=semitone_max),
    )


def _announce(report: dict) -> None:
    click.echo(f"seed={report['seed']} config_hash={report['config_hash']} version={report['toolkit_version']}")


def _finish(report: dict, path: Optional[str], fmt: str) -> None:
    if path:
        emit_report(report, fmt, path)
        click.echo(f"report written to {path}")


def _fmt(eer) -> str:
    return "n/a" if eer is None else f"{eer:.2f}%"


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="pathanon")
def cli():
    """Speaker anonymization and privacy/utility evaluation toolkit."""


# -- anonymize -----------------------------------------------------------------

def _anonymize_one(item):
    utt, spec, seed = item
    clip = read_wav(utt.path)
    out, params = spec.apply(clip, seed, utt.speaker_id, "test")
    return utt, out, params


@cli.command()
@click.argument("method", type=click.Choice(["mcadams", "pitch"]))
@click.option("--in", "manifest_path", required=True, type=click.Path(), help="Manifest directory.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Output directory.")
@click.option("--alpha", type=float, default=None, help="Fixed McAdams coefficient.")
@click.option("--alpha-min", type=float, default=0.75, show_default=True)
@click.option("--alpha-max", type=float, default=0.90, show_default=True)
@click.option("--semitone-min", type=float, default=2.0, show_default=True)
@click.option("--semitone-max", type=float, default=5.0, show_default=True)
@_seed_option
@_jobs_option
def anonymize(method, manifest_path, out_dir, alpha, alpha_min, alpha_max, semitone_min, semitone_max, seed, jobs):
    """Anonymize every utterance of a manifest; writes WAVs, JSON sidecars and a manifest."""
    spec = _spec(method, alpha, alpha_min, alpha_max, semitone_min, semitone_max)
    manifest = load_manifest(manifest_path)
    out = Path(out_dir)
    (out / "wav").mkdir(parents=True, exist_ok=True)
    config = {"command": "anonymize", "anonymizer": spec.describe()}
    _announce(make_report("anonymize", seed, config, {}))
    items = [(u, spec, seed) for u in manifest.utterances]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_anonymize_one, items))
    else:
        results = [_anonymize_one(i) for i in items]
    records = []
    for utt, clip, params in results:
        wav = out / "wav" / f"{utt.utterance_id}.wav"
        write_wav(clip, wav)
        sidecar = spec.provenance(utt.utterance_id, seed, params)
        wav.with_suffix(".json").write_text(canonical_json(sidecar), encoding="utf-8")
        records.append(UtteranceRecord(utt.utterance_id, utt.speaker_id, wav))
        shown = " ".join(f"{k}={v:.4f}" for k, v in params.items())
        click.echo(f"{utt.utterance_id} {method} {shown}")
    write_manifest(DatasetManifest(manifest.speakers, tuple(records)), out)


# -- eval ------------------------------------------------------------------------

@cli.group("eval")
def eval_group():
    """Privacy, utility, fairness and attack evaluations."""


def _eval_options(f):
    for opt in reversed([
        click.option("--manifest", "manifest_path", required=True, type=click.Path(), help="Manifest directory."),
        click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None),
        click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True),
        click.option("--positives", type=click.IntRange(min=1), default=10, show_default=True,
                     help="Positive trials per speaker."),
        click.option("--negative-ratio", type=click.FloatRange(min=0, min_open=True), default=1.0,
                     show_default=True),
    ]):
        f = opt(f)
    return _jobs_option(_seed_option(f))


def _base_config(command, manifest_path, positives, negative_ratio, **extra) -> dict:
    return {"command": command, "manifest": str(manifest_path), "positives_per_speaker": positives,
            "negative_ratio": negative_ratio, **extra}


@eval_group.command("privacy")
@_method_options
@_eval_options
def eval_privacy(method, alpha, alpha_min, alpha_max, semitone_min, semitone_max,
                 manifest_path, report_path, fmt, positives, negative_ratio, seed, jobs):
    """EER with original enrollment against original and anonymized test audio."""
    spec = _spec(method, alpha, alpha_min, alpha_max, semitone_min, semitone_max)
    manifest = load_manifest(manifest_path)
    config = _base_config("eval privacy", manifest_path, positives, negative_ratio, anonymizer=spec.describe())
    body = run_privacy_eval(manifest, spec, seed, positives_per_speaker=positives,
                            negative_ratio=negative_ratio, jobs=jobs)
    report = make_report("privacy", seed, config, body)
    _announce(report)
    click.echo(f"EER original {_fmt(body['original']['eer_percent'])} "
               f"anonymized {_fmt(body['anonymized']['eer_percent'])} "
               f"({body['original']['n_trials']} trials)")
    _finish(report, report_path, fmt)


@eval_group.command("invert")
@_method_options
@_eval_options
def eval_invert(method, alpha, alpha_min, alpha_max, semitone_min, semitone_max,
                manifest_path, report_path, fmt, positives, negative_ratio, seed, jobs):
    """Naive versus anonymized-enrollment attacker."""
    spec = _spec(method, alpha, alpha_min, alpha_max, semitone_min, semitone_max)
    manifest = load_manifest(manifest_path)
    config = _base_config("eval invert", manifest_path, positives, negative_ratio, anonymizer=spec.describe())
    body = run_inversion_attack(manifest, spec, seed, positives_per_speaker=positives,
                                negative_ratio=negative_ratio, jobs=jobs)
    report = make_report("inversion", seed, config, body)
    _announce(report)
    click.echo(f"EER original {_fmt(body['eer_original'])} naive {_fmt(body['eer_naive'])} "
               f"inverse {_fmt(body['eer_inverse'])}")
    _finish(report, report_path, fmt)


@eval_group.command("utility")
@_method_options
@_eval_options
@click.option("--task", default=None, help="Disorder label to detect (default: most frequent).")
@click.option("--repetitions", type=click.IntRange(min=2), default=10, show_default=True)
def eval_utility(method, alpha, alpha_min, alpha_max, semitone_min, semitone_max,
                 manifest_path, report_path, fmt, positives, negative_ratio, seed, jobs, task, repetitions):
    """Reference-classifier utility on original versus anonymized audio."""
    spec = _spec(method, alpha, alpha_min, alpha_max, semitone_min, semitone_max)
    manifest = load_manifest(manifest_path)
    config = _base_config("eval utility", manifest_path, positives, negative_ratio, anonymizer=spec.describe(),
                          task=task, repetitions=repetitions)
    body = run_utility_comparison(manifest, spec, seed, task=task, repetitions=repetitions, jobs=jobs)
    report = make_report("utility", seed, config, body)
    _announce(report)
    click.echo(f"task {body['task']}: AUROC original {body['original']['overall']['auroc']:.2f}% "
               f"anonymized {body['anonymized']['overall']['auroc']:.2f}% "
               f"(t-test p={body['auroc_t_test']['p']:.3g})")
    _finish(report, report_path, fmt)


@eval_group.command("fairness")
@_method_options
@_eval_options
@click.option("--task", default=None, help="Disorder label to detect (default: most frequent).")
def eval_fairness(method, alpha, alpha_min, alpha_max, semitone_min, semitone_max,
                  manifest_path, report_path, fmt, positives, negative_ratio, seed, jobs, task):
    """Per-subgroup EER, AUROC and statistical parity difference."""
    spec = _spec(method, alpha, alpha_min, alpha_max, semitone_min, semitone_max)
    manifest = load_manifest(manifest_path)
    config = _base_config("eval fairness", manifest_path, positives, negative_ratio, anonymizer=spec.describe(),
                          task=task)
    body = run_fairness_eval(manifest, spec, seed, task=task, jobs=jobs, positives_per_speaker=positives,
                             negative_ratio=negative_ratio)
    report = make_report("fairness", seed, config, body)
    _announce(report)
    for cond in ("original", "anonymized"):
        for key, groups in body["utility"][cond]["ptd"].items():
            parts = ", ".join(f"{g} {v['ptd']:+.3f}" for g, v in groups.items())
            click.echo(f"{cond} PtD by {key}: {parts}")
    _finish(report, report_path, fmt)


@eval_group.command("sweep")
@click.option("--alphas", default=DEFAULT_ALPHAS, show_default=True, help="min:max:step or comma list.")
@click.option("--task", default=None, help="Disorder label to detect (default: most frequent).")
@_eval_options
def eval_sweep(alphas, task, manifest_path, report_path, fmt, positives, negative_ratio, seed, jobs):
    """Fixed-alpha McAdams sweep of privacy and utility."""
    values = parse_alphas(alphas)
    manifest = load_manifest(manifest_path)
    config = _base_config("eval sweep", manifest_path, positives, negative_ratio, alphas=values, task=task)
    body = run_sweep(manifest, values, seed, task=task, positives_per_speaker=positives,
                     negative_ratio=negative_ratio, jobs=jobs)
    report = make_report("sweep", seed, config, body)
    _announce(report)
    for row in body["rows"]:
        click.echo(f"alpha={row['alpha']:.2f} EER={row['eer_percent']:.2f}% AUROC={row['auroc']:.2f}%")
    _finish(report, report_path, fmt)


@eval_group.command("odds")
@click.option("--n", "n_speakers", type=click.IntRange(min=2), required=True, help="Speakers in the search pool.")
@click.option("--eer", "eer_percent", type=click.FloatRange(0, 100), required=True, help="EER in percent.")
def eval_odds(n_speakers, eer_percent):
    """Re-identification odds for one speaker hidden among N."""
    result = identification_odds(n_speakers, eer_percent)
    click.echo(f"1:{result['odds_denominator']}")
    click.echo(f"expected false accepts {result['expected_false_accepts']:.2f}")


# -- features / embed / corpus / report ----------------------------------------------

@cli.command()
@click.option("--in", "wav_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--preset", type=click.Choice(["asv", "classifier"]), default="asv", show_default=True)
def features(wav_path, out_path, preset):
    """Log-Mel spectrogram of one WAV file as text."""
    clip = read_wav(wav_path)
    config = (ASV_PRESET if preset == "asv" else CLASSIFIER_PRESET).for_rate(clip.sample_rate)
    mel = compute_log_mel(clip, config)
    Path(out_path).write_text(mel.to_text(), encoding="utf-8")
    click.echo(f"{mel.n_frames} frames x {config.n_mels} bands -> {out_path}")


@cli.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_seed_option
@_jobs_option
def embed(manifest_path, out_path, seed, jobs):
    """Reference speaker embeddings for every utterance (VAD applied)."""
    manifest = load_manifest(manifest_path)
    feats = FeatureStore(manifest, seed, jobs=jobs).get(manifest.utterances, AnonymizerSpec.identity())
    write_embeddings([SpeakerEmbedding(feats[u.utterance_id].embedding, u.speaker_id, u.utterance_id)
                      for u in manifest.utterances], out_path)
    click.echo(f"{len(feats)} embeddings -> {out_path}")


@cli.command("synth-corpus")
@click.option("--speakers", type=click.IntRange(min=2), required=True)
@click.option("--utterances-per-speaker", type=click.IntRange(min=2), required=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_seed_option
def synth_corpus(speakers, utterances_per_speaker, out_dir, seed):
    """Write a seeded synthetic corpus and its manifest."""
    manifest = write_corpus(out_dir, speakers, utterances_per_speaker, seed)
    click.echo(f"seed={seed}")
    click.echo(f"{len(manifest.speakers)} speakers, {len(manifest.utterances)} utterances -> {out_dir}")


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="csv", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def report(in_path, fmt, out_path):
    """Re-render a JSON report (for example as flat CSV)."""
    data = load_report(in_path)
    if out_path:
        emit_report(data, fmt, out_path)
    else:
        click.echo(render_report(data, fmt), nl=False)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        result = cli.main(args=argv, prog_name="pathanon", standalone_mode=False)
        return result if isinstance(result, int) else 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except NumericalError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except (DataError, FileNotFoundError, PathanonError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except ValueError as exc:
        click.echo(f"usage error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
