"""Corpus handling and evaluation protocols."""
from .classifier import ReferenceClassifier, train_reference_classifier
from .evaluation import (
    default_task,
    eer_summary,
    run_fairness_eval,
    run_inversion_attack,
    run_pooled_eval,
    run_privacy_eval,
    run_sweep,
    run_utility_comparison,
    run_utility_eval,
    score_trials,
)
from .manifest import DatasetManifest, SpeakerRecord, UtteranceRecord, load_manifest, write_manifest
from .pipeline import AnonymizerSpec, FeatureStore, extract_features
from .report import canonical_json, config_hash, emit_report, load_report, make_report, render_report
from .split import SplitPlan, make_split
from .synth import generate_corpus, write_corpus
from .trials import Trial, TrialPlan, generate_trials

__all__ = [
    "AnonymizerSpec", "DatasetManifest", "FeatureStore", "ReferenceClassifier", "SpeakerRecord", "SplitPlan",
    "Trial", "TrialPlan", "UtteranceRecord", "canonical_json", "config_hash", "default_task", "eer_summary",
    "emit_report", "extract_features", "generate_corpus", "generate_trials", "load_manifest", "load_report",
    "make_report", "make_split", "render_report", "run_fairness_eval", "run_inversion_attack", "run_pooled_eval",
    "run_privacy_eval", "run_sweep", "run_utility_comparison", "run_utility_eval", "score_trials",
    "train_reference_classifier", "write_corpus", "write_manifest",
]
