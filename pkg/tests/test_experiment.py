import json
from pathlib import Path

import numpy as np
import pytest

from pathanon.errors import DataError
from pathanon.experiment import (
    AnonymizerSpec,
    DatasetManifest,
    FeatureStore,
    ReferenceClassifier,
    SpeakerRecord,
    UtteranceRecord,
    generate_trials,
    load_manifest,
    load_report,
    make_report,
    make_split,
    render_report,
    run_inversion_attack,
    run_pooled_eval,
    run_privacy_eval,
    run_sweep,
    run_utility_eval,
    train_reference_classifier,
    write_corpus,
)
from pathanon.experiment.evaluation import validate_alphas
from pathanon.experiment.report import config_hash, emit_report


def _manifest(specs):
    """specs: iterable of (speaker_id, gender, age, label, n_utterances)."""
    speakers, utts = [], []
    for sid, gender, age, label, n in specs:
        speakers.append(SpeakerRecord(sid, gender, age, label))
        utts += [UtteranceRecord(f"{sid}_{j}", sid, Path(f"{sid}_{j}.wav")) for j in range(n)]
    return DatasetManifest(tuple(speakers), tuple(utts))


def _write_csv(root, speakers, utterances):
    (root / "speakers.csv").write_text("speaker_id,gender,age_group,label\n" + speakers)
    (root / "utterances.csv").write_text("utterance_id,speaker_id,path\n" + utterances)


# -- manifest ----------------------------------------------------------------

def test_manifest_load(tmp_path):
    _write_csv(tmp_path, "a,F,adult,control\nb,M,adult,dysarthria\nc,F,child,clp\n",
               "u1,a,wav/u1.wav\nu2,b,wav/u2.wav\nu3,c,wav/u3.wav\n")
    m = load_manifest(tmp_path)
    assert len(m.speakers) == 3
    assert m.utterances[0].path == tmp_path / "wav/u1.wav"


@pytest.mark.parametrize("utts,msg", [
    ("u1,a,x.wav\nu2,zz,y.wav\n", "dangling speaker"),
    ("u1,a,x.wav\nu1,a,y.wav\n", "duplicate utterance_id"),
])
def test_manifest_errors(tmp_path, utts, msg):
    _write_csv(tmp_path, "a,F,adult,control\n", utts)
    with pytest.raises(DataError, match=msg):
        load_manifest(tmp_path)


def test_manifest_missing(tmp_path):
    with pytest.raises(DataError, match="missing manifest"):
        load_manifest(tmp_path)


def test_manifest_bad_tag():
    with pytest.raises(DataError, match="unknown gender"):
        _manifest([("a", "X", "adult", "control", 1)])


def test_write_corpus_roundtrip(tmp_path):
    m = write_corpus(tmp_path, 3, 2, seed=1)
    back = load_manifest(tmp_path)
    assert back.speakers == m.speakers
    assert [u.path for u in back.utterances] == [u.path for u in m.utterances]
    assert all(p.path.exists() for p in back.utterances)


# -- split -------------------------------------------------------------------

def _clinic(n_controls, n_patients, age="adult"):
    specs = [(f"c{i:03d}", "FM"[i % 2], age, "control", 1) for i in range(n_controls)]
    specs += [(f"p{i:03d}", "FM"[i % 2], age, "dysarthria", 1) for i in range(n_patients)]
    return _manifest(specs)


def test_split_large_adult_task():
    plan = make_split(_clinic(81, 542), "dysarthria", seed=42)
    ctl = [s for s in plan.train if s.startswith("c")]
    assert len(ctl) == 56 and len(plan.train) - len(ctl) == 112
    assert plan == make_split(_clinic(81, 542), "dysarthria", seed=42)


def test_split_small_balanced():
    plan = make_split(_clinic(10, 10), "dysarthria", seed=3)
    count = lambda ids, p: sum(s.startswith(p) for s in ids)
    assert (count(plan.train, "c"), count(plan.train, "p")) == (7, 7)
    assert (count(plan.test, "c"), count(plan.test, "p")) == (3, 3)
    assert not set(plan.train) & set(plan.test)


def test_split_child_caps_controls():
    specs = [(f"c{i}", "F", "child", "control", 1) for i in range(40)]
    specs += [(f"p{i}", "F", "child", "clp", 1) for i in range(10)]
    plan = make_split(_manifest(specs), "clp", seed=1)
    ctl = sum(s.startswith("c") for s in plan.train)
    assert ctl == int(1.5 * 7)


def test_split_too_small():
    with pytest.raises(DataError):
        make_split(_clinic(1, 5), "dysarthria", seed=1)


# -- trials ------------------------------------------------------------------

def test_trials_two_by_two():
    m = _manifest([("a", "F", "adult", "control", 2), ("b", "M", "adult", "control", 2)])
    plan = generate_trials(["a", "b"], m.utterances, seed=1, positives_per_speaker=1)
    labels = [t.label for t in plan.trials]
    assert labels.count(True) == 2 and labels.count(False) == 2
    assert plan == generate_trials(["a", "b"], m.utterances, seed=1, positives_per_speaker=1)
    for t in plan.trials:
        assert t.test_utterance not in plan.enrollment[t.enroll_speaker]
        assert t.label == (t.test_speaker == t.enroll_speaker)


def test_trials_one_speaker():
    m = _manifest([("a", "F", "adult", "control", 4)])
    with pytest.raises(DataError):
        generate_trials(["a"], m.utterances, seed=1)


# -- classifier ----------------------------------------------------------------

def _toy(seed=0):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(-2, 0.5, (30, 3)), rng.normal(2, 0.5, (20, 3))])
    y = np.r_[np.zeros(30), np.ones(20)]
    return x, y


def test_classifier_separable():
    x, y = _toy()
    clf = train_reference_classifier(x, y, seed=1)
    assert np.all((clf.predict_proba(x) >= 0.5) == (y == 1))
    assert clf.loss_trace[-1] < clf.loss_trace[0]


def test_classifier_label_flip_and_determinism():
    x, y = _toy(1)
    a = train_reference_classifier(x, y, seed=9, epochs=30)
    b = train_reference_classifier(x, 1 - y, seed=9, epochs=30)
    assert np.allclose(a.weights, -b.weights, atol=1e-12)
    assert a.bias == pytest.approx(-b.bias, abs=1e-12)
    again = train_reference_classifier(x, y, seed=9, epochs=30)
    assert np.array_equal(a.weights, again.weights) and a.bias == again.bias


def test_classifier_single_class():
    with pytest.raises(DataError):
        train_reference_classifier(np.ones((4, 2)), np.ones(4), seed=1)


# -- utility -----------------------------------------------------------------

IDENTITY_CLF = ReferenceClassifier(np.array([1.0]), 0.0, np.zeros(1), np.ones(1), 0)


def test_utility_constant_scores():
    res = run_utility_eval(IDENTITY_CLF, np.zeros((6, 1)), [1, 0, 1, 0, 1, 0], {"gender": ["F"] * 6})
    assert res["overall"]["auroc"] == 50.0
    assert res["ptd"]["gender"]["F"]["ptd"] == 0.0


def test_utility_hand_case():
    # logits: positive when x >= 0, so threshold 0.5 on probabilities
    x = np.array([[2.0], [1.0], [-1.0], [0.5], [-2.0], [-0.5], [1.5], [-3.0]])
    y = [1, 1, 1, 0, 0, 0, 1, 0]
    gender = ["F", "F", "M", "M", "F", "M", "F", "M"]
    res = run_utility_eval(IDENTITY_CLF, x, y, {"gender": gender}, threshold=0.5)
    # TP 3, FN 1, FP 1, TN 3
    assert res["overall"]["accuracy"] == 75.0
    assert res["overall"]["sensitivity"] == 75.0
    assert res["overall"]["specificity"] == 75.0
    # F: 4 items all correct; M: items 3,4,6,8 -> 2 correct
    assert res["subgroups"]["gender"]["F"]["accuracy"] == 100.0
    assert res["subgroups"]["gender"]["M"]["accuracy"] == 50.0
    assert res["ptd"]["gender"]["F"]["ptd"] == pytest.approx(0.5)
    assert res["ptd"]["gender"]["M"]["ptd"] == -res["ptd"]["gender"]["F"]["ptd"]


def test_utility_single_class_subgroup_flagged():
    x = np.array([[1.0], [-1.0], [2.0], [0.5]])
    res = run_utility_eval(IDENTITY_CLF, x, [1, 0, 1, 1], {"age_group": ["adult", "adult", "child", "child"]})
    child = res["subgroups"]["age_group"]["child"]
    assert child["undefined"] and child["auroc"] is None


# -- privacy / pipeline --------------------------------------------------------

def test_identity_privacy(small_corpus):
    m, clips = small_corpus
    res = run_privacy_eval(m, AnonymizerSpec.identity(), 3, audio=clips)
    assert res["anonymized"]["eer_percent"] == pytest.approx(res["original"]["eer_percent"], abs=1e-9)


def test_identity_inversion(small_corpus):
    m, clips = small_corpus
    res = run_inversion_attack(m, AnonymizerSpec.identity(), 3, audio=clips)
    assert res["eer_naive"] == res["eer_inverse"]


def test_privacy_empty_test_set(small_corpus):
    m, clips = small_corpus
    with pytest.raises(DataError, match="empty test set"):
        run_privacy_eval(m, AnonymizerSpec.identity(), 3, audio=clips, speakers=[])


@pytest.mark.slow
def test_privacy_mcadams_raises_eer(corpus20):
    m, clips, store = corpus20
    res = run_privacy_eval(m, AnonymizerSpec("mcadams", alpha=0.7), 42, store=store)
    assert res["anonymized"]["eer_percent"] > res["original"]["eer_percent"]


def test_spec_parameters_are_keyed():
    spec = AnonymizerSpec("mcadams")
    a = spec.parameters(1, "spk1", "test")["alpha"]
    assert a == spec.parameters(1, "spk1", "test")["alpha"]
    assert a != spec.parameters(1, "spk1", "enroll")["alpha"]
    assert 0.75 <= a <= 0.9
    with pytest.raises(ValueError):
        AnonymizerSpec("mcadams", alpha=1.5)
    with pytest.raises(ValueError):
        AnonymizerSpec("noise")


def test_feature_store_jobs_independent(small_corpus):
    m, clips = small_corpus
    spec = AnonymizerSpec("mcadams")
    a = FeatureStore(m, 7, audio=clips, jobs=1).get(m.utterances[:4], spec)
    b = FeatureStore(m, 7, audio=clips, jobs=2).get(m.utterances[:4], spec)
    for k in a:
        assert np.array_equal(a[k].embedding, b[k].embedding)
        assert a[k].params == b[k].params


# -- sweep, pooled, reports ------------------------------------------------------

def test_validate_alphas():
    assert validate_alphas([0.9, 0.5, 0.9]) == [0.5, 0.9]
    for bad in ([], [0.0], [1.3]):
        with pytest.raises(ValueError):
            validate_alphas(bad)


def test_sweep_alpha_one_near_original(small_corpus):
    m, clips = small_corpus
    res = run_sweep(m, [1.0], 3, audio=clips)
    assert len(res["rows"]) == 1
    assert abs(res["rows"][0]["eer_percent"] - res["original"]["eer_percent"]) <= 2.0
    assert res["eer_auroc_correlation"]["r"] is None


def test_pooled_requires_controls():
    m = _manifest([("a", "F", "adult", "dysarthria", 2), ("b", "M", "adult", "clp", 2)])
    with pytest.raises(DataError, match="control"):
        run_pooled_eval(m, AnonymizerSpec.identity(), 1)


@pytest.mark.slow
def test_pooled_counts_and_uniform_effect(corpus20):
    m, clips, store = corpus20
    res = run_pooled_eval(m, AnonymizerSpec("mcadams", alpha=0.7), 42, store=store)
    counts = res["label_counts"]
    assert counts["patient"] == sum(counts["per_disorder"].values())
    assert counts["patient"] + counts["control"] == len(m.speakers)
    p = res["privacy"]["patient"]["anonymized"]["eer_percent"]
    c = res["privacy"]["control"]["anonymized"]["eer_percent"]
    assert abs(p - c) <= 10.0


def test_report_roundtrip_and_csv(tmp_path):
    body = {"rows": [{"alpha": a, "eer_percent": 10 * a, "auroc": 80.0, "ptd": {"gender": {"F": {"ptd": 0.01}}}}
                     for a in (0.5, 0.6, 0.7)], "nan_field": float("nan")}
    report = make_report("sweep", 42, {"alphas": [0.5, 0.6, 0.7]}, body)
    emit_report(report, "json", tmp_path / "r.json")
    back = load_report(tmp_path / "r.json")
    assert back == json.loads(render_report(report))
    assert back["nan_field"] is None
    lines = render_report(report, "csv").strip().splitlines()
    assert len(lines) == 3 + 1
    assert lines[0].startswith("alpha,eer_percent,auroc")
    assert lines[0].endswith("seed,toolkit_version,config_hash")


def test_config_hash_stable():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 16


def test_emit_report_unwritable(tmp_path):
    (tmp_path / "f").write_text("")
    with pytest.raises(DataError):
        emit_report({"a": 1}, "json", tmp_path / "f" / "r.json")
