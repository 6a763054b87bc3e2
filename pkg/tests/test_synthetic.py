import numpy as np
import pytest

from taskpace.dataset import ValidationError
from taskpace.synthetic import SyntheticSpec, generate_synthetic


def majority_predictor_accuracy(spec, split):
    # Predicts each task's training-majority label unconditionally.
    hits = sum(1 for s in split.samples if spec.majority_label(s.task_type_id) in s.answer)
    return hits / len(split.samples)


def test_deterministic_given_seed():
    spec = SyntheticSpec(num_tasks=3, samples_per_task=50, seed=42)
    a = generate_synthetic(spec)
    b = generate_synthetic(spec)
    for da, db in zip(a, b):
        np.testing.assert_array_equal(da.features, db.features)
        assert [s.answer for s in da.samples] == [s.answer for s in db.samples]


def test_full_bias_reversed_prior():
    spec = SyntheticSpec(num_tasks=4, samples_per_task=500, bias_strength=1.0, seed=1)
    train, test_id, test_ood = generate_synthetic(spec)
    assert majority_predictor_accuracy(spec, test_id) >= 0.99
    assert majority_predictor_accuracy(spec, test_ood) <= 0.01


def test_uniform_bias_matches_across_splits():
    # bias 1/L makes the train prior uniform; a classifier using only the
    # informative block scores the same on both test splits up to noise.
    spec = SyntheticSpec(num_tasks=4, samples_per_task=4000, labels_per_task=3,
                         bias_strength=1 / 3, seed=7, info_noise=(0.1, 0.1))
    train, test_id, test_ood = generate_synthetic(spec)
    L = spec.labels_per_task

    def info_only_accuracy(split):
        feats = split.features[:, spec.num_tasks:spec.num_tasks + L]
        preds = feats.argmax(axis=1)
        return np.mean([p in s.answer for p, s in zip(preds, split.samples)])

    for t in range(spec.num_tasks):
        labels = [s.answer[0] for s in train.samples if s.task_type_id == t]
        counts = np.bincount(labels, minlength=L) / len(labels)
        assert np.all(np.abs(counts - 1 / 3) < 0.05)
    a_id = info_only_accuracy(test_id)
    a_ood = info_only_accuracy(test_ood)
    assert abs(a_id - a_ood) < 0.03


def test_majority_frequency_tracks_bias():
    spec = SyntheticSpec(num_tasks=4, samples_per_task=2000, bias_strength=0.9, seed=3)
    train, _, _ = generate_synthetic(spec)
    for t in range(spec.num_tasks):
        labels = [s.answer[0] for s in train.samples if s.task_type_id == t]
        freq = np.mean([l == spec.majority_label(t) for l in labels])
        assert abs(freq - 0.9) < 0.02


def test_spurious_correlation_present_then_broken():
    spec = SyntheticSpec(num_tasks=2, samples_per_task=5000, bias_strength=0.9, seed=5)
    train, _, test_ood = generate_synthetic(spec)
    col = spec.num_tasks + spec.labels_per_task

    def agreement(split):
        flag = split.features[:, col] > spec.shortcut_scale / 2
        is_maj = np.array([spec.majority_label(s.task_type_id) in s.answer for s in split.samples])
        return np.mean(flag == is_maj)

    assert agreement(train) > 0.85
    assert abs(agreement(test_ood) - 0.5) < 0.05


def test_feature_layout_and_padding():
    spec = SyntheticSpec(num_tasks=3, samples_per_task=10, labels_per_task=2, seed=0, feature_dim=10)
    train, _, _ = generate_synthetic(spec)
    assert train.feature_dim == 10
    assert train.features.shape == (30, 10)


def test_validation():
    with pytest.raises(ValidationError):
        SyntheticSpec(num_tasks=1)
    with pytest.raises(ValidationError):
        SyntheticSpec(labels_per_task=1)
    with pytest.raises(ValidationError):
        SyntheticSpec(bias_strength=1.5)
    with pytest.raises(ValidationError):
        SyntheticSpec(feature_dim=3)
    with pytest.raises(ValidationError):
        SyntheticSpec(prior_shift="sideways")


def test_sample_ids_distinct_across_splits():
    spec = SyntheticSpec(num_tasks=2, samples_per_task=5, seed=0)
    train, test_id, test_ood = generate_synthetic(spec)
    ids = [s.sample_id for ds in (train, test_id, test_ood) for s in ds.samples]
    assert len(ids) == len(set(ids))


def test_spec_json_roundtrip():
    spec = SyntheticSpec(num_tasks=5, samples_per_task=7, seed=9, info_noise=(0.2, 0.3))
    again = SyntheticSpec.from_json(spec.to_json())
    assert again == spec
