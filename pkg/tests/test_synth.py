from dataclasses import replace

import numpy as np
import pytest

from pupilemo import features as ft
from pupilemo import synth
from pupilemo.ingest import SENTINEL, load_recording
from pupilemo.labels import LABELS, EmotionLabel
from pupilemo.preprocess import remove_artifacts

SHORT = synth.SynthConfig(duration_s=60.0)


def test_default_recording_shape_and_range():
    rec = synth.generate(synth.SynthConfig(), EmotionLabel.HAPPY)
    assert len(rec) == 72_000
    assert rec.t_ms[:4].tolist() == [0, 8, 17, 25]
    for eye in (rec.left_mm, rec.right_mm):
        live = eye[eye != SENTINEL]
        assert live.min() >= 2.0 and live.max() <= 5.0


def test_no_blinks_no_dropouts_means_no_sentinels():
    cfg = replace(SHORT, blink_rate_per_min=0.0, one_eye_dropout_prob=0.0)
    for label in LABELS:
        rec = synth.generate(cfg, label)
        assert not (rec.left_mm == SENTINEL).any() and not (rec.right_mm == SENTINEL).any()


def test_sentinel_fraction_tracks_the_poisson_expectation():
    expected = 15 / 60 * 0.2            # blinks per second x mean duration in seconds
    for seed in range(10):
        s = synth.simulate(replace(synth.SynthConfig(), seed=seed, one_eye_dropout_prob=0.0),
                           EmotionLabel.FEAR)
        frac = s.blink_mask.mean()
        assert 0.5 * expected <= frac <= 1.5 * expected


def test_masks_account_for_every_sentinel():
    s = synth.simulate(SHORT, EmotionLabel.SAD)
    rec = s.recording
    hit = (rec.left_mm == SENTINEL) | (rec.right_mm == SENTINEL)
    np.testing.assert_array_equal(hit, s.blink_mask | s.dropout_mask)
    both = (rec.left_mm == SENTINEL) & (rec.right_mm == SENTINEL)
    np.testing.assert_array_equal(both, s.blink_mask)
    assert s.dropout_mask.sum() > 0


def test_dataset_is_deterministic():
    a = synth.generate_dataset(SHORT)
    b = synth.generate_dataset(SHORT)
    assert [r.label for r in a] == list(LABELS)
    assert all(x == y for x, y in zip(a, b))


def test_seed_changes_values_not_shapes():
    a = synth.generate_dataset(SHORT)
    b = synth.generate_dataset(replace(SHORT, seed=7))
    for x, y in zip(a, b):
        assert len(x) == len(y)
        assert not np.array_equal(x.left_mm, y.left_mm)


def test_class_streams_are_independent():
    other = replace(SHORT, class_params=SHORT.class_params[:3] + (synth.ClassParams(4.5, 1.0, 0.1),))
    assert synth.generate(SHORT, EmotionLabel.HAPPY) == synth.generate(other, EmotionLabel.HAPPY)
    assert synth.generate(SHORT, EmotionLabel.FEAR) != synth.generate(other, EmotionLabel.FEAR)


def test_right_eye_follows_left():
    rec = synth.generate(replace(SHORT, blink_rate_per_min=0.0, one_eye_dropout_prob=0.0),
                         EmotionLabel.ANGER)
    assert np.corrcoef(rec.left_mm, rec.right_mm)[0, 1] > 0.9


@pytest.mark.parametrize("label, band", [(EmotionLabel.HAPPY, 0), (EmotionLabel.SAD, 0),
                                         (EmotionLabel.ANGER, 1), (EmotionLabel.FEAR, 2)])
def test_dominant_band_matches_oscillation(label, band):
    rec = synth.generate(replace(SHORT, blink_rate_per_min=0.0, one_eye_dropout_prob=0.0), label)
    freqs, psd = ft.welch_psd(rec.left_mm, rec.sample_rate_hz)
    powers = [psd[(freqs >= lo) & (freqs < hi)].sum() for lo, hi in ft.BANDS]
    assert int(np.argmax(powers)) == band


def test_default_dataset_windows_and_mean_ordering():
    recs = synth.generate_dataset(synth.SynthConfig())
    fm = ft.extract([remove_artifacts(r) for r in recs])
    counts = np.bincount(fm.labels, minlength=4)
    assert 900 <= len(fm) <= 956
    assert counts.max() <= 1.05 * counts.min()
    assert abs(counts / counts.mean() - 1).max() <= 0.02
    means = [fm.X[fm.labels == c, 0].mean() for c in range(4)]
    sad, happy, anger, fear = means[1], means[0], means[2], means[3]
    assert sad < happy < anger < fear


def test_written_files_reload_exactly(tmp_path):
    recs = synth.generate_dataset(replace(SHORT, duration_s=5.0))
    paths = synth.write_dataset(recs, tmp_path)
    assert [p.name for p in paths] == [f"session_{t}.csv" for t in ("happy", "sad", "anger", "fear")]
    first = paths[0].read_text(encoding="latin-1").splitlines()[0]
    assert first.startswith("3/3/2023 6:09:33 AM,") and first.endswith(", happy")
    for rec, path in zip(recs, paths):
        assert load_recording(path, 120.0) == rec


def test_invalid_config():
    with pytest.raises(ValueError):
        synth.SynthConfig(ar_coef=1.0).validate()
    with pytest.raises(ValueError):
        synth.SynthConfig(blink_duration_ms=(300.0, 100.0)).validate()
