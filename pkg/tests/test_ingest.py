import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pupilemo.errors import ClockRegression, LabelUndeterminable, MalformedLine, MixedLabels
from pupilemo.ingest import (
    Recording,
    label_from_name,
    load_recording,
    parse_line,
    synth_clock,
    write_recording,
)
from pupilemo.labels import EmotionLabel

FIG4_ROWS = """\
3/3/2023 6:09:33 AM,3.234989,2.993118, happy
3/3/2023 6:09:33 AM,3.167664,3.030701, happy
3/3/2023 6:09:33 AM,3.148697,2.956329, happy
3/3/2023 6:09:33 AM,3.078522,2.965942, happy
"""


def test_parse_line_first_figure_row():
    assert parse_line("3/3/2023 6:09:33 AM,3.234989,2.993118, happy") == (
        "3/3/2023 6:09:33 AM", 3.234989, 2.993118, EmotionLabel.HAPPY)


def test_parse_line_sentinel_passes_through():
    _, left, right, label = parse_line("3/3/2023 6:09:33 AM,-1,-1, fear")
    assert (left, right, label) == (-1.0, -1.0, EmotionLabel.FEAR)


def test_parse_line_three_fields_has_no_label():
    assert parse_line("3/3/2023 6:09:33 AM,3.0,2.9")[3] is None


@pytest.mark.parametrize("line, field", [
    ("3/3/2023 6:09:33 AM,3.0", "field count"),
    ("3/3/2023 6:09:33 AM,3.0,2.0,happy,extra", "field count"),
    ("3/3/2023 6:09:33 AM,abc,2.0", "left_mm"),
    ("3/3/2023 6:09:33 AM,3.0,nan", "right_mm"),
    ("3/3/2023 6:09:33 AM,3.0,2.0, bored", "label"),
])
def test_parse_line_errors_name_the_field(line, field):
    with pytest.raises(MalformedLine) as exc:
        parse_line(line, lineno=7)
    assert exc.value.field == field
    assert exc.value.lineno == 7
    assert "line 7" in str(exc.value)


def test_clock_synthesis_at_120hz():
    assert synth_clock(4, 120).tolist() == [0, 8, 17, 25]


def test_clock_strictly_increasing_up_to_1khz():
    for rate in (1, 60, 120, 250.5, 999, 1000):
        assert (np.diff(synth_clock(5000, rate)) > 0).all()


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_bytes(text.encode("latin-1"))
    return path


def test_load_recording_27_rows_labeled_from_name(tmp_path):
    rows = "".join(f"3/3/2023 6:09:33 AM,{3 + i / 100},{2.9 + i / 100}\n" for i in range(27))
    rec = load_recording(_write(tmp_path, "session_happy.csv", rows), 120)
    assert len(rec) == 27
    assert rec.label is EmotionLabel.HAPPY
    assert rec.t_ms[:4].tolist() == [0, 8, 17, 25]


def test_load_recording_empty_file(tmp_path):
    rec = load_recording(_write(tmp_path, "session_sad.csv", ""))
    assert len(rec) == 0 and rec.label is EmotionLabel.SAD


def test_load_recording_mixed_labels(tmp_path):
    text = FIG4_ROWS + "3/3/2023 6:09:34 AM,3.0,3.0, sad\n"
    with pytest.raises(MixedLabels):
        load_recording(_write(tmp_path, "x.csv", text))


def test_label_column_beats_file_name(tmp_path):
    rec = load_recording(_write(tmp_path, "session_fear.csv", FIG4_ROWS))
    assert rec.label is EmotionLabel.HAPPY


def test_no_label_anywhere(tmp_path):
    with pytest.raises(LabelUndeterminable):
        load_recording(_write(tmp_path, "session.csv", "3/3/2023 6:09:33 AM,3.0,3.0\n"))


def test_crlf_and_blank_lines(tmp_path):
    text = FIG4_ROWS.replace("\n", "\r\n") + "\r\n\r\n"
    rec = load_recording(_write(tmp_path, "a.csv", text))
    assert len(rec) == 4
    assert rec.left_mm[0] == 3.234989


def test_wallclock_going_backwards(tmp_path):
    text = "3/3/2023 6:09:34 AM,3.0,3.0, happy\n3/3/2023 6:09:33 AM,3.0,3.0, happy\n"
    with pytest.raises(ClockRegression):
        load_recording(_write(tmp_path, "a.csv", text))


def test_bad_wallclock(tmp_path):
    with pytest.raises(MalformedLine) as exc:
        load_recording(_write(tmp_path, "a.csv", "yesterday,3.0,3.0, happy\n"))
    assert exc.value.field == "wallclock"


def test_label_from_name():
    assert label_from_name("session_anger.csv") is EmotionLabel.ANGER
    assert label_from_name("Fear-run2.csv") is EmotionLabel.FEAR
    assert label_from_name("happy_and_sad.csv") is None
    assert label_from_name("happiness.csv") is None


diameters = st.one_of(st.just(-1.0), st.floats(0.001, 8.0, allow_nan=False))


@settings(max_examples=40, deadline=None)
@given(rows=st.lists(st.tuples(diameters, diameters), max_size=300),
       label=st.sampled_from(list(EmotionLabel)))
def test_write_then_load_round_trip(tmp_path_factory, rows, label):
    left = [r[0] for r in rows]
    right = [r[1] for r in rows]
    name = f"session_{label.token}.csv"
    rec = Recording(synth_clock(len(rows), 120.0), left, right, label, name, 120.0)
    path = tmp_path_factory.mktemp("rt") / name
    write_recording(rec, path)
    again = load_recording(path, 120.0)
    assert again == rec
    non_empty = [ln for ln in path.read_text(encoding="latin-1").splitlines() if ln.strip()]
    assert len(again) == len(non_empty)
