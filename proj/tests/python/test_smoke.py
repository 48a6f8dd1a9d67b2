import math

import pytest

import _anticipate as ant


def test_utilities():
    assert ant.tcn_receptive_field(3) == 15
    p = ant.softmax([math.log(1.0), math.log(2.0), math.log(3.0)])
    assert p == pytest.approx([1 / 6, 2 / 6, 3 / 6])
    frames = ant.segments_to_frames([0, 1], [0.5, 0.5], 4)
    assert frames == [0, 0, 1, 1]
    assert ant.moc_accuracy([0, 0, 1], [0, 0, 1], 2) == pytest.approx(1.0)
    with pytest.raises(ant.InputError):
        ant.moc_accuracy([0], [0, 1], 2)


def test_end_to_end(tmp_path):
    grammar = tmp_path / "grammar.txt"
    data = tmp_path / "data"
    ckpt = tmp_path / "model.ckpt"

    ant.write_default_grammar(str(grammar))
    train_ids, test_ids = ant.generate_dataset(str(grammar), str(data), videos=15, seed=3)
    assert len(train_ids) == 12
    assert len(test_ids) == 3

    log = ant.train(
        str(data), str(ckpt), epochs=3, hidden_dim=16, tcn_layers=3,
        tcn_filters=8, heads=2, seed=1,
    )
    assert len(log) == 3
    assert log[-1][3] < log[0][3]  # total loss decreases

    cells = ant.evaluate(str(ckpt), str(data))
    assert len(cells) == 8
    for obs, pred, moc in cells:
        assert 0.0 <= moc <= 1.0

    segs, durs, frames = ant.predict(str(ckpt), str(data), test_ids[0], obs=0.2, pred=0.3)
    assert len(segs) == len(durs)
    assert sum(durs) == pytest.approx(1.0)
    assert frames, "prediction window must not be empty"


def test_missing_checkpoint_raises(tmp_path):
    with pytest.raises(ant.IoError):
        ant.evaluate(str(tmp_path / "nope.ckpt"), str(tmp_path))
