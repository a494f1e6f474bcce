import pytest

from driftbench.report import (HISTORY_COLUMNS, ForgettingRecord,
                               forgetting_report, history_from_csv)
from driftbench.strategy import EvalRecord


def _agg(aggregates, strategy, test_partition):
    return next(a for a in aggregates
                if a["strategy"] == strategy and a["test_partition"] == test_partition)


def _record(strategy, seed, step, test_partition, acc):
    return EvalRecord(strategy, seed, step, test_partition, acc, acc, acc, acc)


def _triangle(strategy, seed, by_cell: dict[tuple[int, int], float]):
    return [_record(strategy, seed, i, j, score) for (j, i), score in sorted(
        by_cell.items(), key=lambda kv: (kv[0][1], kv[0][0]))]


def test_forgetting_hand_example():
    history = _triangle("ft", 0, {
        (1, 1): 0.8, (1, 2): 0.4, (2, 2): 0.9,
    })
    records, aggregates = forgetting_report(history)
    first = records[0]
    assert first.test_partition == 1
    assert first.scores == [0.8, 0.4]
    assert first.first_score == 0.8
    assert first.final_score == 0.4
    assert first.absolute_drop == pytest.approx(0.4)
    assert first.relative_drop == pytest.approx(0.5)
    second = records[1]
    assert second.scores == [0.9]
    assert second.absolute_drop == 0.0
    agg = _agg(aggregates, "ft", 1)
    assert agg["median_relative_drop"] == pytest.approx(0.5)
    assert agg["n_seeds"] == 1


def test_forgetting_zero_first_score_has_no_relative_drop():
    history = _triangle("ft", 0, {(1, 1): 0.0, (1, 2): 0.2, (2, 2): 0.5})
    records, aggregates = forgetting_report(history)
    assert records[0].relative_drop is None
    agg = _agg(aggregates, "ft", 1)
    assert agg["median_relative_drop"] is None
    assert agg["median_absolute_drop"] == pytest.approx(-0.2)


def test_forgetting_one_record_per_partition_per_run():
    cells = {(j, i): 0.5 + 0.01 * i for i in range(1, 4) for j in range(1, i + 1)}
    history = _triangle("repeat", 3, cells) + _triangle("repeat", 4, cells)
    records, aggregates = forgetting_report(history)
    assert [(r.strategy, r.seed, r.test_partition) for r in records] == [
        ("repeat", 3, 1), ("repeat", 3, 2), ("repeat", 3, 3),
        ("repeat", 4, 1), ("repeat", 4, 2), ("repeat", 4, 3),
    ]
    assert _agg(aggregates, "repeat", 1)["n_seeds"] == 2
    for record in records:
        assert len(record.scores) == 3 - record.test_partition + 1


def test_forgetting_median_over_seeds():
    def run(seed, first, last):
        return _triangle("ft", seed, {(1, 1): first, (1, 2): last, (2, 2): 0.5})

    history = run(0, 0.8, 0.4) + run(1, 0.8, 0.6) + run(2, 0.8, 0.8)
    _, aggregates = forgetting_report(history)
    agg = _agg(aggregates, "ft", 1)
    assert agg["median_first"] == pytest.approx(0.8)
    assert agg["median_final"] == pytest.approx(0.6)
    assert agg["median_relative_drop"] == pytest.approx(0.25)


def test_forgetting_uses_requested_metric():
    record = EvalRecord("ft", 0, 1, 1, 0.9, 0.2, 0.3, 0.4)
    records, _ = forgetting_report([record], metric="precision")
    assert records[0].scores == [0.2]


def test_forgetting_rejects_incomplete_triangle():
    history = _triangle("ft", 0, {(1, 1): 0.8, (2, 2): 0.9})  # missing (1, 2)
    with pytest.raises(ValueError, match="triangle"):
        forgetting_report(history)
    with pytest.raises(ValueError, match="empty"):
        forgetting_report([])


def test_history_csv_round_trip(tmp_path):
    rows = [
        "# config: {}",
        ",".join(HISTORY_COLUMNS),
        "ft,0,1,1,0.5,0.4,0.3,0.2",
        "ft,0,2,1,0.25,0.2,0.1,0.05",
        "ft,0,2,2,1,1,1,1",
    ]
    path = tmp_path / "history.csv"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    history = history_from_csv(path)
    assert len(history) == 3
    assert history[0] == EvalRecord("ft", 0, 1, 1, 0.5, 0.4, 0.3, 0.2)
    records, _ = forgetting_report(history)
    assert records[0].relative_drop == pytest.approx(0.5)


def test_history_csv_validation(tmp_path):
    path = tmp_path / "history.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(ValueError, match="header"):
        history_from_csv(path)

    path.write_text(",".join(HISTORY_COLUMNS) + "\nft,0,1\n", encoding="utf-8")
    with pytest.raises(ValueError, match="malformed row"):
        history_from_csv(path)

    with pytest.raises(FileNotFoundError):
        history_from_csv(tmp_path / "missing.csv")


def test_forgetting_record_properties():
    record = ForgettingRecord("ft", 0, 1, [0.9, 0.7, 0.3], relative_drop=None)
    assert record.first_score == 0.9
    assert record.final_score == 0.3
    assert record.absolute_drop == pytest.approx(0.6)
