import pytest
from hypothesis import given, strategies as st

from failpredict.model import (
    EventFailureMatrix,
    EventMask,
    ModelError,
    load_model,
    row_mask,
    validate_matrix,
)

# rows of the 5x8 event-failure matrix, event 1 first
PAPER_GRID = [
    [1, 0, 0, 0, 1, 1, 0, 0],
    [0, 0, 1, 1, 0, 1, 1, 0],
    [0, 1, 0, 0, 1, 0, 1, 1],
    [0, 0, 0, 0, 1, 1, 0, 0],
    [1, 0, 0, 0, 1, 0, 0, 1],
]


def test_load_paper_model(paper_model):
    assert paper_model.n_failures == 5
    assert paper_model.n_events == 8
    assert paper_model.grid() == PAPER_GRID
    assert [e.name for e in paper_model.events] == [f"E{j}" for j in range(1, 9)]
    assert [f.index for f in paper_model.failures] == [1, 2, 3, 4, 5]


def test_smallest_model():
    m = load_model("events: E1\nfailure F: E1\n")
    assert m.grid() == [[1]]


def test_out_of_order_rejected():
    with pytest.raises(ModelError, match="events out of temporal order"):
        load_model("events: E1 E2 E3 E4 E5\nfailure F: E5 E2\n")


@pytest.mark.parametrize(
    "text, message",
    [
        ("events: A B\nfailure F: A C\n", "unknown event 'C'"),
        ("events: A B\nfailure F:\n", "empty event sequence"),
        ("events: A B\nfailure F: A B\nfailure G: A B\n", "duplicate rows"),
        ("failure F: A\n", "first line must be"),
        ("events: A A\nfailure F: A\n", "duplicate event name"),
        ("events: A B\nfailure F: A\nfailure F: B\n", "duplicate failure name"),
        ("events: A B\n", "no failures"),
        ("events: A B\nfailure F: A A\n", "temporal order"),
        ("events: A B\nfailure A: B\n", "clashes"),
        ("events: A B\nfailures F: A\n", "expected 'failure"),
    ],
)
def test_load_errors(text, message):
    with pytest.raises(ModelError, match=message):
        load_model(text)


def test_error_carries_line_number():
    with pytest.raises(ModelError) as info:
        load_model("# header\nevents: A B\n\nfailure F: B A\n")
    assert info.value.line == 4


def test_comments_and_commas():
    m = load_model("events: A, B, C  # three\n# skip\nfailure X: A, C\n")
    assert m.grid() == [[1, 0, 1]]


def test_validate_paper_matrix_clean(paper_model):
    report = validate_matrix(paper_model)
    assert report.ok
    assert report.violations == [] and report.warnings == []


def test_validate_duplicate_rows():
    m = EventFailureMatrix.from_grid([[1, 1, 0], [1, 1, 0]])
    report = validate_matrix(m)
    assert not report.ok
    assert any("duplicate failure signature" in v for v in report.violations)


def test_validate_long_chain_warns():
    m = EventFailureMatrix.from_grid([[1, 1, 1, 1, 1]])
    report = validate_matrix(m)
    assert report.ok
    assert len(report.warnings) == 1
    assert "chain length 5" in report.warnings[0]


def test_validate_reports_order_and_empty_rows():
    m = EventFailureMatrix(
        EventFailureMatrix.from_grid([[1, 1]]).events,
        EventFailureMatrix.from_grid([[1, 1], [1, 1]]).failures,
        ((2, 1), ()),
    )
    report = validate_matrix(m)
    assert any("out of temporal order" in v for v in report.violations)
    assert any("empty failure row" in v for v in report.violations)


def test_row_mask(paper_model):
    assert row_mask(paper_model, "F1").to_list() == [1, 0, 0, 0, 1, 1, 0, 0]
    assert row_mask(paper_model, 4).to_list() == [0, 0, 0, 0, 1, 1, 0, 0]
    assert str(row_mask(paper_model, "F1")) == "10001100"
    assert row_mask(load_model("events: E1\nfailure F1: E1\n"), "F1").to_list() == [1]
    with pytest.raises(KeyError):
        row_mask(paper_model, "F9")


def test_grid_text(paper_model):
    assert paper_model.to_grid_text().splitlines() == ["".join(map(str, r)) for r in PAPER_GRID]


def test_event_mask_ops():
    m = EventMask.of(8, [1, 5])
    assert 5 in m and 6 not in m
    assert list(m) == [1, 5] and len(m) == 2
    assert m.with_event(6).to_list() == [1, 0, 0, 0, 1, 1, 0, 0]
    assert (m & EventMask.of(8, [5, 8])).to_list() == EventMask.of(8, [5]).to_list()
    with pytest.raises(ValueError):
        EventMask.of(8, [9])
    with pytest.raises(ValueError):
        EventMask(2, 0b100)


@st.composite
def models(draw):
    n_events = draw(st.integers(1, 10))
    pool = st.frozensets(st.integers(1, n_events), min_size=1)
    rows = draw(st.lists(pool, min_size=1, max_size=8, unique=True))
    names = [f"ev{j}" for j in range(1, n_events + 1)]
    failures = [(f"f{i}", [names[j - 1] for j in sorted(r)]) for i, r in enumerate(rows, 1)]
    return EventFailureMatrix.from_sequences(names, failures)


@given(models())
def test_config_round_trip(m):
    again = load_model(m.to_config())
    assert again == m
    assert again.grid() == m.grid()
    assert [e.name for e in again.events] == [e.name for e in m.events]
    assert [f.name for f in again.failures] == [f.name for f in m.failures]


@given(models())
def test_row_mask_matches_cells(m):
    for f in m.failures:
        bits = row_mask(m, f).to_list()
        assert bits == [m.cell(f.index, j) for j in range(1, m.n_events + 1)]


@given(models())
def test_loaded_models_have_no_violations(m):
    assert validate_matrix(load_model(m.to_config())).violations == []
