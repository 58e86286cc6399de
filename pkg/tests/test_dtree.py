import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.dtree import (
    Attribute,
    AttributeKind,
    AttributeSchema,
    Dataset,
    Leaf,
    Node,
    TreeParams,
    accuracy,
    candidate_thresholds,
    choose_split,
    classify,
    entropy,
    gain_ratio,
    is_sufficiently_trained,
    load_tree,
    parse_header,
    read_dataset,
    save_tree,
    train,
    tree_from_dict,
    tree_to_dict,
    write_dataset,
)
from src.errors import ConfigError, DomainError, UsageError
from tests import oracles

CAT, NUM = AttributeKind.CATEGORICAL, AttributeKind.CONTINUOUS
UNLIMITED = TreeParams(min_leaf=1, max_depth=1000)


def test_entropy_of_nine_five():
    assert entropy({"yes": 9, "no": 5}) == pytest.approx(0.94029, abs=1e-4)
    assert entropy([9, 5]) == pytest.approx(oracles.entropy([9, 5]))


def test_entropy_rejects_empty_and_negative():
    with pytest.raises(DomainError):
        entropy([0, 0])
    with pytest.raises(DomainError):
        entropy([3, -1])


@given(st.lists(st.integers(0, 40), min_size=1, max_size=6).filter(lambda c: sum(c) > 0))
@settings(max_examples=200, deadline=None)
def test_entropy_bounds(counts):
    """Zero exactly on pure counts, never above the uniform distribution."""
    h = entropy(counts)
    nonzero = sum(1 for c in counts if c)
    assert h == pytest.approx(oracles.entropy(counts), abs=1e-12)
    assert h <= entropy([1] * len(counts)) + 1e-12
    assert (h == 0.0) == (nonzero == 1)


def test_three_way_partition_gain(weather):
    gain, split_info, ratio = gain_ratio(weather, 0)
    assert gain == pytest.approx(0.2467, abs=1e-3)
    assert gain == pytest.approx(oracles.info_gain([5, 9], [[0, 4], [2, 3], [3, 2]]))
    assert split_info == pytest.approx(oracles.entropy([4, 5, 5]))
    assert ratio == pytest.approx(gain / split_info)


def test_gain_ratio_constant_and_perfect_splits():
    schema = AttributeSchema((Attribute("a", CAT, ("x", "y")), Attribute("c", CAT, ("k",))), ("n", "p"))
    data = Dataset(schema, ((("x", "k"), "n"), (("x", "k"), "n"), (("y", "k"), "p"), (("y", "k"), "p")))
    assert gain_ratio(data, 0) == pytest.approx((1.0, 1.0, 1.0))
    assert gain_ratio(data, 1) == (0.0, 0.0, 0.0)


def test_gain_ratio_threshold_misuse(weather):
    with pytest.raises(UsageError):
        gain_ratio(weather, 0, threshold=1.0)
    with pytest.raises(UsageError):
        gain_ratio(weather, 1)


def test_candidate_thresholds_are_midpoints():
    assert candidate_thresholds([70.0, 60.0, 70.0, None]) == [65.0]
    assert candidate_thresholds([1.0]) == []


def test_choose_split_midpoint():
    schema = AttributeSchema((Attribute("t", NUM),), ("cold", "warm"))
    data = Dataset(schema, (((60.0,), "cold"), ((70.0,), "warm")))
    assert choose_split(data) == (0, 65.0)


def test_choose_split_single_label_is_none(weather):
    data = Dataset(weather.schema, tuple((values, "yes") for values, _ in weather.rows))
    assert choose_split(data) is None


def test_choose_split_empty():
    schema = AttributeSchema((Attribute("t", NUM),), ("a",))
    with pytest.raises(UsageError):
        choose_split(Dataset(schema, ()))


def _random_dataset(rng):
    n_attrs = rng.randint(1, 6)
    kinds = [rng.choice(("CAT", "NUM")) for _ in range(n_attrs)]
    attributes = []
    for i, kind in enumerate(kinds):
        if kind == "CAT":
            attributes.append(Attribute(f"a{i}", CAT, tuple("abcd"[: rng.randint(2, 4)])))
        else:
            attributes.append(Attribute(f"a{i}", NUM))
    labels = ("l0", "l1", "l2")[: rng.randint(2, 3)]
    rows = []
    for _ in range(rng.randint(2, 64)):
        values = tuple(
            rng.choice(a.values) if a.kind is CAT else float(rng.randint(0, 9)) for a in attributes
        )
        rows.append((values, rng.choice(labels)))
    return Dataset(AttributeSchema(tuple(attributes), labels), tuple(rows)), kinds


def test_choose_split_agrees_with_brute_force():
    rng = random.Random(20240501)
    for _ in range(200):
        data, kinds = _random_dataset(rng)
        expected = oracles.brute_force_split(data.rows, kinds, data.schema.label_domain)
        assert choose_split(data) == expected


def test_classify_back_on_consistent_datasets():
    rng = random.Random(7)
    for _ in range(200):
        data, _ = _random_dataset(rng)
        first = {}
        for values, label in data.rows:
            first.setdefault(values, label)
        consistent = Dataset(data.schema, tuple(first.items()))
        tree = train(consistent, UNLIMITED)
        assert accuracy(tree, consistent.rows) == 1.0


def test_xor_needs_depth_two():
    schema = AttributeSchema((Attribute("a", CAT, ("0", "1")), Attribute("b", CAT, ("0", "1"))), ("F", "T"))
    rows = ((("0", "0"), "F"), (("0", "1"), "T"), (("1", "0"), "T"), (("1", "1"), "F"))
    tree = train(Dataset(schema, rows), TreeParams(min_leaf=1))
    assert tree.depth() == 2
    for values, label in rows:
        assert classify(tree, values)[0] == label


def test_single_label_gives_single_leaf(weather):
    data = Dataset(weather.schema, tuple((values, "no") for values, _ in weather.rows))
    tree = train(data)
    assert isinstance(tree.root, Leaf)
    assert classify(tree, weather.rows[0][0]) == ("no", 1.0)


def test_weather_tree_fits_training_data(weather):
    tree = train(weather, UNLIMITED)
    assert accuracy(tree, weather.rows) == 1.0
    assert tree.class_counts() == {"no": 5, "yes": 9}


def test_depth_limit(weather):
    tree = train(weather, TreeParams(max_depth=1))
    assert tree.depth() <= 1


def test_missing_value_follows_majority_branch():
    schema = AttributeSchema((Attribute("a", CAT, ("x", "y")),), ("n", "p"))
    rows = ((("x",), "n"), (("x",), "n"), (("x",), "n"), (("y",), "p"))
    tree = train(Dataset(schema, rows), TreeParams(min_leaf=1))
    assert isinstance(tree.root, Node)
    assert tree.root.majority_branch == 0
    assert classify(tree, (None,)) == ("n", 1.0)


@given(st.integers(0, 2 ** 32 - 1), st.lists(st.booleans(), min_size=6, max_size=6), st.booleans())
@settings(max_examples=200, deadline=None)
def test_classify_is_total_with_missing_values(seed, mask, prune):
    rng = random.Random(seed)
    data, _ = _random_dataset(rng)
    tree = train(data, TreeParams(min_leaf=1, prune=prune))
    values, _ = rng.choice(data.rows)
    masked = tuple(None if hide else value for value, hide in zip(values, mask))
    label, confidence = classify(tree, masked)
    assert label in data.schema.label_domain
    assert 0 < confidence <= 1
    assert classify(tree, masked) == (label, confidence)
    assert classify(train(data, TreeParams(min_leaf=1, prune=prune)), masked) == (label, confidence)


def test_classify_rejects_bad_rows(weather):
    tree = train(weather)
    with pytest.raises(UsageError):
        classify(tree, ("sunny", 80.0))
    with pytest.raises(UsageError):
        classify(tree, ("foggy", 80.0, 80.0, "true"))


def test_pruning_never_grows_training_error(weather):
    noisy = Dataset(weather.schema, weather.rows + ((("sunny", 85.0, 85.0, "false"), "yes"),))
    full = train(noisy, TreeParams(min_leaf=1))
    pruned = train(noisy, TreeParams(min_leaf=1, prune=True))
    assert pruned.leaf_count() <= full.leaf_count()
    assert accuracy(pruned, noisy.rows) >= accuracy(full, noisy.rows)


def test_is_sufficiently_trained():
    assert not is_sufficiently_trained(0, 0.0, 50, 0.7)
    assert is_sufficiently_trained(50, 1.0, 50, 0.7)
    assert not is_sufficiently_trained(49, 1.0, 50, 0.7)
    with pytest.raises(DomainError):
        is_sufficiently_trained(50, 1.5, 50, 0.7)


def test_header_with_open_and_closed_categories():
    attrs, labels = parse_header("zone:CAT,battery:NUM|wifi:CAT(OFF;ON),gps:CAT(OFF;ON)")
    assert [c.name for c in attrs] == ["zone", "battery"]
    assert attrs[0].values is None
    assert [c.values for c in labels] == [("OFF", "ON"), ("OFF", "ON")]
    with pytest.raises(ConfigError):
        parse_header("zone:CAT,battery:NUM")


def test_read_dataset_selects_label(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text(
        "# two labels\n"
        "zone:CAT,battery:NUM|wifi:CAT(OFF;ON),gps:CAT(OFF;ON)\n"
        "office,80.0,ON,OFF\n"
        "gym,?,OFF,ON\n"
    )
    data = read_dataset(path, label="gps")
    assert data.schema.attributes[0].values == ("gym", "office")
    assert data.rows[1] == (("gym", None), "ON")
    with pytest.raises(UsageError):
        read_dataset(path, label="brightness")


def test_dataset_and_model_files(tmp_path, weather):
    write_dataset(tmp_path / "weather.csv", weather, label_name="play")
    reread = read_dataset(tmp_path / "weather.csv")
    assert reread.rows == weather.rows

    tree = train(weather)
    save_tree(tree, tmp_path / "model.json")
    assert load_tree(tmp_path / "model.json") == tree
    assert tree_from_dict(tree_to_dict(tree)) == tree


def test_load_tree_rejects_garbage(tmp_path):
    path = tmp_path / "model.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_tree(path)
    path.write_text('{"root": {}}')
    with pytest.raises(ConfigError):
        load_tree(path)
