import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coupdoob import FiniteChain, random_chain
from coupdoob.chainfile import ChainFileError, dumps, load, loads

GOOD = """{
  "states": ["a", "b"],
  "rows": {
    "a": {"a": "0.5", "b": "0.5"},
    "b": {"a": "0.2", "b": "0.8"}
  }
}
"""


def test_load_explicit():
    chain = loads(GOOD)
    assert chain.states == ("a", "b")
    np.testing.assert_allclose(chain.matrix, [[0.5, 0.5], [0.2, 0.8]])


def test_load_gallery():
    chain = loads('{"gallery": "two-state", "params": ["0.3", "0.1"]}')
    np.testing.assert_allclose(chain.matrix, [[0.7, 0.3], [0.1, 0.9]])


def test_load_from_path(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(GOOD)
    assert load(p).states == ("a", "b")


def test_integer_labels_do_not_match_object_keys():
    text = '{"states": [0, 1], "rows": {"0": {"0": "1"}, "1": {"0": "0.3333333333333", "1": "0.6666666666667"}}}'
    with pytest.raises(ChainFileError, match="missing row"):
        loads(text)


def test_row_sum_checked_exactly():
    text = '{"states": ["x"], "rows": {"x": {"x": "0.9999999"}}}'
    with pytest.raises(ChainFileError, match="sums to"):
        loads(text)


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        (GOOD.replace('"b": "0.8"', '"b": "0.7"'), 5, "sums to 0.9"),
        (GOOD.replace('"a": "0.2"', '"a": "0.2", "c": "0"'), 5, "unknown state"),
        (GOOD.replace('"a": "0.2"', '"a": "-0.2"'), 5, "bad probability"),
        (GOOD.replace('"a": "0.5", "b": "0.5"', '"a": 0.5, "b": "0.5"'), 4, "decimal string"),
        (GOOD.replace('"0.5", "b"', '"abc", "b"'), 4, "bad probability"),
        (GOOD.replace('"b": "0.8"}', '"b": "0.8"'), 8, "delimiter"),
        (GOOD.replace('"states": ["a", "b"]', '"states": ["a", "b", "c"]'), 3, "missing row"),
    ],
)
def test_errors_name_the_line(text, line, fragment):
    with pytest.raises(ChainFileError) as info:
        loads(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}: ")
    assert fragment in str(info.value)


def test_structure_errors():
    with pytest.raises(ChainFileError):
        loads("[1, 2]")
    with pytest.raises(ChainFileError):
        loads('{"states": ["a"]}')
    with pytest.raises(ChainFileError):
        loads('{"states": ["a", "a"], "rows": {}}')
    with pytest.raises(ChainFileError):
        loads('{"gallery": "nope"}')


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 8), seed=st.integers(0, 10**6))
def test_round_trip(n, seed):
    chain = random_chain(n, 0.5, seed)
    text = dumps(chain)
    back = loads(text)
    assert back.states == tuple(str(s) for s in chain.states)
    np.testing.assert_array_equal(back.matrix, chain.matrix)
    assert dumps(back) == text


def test_dumps_is_stable():
    chain = FiniteChain.from_matrix([[0.5, 0.5], [0.2, 0.8]])
    doc = json.loads(dumps(chain))
    assert doc == {"states": ["0", "1"], "rows": {"0": {"0": "0.5", "1": "0.5"},
                                                  "1": {"0": "0.2", "1": "0.8"}}}
