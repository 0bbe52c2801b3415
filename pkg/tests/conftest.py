import numpy as np
import pytest

from chordforest import data_path
from chordforest.schema import Dataset, load_schema, parse_responses, parse_schema

TINY_SCHEMA = """
[survey]
outcome = B

[factor X]
display_name = Construct X
color = #ff0000
items = X1 X2
overall = X3

[factor B]
display_name = Outcome B
color = #0000ff
items = B1
overall = B2
"""


@pytest.fixture(scope="session")
def sav_schema():
    return load_schema(data_path("sav.schema"))


@pytest.fixture(scope="session")
def signal_dataset(sav_schema):
    return parse_responses(data_path("sav_synthetic.csv"), sav_schema)


@pytest.fixture(scope="session")
def tiny_schema():
    return parse_schema(TINY_SCHEMA)


def make_dataset(columns, values, ids=None):
    values = np.asarray(values, dtype=np.float64)
    if ids is None:
        ids = [f"r{i}" for i in range(len(values))]
    return Dataset.from_rows(columns, ids, values)
