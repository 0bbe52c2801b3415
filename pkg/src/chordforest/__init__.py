"""chordforest: random-forest importance analysis for Likert survey constructs,
rendered as chord diagrams.

Subpackages follow the processing pipeline: :mod:`~chordforest.schema`
(data model and ingestion), :mod:`~chordforest.forest` (from-scratch
random-forest regression with a compiled split kernel and a numpy
fallback), :mod:`~chordforest.evaluate` (metrics, baselines, CV),
:mod:`~chordforest.importance` (relative-importance tables),
:mod:`~chordforest.stats` (nonparametric group tests, correlation),
:mod:`~chordforest.explain` (partial dependence, tree export),
:mod:`~chordforest.chord` (layout and SVG rendering),
:mod:`~chordforest.synth` (synthetic survey generator) and
:mod:`~chordforest.pipeline` (end-to-end orchestration).
"""

from importlib import resources

__version__ = "0.1.0"


def data_path(name: str):
    """Path to a bundled data file (schema, configs, reference tables)."""
    return resources.files(__package__).joinpath("data", name)
