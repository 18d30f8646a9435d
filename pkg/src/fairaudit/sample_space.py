"""Finite sample spaces for fairness audits.

Audit data lives on a finite grid of cells: every combination of
categorical feature values plus a class label is one point. This module
builds that grid from records, tallies the empirical distribution over
it, and turns a similarity specification into the transport cost matrix
C and the forbidden-move indicator matrix D used by the audit LP.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataError, SchemaError


@dataclass(frozen=True)
class FeatureSpec:
    """One categorical feature: a name and its ordered, finite domain."""

    name: str
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.name:
            raise SchemaError("feature name must be nonempty")
        if len(self.values) == 0:
            raise SchemaError(f"feature {self.name!r} has an empty domain")
        if len(set(self.values)) != len(self.values):
            raise SchemaError(f"feature {self.name!r} has duplicate domain values")


@dataclass(frozen=True)
class Schema:
    """Feature schema shared by all points of a sample space."""

    features: tuple[FeatureSpec, ...]
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "labels", tuple(self.labels))
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names in schema")
        if not self.features:
            raise SchemaError("schema needs at least one feature")
        if len(self.labels) == 0:
            raise SchemaError("schema needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise SchemaError("duplicate labels in schema")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def feature_index(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise SchemaError(f"unknown feature {name!r}")

    def validate_record(self, features, label) -> tuple:
        """Check one record against the schema, returning its feature tuple."""
        features = tuple(features)
        if len(features) != len(self.features):
            raise SchemaError(
                f"record has {len(features)} features, schema expects {len(self.features)}"
            )
        for value, spec in zip(features, self.features):
            if value not in spec.values:
                raise SchemaError(f"value {value!r} not in domain of feature {spec.name!r}")
        if label not in self.labels:
            raise SchemaError(f"label {label!r} not in label set {self.labels!r}")
        return features


@dataclass(frozen=True)
class SamplePoint:
    """One cell of the sample space: a feature tuple and a label."""

    id: int
    features: tuple
    label: object


@dataclass(frozen=True, eq=False)
class FiniteSampleSpace:
    """The K cells the audit operates on, in a fixed canonical order."""

    schema: Schema
    points: tuple[SamplePoint, ...]
    _index: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) < 2:
            raise SchemaError("a sample space needs at least two points")
        for k, p in enumerate(self.points):
            if p.id != k:
                raise SchemaError("point ids must be 0..K-1 in order")
        index = {(p.features, p.label): p.id for p in self.points}
        if len(index) != len(self.points):
            raise SchemaError("(features, label) pairs must be unique")
        object.__setattr__(self, "_index", index)

    @property
    def K(self) -> int:
        return len(self.points)

    def index_of(self, features, label) -> int:
        try:
            return self._index[(tuple(features), label)]
        except KeyError:
            raise SchemaError(f"no point with features={features!r}, label={label!r}") from None

    def labels_array(self) -> np.ndarray:
        return np.array([p.label for p in self.points], dtype=object)


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Cell counts and the probability vector they induce."""

    counts: np.ndarray
    n: int
    f: np.ndarray = None

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or (counts < 0).any():
            raise ValueError("counts must be a 1-d nonnegative integer vector")
        n = int(counts.sum())
        if n < 1:
            raise EmptyDataError("empirical distribution needs at least one observation")
        if self.n != n:
            raise ValueError(f"n={self.n} does not match sum of counts {n}")
        f = counts / n
        counts.flags.writeable = False
        f.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "f", f)

    @property
    def K(self) -> int:
        return self.counts.shape[0]


@dataclass(frozen=True)
class SimilaritySpec:
    """Per-feature transport costs.

    Features in ``zero_cost_features`` (typically protected attributes)
    may differ for free. Features in ``feature_costs`` add their cost to
    the ground distance per mismatch; the transport cost of a pair is
    the squared ground distance. Features in ``forbidden_features`` make
    any mismatching pair an outright forbidden move. Every schema
    feature must appear in exactly one of the three groups, so nothing
    is priced by accident.
    """

    zero_cost_features: frozenset = frozenset()
    feature_costs: dict = field(default_factory=dict)
    forbidden_features: frozenset = frozenset()
    forbid_label_change: bool = True

    def __post_init__(self):
        object.__setattr__(self, "zero_cost_features", frozenset(self.zero_cost_features))
        object.__setattr__(self, "forbidden_features", frozenset(self.forbidden_features))
        object.__setattr__(self, "feature_costs", dict(self.feature_costs))
        if not self.forbid_label_change:
            raise SchemaError("label-changing transport is not supported; forbid_label_change must stay true")
        for name, cost in self.feature_costs.items():
            if not np.isfinite(cost) or cost < 0:
                raise SchemaError(f"cost for feature {name!r} must be finite and nonnegative")

    def validate_for(self, schema: Schema) -> None:
        names = set(schema.feature_names)
        priced = set(self.feature_costs)
        mentioned = self.zero_cost_features | priced | self.forbidden_features
        unknown = mentioned - names
        if unknown:
            raise SchemaError(f"similarity spec names unknown features: {sorted(unknown)}")
        overlaps = (
            (self.zero_cost_features & priced)
            | (self.zero_cost_features & self.forbidden_features)
            | (priced & self.forbidden_features)
        )
        if overlaps:
            raise SchemaError(f"features assigned to more than one cost group: {sorted(overlaps)}")
        uncovered = names - mentioned
        if uncovered:
            raise SchemaError(
                f"features without a cost assignment: {sorted(uncovered)}; "
                "list each feature as zero-cost, priced, or forbidden"
            )


@dataclass(frozen=True, eq=False)
class CostStructure:
    """Transport cost matrix C and forbidden-move indicator matrix D."""

    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        D = np.asarray(self.D, dtype=np.int8)
        if C.shape != D.shape or C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("C and D must be square matrices of equal shape")
        if not np.isfinite(C).all() or (C < 0).any():
            raise ValueError("C must be finite and nonnegative; use D for forbidden moves")
        if not np.allclose(C, C.T):
            raise ValueError("C must be symmetric")
        if np.abs(np.diag(C)).max(initial=0.0) != 0.0:
            raise ValueError("C must have a zero diagonal")
        if not np.array_equal(D, D.T):
            raise ValueError("D must be symmetric")
        if not np.isin(D, (0, 1)).all():
            raise ValueError("D must be binary")
        if np.diag(D).any():
            raise ValueError("D must have a zero diagonal")
        C.flags.writeable = False
        D.flags.writeable = False
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)


def build_space(records, schema: Schema, complete_space: bool = False):
    """Tally records into a sample space and its empirical distribution.

    ``records`` is an iterable of (features, label) pairs. With
    ``complete_space`` the space is the full Cartesian product of
    feature domains and labels, so unobserved cells are present with
    count zero and can receive transported mass. Otherwise only
    observed cells become points. Cell order is canonical (domain
    declaration order), so the result does not depend on record order.
    """
    records = list(records)
    if not records:
        raise EmptyDataError("no audit records supplied")
    tally = Counter()
    for i, (features, label) in enumerate(records):
        try:
            features = schema.validate_record(features, label)
        except SchemaError as exc:
            raise SchemaError(f"record {i}: {exc}") from None
        tally[(features, label)] += 1

    if complete_space:
        domains = [spec.values for spec in schema.features]
        cells = [
            (features, label)
            for features in itertools.product(*domains)
            for label in schema.labels
        ]
    else:
        feature_rank = [
            {v: i for i, v in enumerate(spec.values)} for spec in schema.features
        ]
        label_rank = {lab: i for i, lab in enumerate(schema.labels)}
        cells = sorted(
            tally,
            key=lambda cell: (
                tuple(rank[v] for rank, v in zip(feature_rank, cell[0])),
                label_rank[cell[1]],
            ),
        )

    points = tuple(
        SamplePoint(id=k, features=features, label=label)
        for k, (features, label) in enumerate(cells)
    )
    space = FiniteSampleSpace(schema=schema, points=points)
    counts = np.array([tally.get((p.features, p.label), 0) for p in points], dtype=np.int64)
    dist = EmpiricalDistribution(counts=counts, n=int(counts.sum()))
    return space, dist


def build_costs(space: FiniteSampleSpace, spec: SimilaritySpec) -> CostStructure:
    """Compute C and D for a space under a similarity spec.

    Pairs with different labels are forbidden outright. For same-label
    pairs the ground distance is the sum of per-feature costs over
    mismatched non-protected features, and C holds its square. A
    mismatch on a forbidden feature marks the pair forbidden (D=1) with
    C left at zero; infinities never appear in C.
    """
    spec.validate_for(space.schema)
    K = space.K
    schema = space.schema

    labels = space.labels_array()
    diff_label = labels[:, None] != labels[None, :]

    dist = np.zeros((K, K))
    forbidden = np.zeros((K, K), dtype=bool)
    for idx, feat in enumerate(schema.features):
        col = np.array([p.features[idx] for p in space.points], dtype=object)
        mismatch = col[:, None] != col[None, :]
        if feat.name in spec.forbidden_features:
            forbidden |= mismatch
        elif feat.name in spec.feature_costs:
            dist = dist + spec.feature_costs[feat.name] * mismatch
        # zero-cost features contribute nothing

    D = (diff_label | forbidden).astype(np.int8)
    C = np.where(D == 1, 0.0, dist**2)
    np.fill_diagonal(C, 0.0)
    np.fill_diagonal(D, 0)
    return CostStructure(C=C, D=D)
