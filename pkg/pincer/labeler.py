"""
Automatic ground truth for hand hypotheses.

A hand is labeled by counting the closing region points whose surface
normal lies within an angle of either finger closing direction. Both
counts reaching k make the hand positive. When the visible surfaces
cannot reach k the hand is negative, anything in between cannot be
decided from the available views and is indeterminate.
"""
import math

import numpy

from pincer import constants
from pincer.cloud import (
    NeighborIndex,
    merge_registered,
)
from pincer.constants import Label
from pincer.exceptions import (
    ConfigError,
    MissingNormalsError,
)
from pincer.hand import (
    closing_region_mask,
    hypothesis_from_dict,
    hypothesis_to_dict,
)
from pincer.log import LOGGER
from pincer.schema import (
    CreationMixin,
    LabelerSchema,
)
from pincer.surface import estimate_normals
from pincer.util import (
    chunked,
    parallel_map,
)

NEGATIVE_RULES = ('max', 'sum')


class LabelerConfig(CreationMixin):
    """Thresholds of the near antipodal test, angle in degrees."""

    _valid_schema = LabelerSchema()
    _fields = ('k', 'angle', 'negative_rule', 'normal_radius', 'balance')

    def __init__(self, k=constants.LABEL_MIN_POINTS,
                 angle=math.degrees(constants.LABEL_ANGLE),
                 negative_rule='max', normal_radius=constants.BALL_RADIUS,
                 balance=False):
        self.k = int(k)
        self.angle = float(angle)
        self.negative_rule = negative_rule
        self.normal_radius = float(normal_radius)
        self.balance = bool(balance)
        if negative_rule not in NEGATIVE_RULES:
            raise ConfigError('Unknown negative rule %r.' % negative_rule)

    @property
    def theta(self):
        return math.radians(self.angle)

    def to_dict(self):
        return dict((field, getattr(self, field)) for field in self._fields)


class LabelOutcome(object):

    _repr_fields = ('label', 'k_pos', 'k_neg')

    def __init__(self, label, k_pos, k_neg):
        self.label = Label(label)
        self.k_pos = int(k_pos)
        self.k_neg = int(k_neg)

    def __eq__(self, other):
        if isinstance(other, LabelOutcome):
            return ((self.label, self.k_pos, self.k_neg) ==
                    (other.label, other.k_pos, other.k_neg))
        return False

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return '{klass}<label:{label}, k_pos:{k_pos}, k_neg:{k_neg}>'.format(
            klass=self.__class__.__name__, label=self.label.name,
            k_pos=self.k_pos, k_neg=self.k_neg)

    @property
    def positive(self):
        return self.label == Label.positive

    @property
    def determinate(self):
        return self.label != Label.indeterminate


def decide(k_pos, k_neg, k, rule='max'):
    if k_pos >= k and k_neg >= k:
        return Label.positive
    if rule == 'sum':
        negative = k_pos + k_neg < k
    else:
        negative = max(k_pos, k_neg) < k
    return Label.negative if negative else Label.indeterminate


def antipodal_score(outcome):
    """Score of the direct test, the smaller of both counts."""
    return min(outcome.k_pos, outcome.k_neg)


def label_hand(hand, cloud, k=constants.LABEL_MIN_POINTS,
               theta=constants.LABEL_ANGLE, rule='max', index=None):
    """
    Label one hand against a cloud with normals.

    :raises: :exc:`~pincer.exceptions.MissingNormalsError`
    """
    if not cloud.has_normals:
        raise MissingNormalsError('Labeling needs a cloud with normals.')
    if index is None:
        index = NeighborIndex(cloud)

    near = index.radius_neighbors(hand.position, hand.params.region_radius)
    near = near[cloud.normal_mask()[near]]
    if len(near):
        near = near[closing_region_mask(hand, cloud.points[near])]
    if not len(near):
        return LabelOutcome(decide(0, 0, k, rule), 0, 0)

    dots = cloud.normals[near].dot(hand.pose.closing)
    limit = math.cos(theta)
    k_pos = int(numpy.count_nonzero(dots >= limit))
    k_neg = int(numpy.count_nonzero(dots <= -limit))
    return LabelOutcome(decide(k_pos, k_neg, k, rule), k_pos, k_neg)


def _label_chunk(hands, cloud, k, theta, rule):
    # this is executed in a worker process
    index = NeighborIndex(cloud)
    return [label_hand(hand, cloud, k, theta, rule, index=index)
            for hand in hands]


def label_hands(hands, cloud, k=constants.LABEL_MIN_POINTS,
                theta=constants.LABEL_ANGLE, rule='max', jobs=1):
    """Outcomes for all hands in input order."""
    if not cloud.has_normals:
        raise MissingNormalsError('Labeling needs a cloud with normals.')
    hands = list(hands)
    chunks = chunked(len(hands), max(1, jobs) * 4)
    results = parallel_map(
        _label_chunk,
        [([hands[i] for i in chunk], cloud, k, theta, rule)
         for chunk in chunks], jobs)
    return [outcome for result in results for outcome in result]


def label_dataset(hands, c1, c2, k=constants.LABEL_MIN_POINTS,
                  theta=constants.LABEL_ANGLE, rule='max', cloud12=None,
                  radius=constants.BALL_RADIUS, jobs=1):
    """
    Label hands on the registered union of both views and drop the
    indeterminate ones.

    :returns: list of (hand, outcome) pairs in input order
    """
    hands = list(hands)
    if not hands:
        return []
    if cloud12 is None:
        cloud12 = merge_registered(c1, c2)
    if not cloud12.has_normals:
        cloud12 = estimate_normals(cloud12, radius=radius, jobs=jobs)

    outcomes = label_hands(hands, cloud12, k, theta, rule, jobs=jobs)
    labeled = [(hand, outcome) for hand, outcome in zip(hands, outcomes)
               if outcome.determinate]
    positives = sum(1 for _, outcome in labeled if outcome.positive)
    LOGGER.info('Labeled %s hands: %s positive, %s negative, %s dropped',
                len(hands), positives, len(labeled) - positives,
                len(hands) - len(labeled))
    return labeled


def balance(labeled, seed=0):
    """
    Down-sample the majority class to the size of the minority class,
    keeping input order.
    """
    positive = [i for i, (_, out) in enumerate(labeled) if out.positive]
    negative = [i for i, (_, out) in enumerate(labeled) if not out.positive]
    if not positive or not negative:
        return list(labeled)
    rng = numpy.random.RandomState(seed)
    size = min(len(positive), len(negative))
    keep = set(positive) if len(positive) == size else set(
        rng.choice(positive, size, replace=False).tolist())
    keep |= set(negative) if len(negative) == size else set(
        rng.choice(negative, size, replace=False).tolist())
    return [entry for i, entry in enumerate(labeled) if i in keep]


def labeled_to_dict(hand, outcome):
    data = hypothesis_to_dict(hand)
    data['label'] = outcome.label.name
    data['k_pos'] = outcome.k_pos
    data['k_neg'] = outcome.k_neg
    return data


def labeled_from_dict(data):
    outcome = LabelOutcome(Label[data['label']], data['k_pos'],
                           data['k_neg'])
    return hypothesis_from_dict(data), outcome
