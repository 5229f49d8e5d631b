"""
Grasp selection: greedy clustering of classified hands and a robot free
ranking of the clusters.
"""
import math

import numpy
from scipy import linalg

from pincer import constants
from pincer.exceptions import ConfigError
from pincer.schema import (
    CreationMixin,
    SelectionSchema,
)


class SelectionConfig(CreationMixin):
    """Clustering thresholds, angle in degrees."""

    _valid_schema = SelectionSchema()
    _fields = ('distance', 'angle', 'min_size', 'reference', 'up')

    def __init__(self, distance=constants.CLUSTER_DISTANCE,
                 angle=math.degrees(constants.CLUSTER_ANGLE),
                 min_size=constants.CLUSTER_MIN_SIZE,
                 reference=(0.0, 0.0, 0.0), up=constants.UP):
        self.distance = float(distance)
        self.angle = float(angle)
        self.min_size = int(min_size)
        self.reference = tuple(float(v) for v in reference)
        self.up = tuple(float(v) for v in up)
        if not self.distance > 0:
            raise ConfigError('Cluster distance must be positive.')
        if not numpy.linalg.norm(self.up) > 0:
            raise ConfigError('The up direction must not be zero.')

    @property
    def theta(self):
        return math.radians(self.angle)

    def to_dict(self):
        return dict((field, getattr(self, field)) for field in self._fields)


class GraspCluster(object):

    _repr_fields = ('size', 'position', 'score')

    def __init__(self, members, position, rotation, score=0.0):
        self.members = tuple(int(m) for m in members)
        self.position = numpy.asarray(position, dtype=numpy.float64)
        self.rotation = numpy.asarray(rotation, dtype=numpy.float64)
        self.score = float(score)

    def __repr__(self):
        return '{klass}<{values}>'.format(
            klass=self.__class__.__name__,
            values=', '.join('%s:%s' % (f, getattr(self, f))
                             for f in self._repr_fields))

    @property
    def size(self):
        return len(self.members)

    @property
    def approach(self):
        return self.rotation[:, 0]


def axis_angle(a, b):
    """Angle between two lines through the origin, in [0, pi/2]."""
    cosine = min(1.0, abs(float(numpy.dot(a, b))))
    return math.acos(cosine)


def _compatible(seed, other, distance, angle):
    if numpy.linalg.norm(other.position - seed.position) > distance:
        return False
    return (axis_angle(seed.pose.approach, other.pose.approach) <= angle and
            axis_angle(seed.pose.closing, other.pose.closing) <= angle)


def _aligned(seed, rotation):
    """Flip axes of rotation onto the seed, keeping it a rotation."""
    rotation = rotation.copy()
    if rotation[:, 0].dot(seed[:, 0]) < 0:
        rotation[:, [0, 2]] *= -1.0
    if rotation[:, 1].dot(seed[:, 1]) < 0:
        rotation[:, [1, 2]] *= -1.0
    return rotation


def average_rotation(rotations):
    """
    The rotation closest in the chordal sense to a set of rotations
    already sign aligned to each other.
    """
    total = numpy.sum(rotations, axis=0)
    unitary, _ = linalg.polar(total)
    if numpy.linalg.det(unitary) < 0:  # pragma: no cover
        unitary[:, 2] *= -1.0
    return unitary


def cluster_hands(hands, scores=None, distance=constants.CLUSTER_DISTANCE,
                  angle=constants.CLUSTER_ANGLE,
                  min_size=constants.CLUSTER_MIN_SIZE):
    """
    Greedy clustering: the best scored unassigned hand seeds a cluster
    and absorbs every unassigned hand close in position and orientation.
    Clusters smaller than min_size are discarded.
    """
    hands = list(hands)
    if not distance > 0 or not angle > 0:
        raise ConfigError('Cluster thresholds must be positive.')
    if scores is None:
        scores = numpy.zeros(len(hands))
    scores = numpy.asarray(scores, dtype=numpy.float64)

    order = numpy.argsort(-scores, kind='mergesort')
    assigned = numpy.zeros(len(hands), dtype=bool)
    clusters = []
    for seed_index in order:
        if assigned[seed_index]:
            continue
        seed = hands[seed_index]
        members = [seed_index]
        assigned[seed_index] = True
        for other in order:
            if assigned[other]:
                continue
            if _compatible(seed, hands[other], distance, angle):
                members.append(other)
                assigned[other] = True
        if len(members) < min_size:
            continue

        members = sorted(members)
        rotations = [_aligned(seed.rotation, hands[m].rotation)
                     for m in members]
        position = numpy.mean([hands[m].position for m in members], axis=0)
        clusters.append(GraspCluster(
            members, position, average_rotation(rotations),
            score=float(scores[members].mean())))
    return clusters


def rank_key(cluster, reference, up):
    down = -numpy.asarray(up, dtype=numpy.float64)
    down /= numpy.linalg.norm(down)
    return (-cluster.size,
            -float(cluster.approach.dot(down)),
            float(numpy.linalg.norm(cluster.position - reference)),
            tuple(float(v) for v in cluster.position))


def rank_grasps(clusters, reference=(0.0, 0.0, 0.0), up=constants.UP):
    """
    Order clusters by size, then by how well they approach from above,
    then by distance to the reference point.
    """
    reference = numpy.asarray(reference, dtype=numpy.float64)
    return sorted(clusters, key=lambda c: rank_key(c, reference, up))


def grasp_to_dict(cluster, rank):
    return {
        'rank': int(rank),
        'size': cluster.size,
        'members': list(cluster.members),
        'score': cluster.score,
        'position': [float(v) for v in cluster.position],
        'rotation': [float(v) for v in cluster.rotation.reshape(-1)],
    }
