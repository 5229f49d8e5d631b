"""
Parametric model of the parallel-jaw hand.

A hand pose is a rotation with columns (approach, closing, axis) and the
position of the closing region centroid r(h). In hand coordinates
(u, v, w) = R^T (q - r(h)) the volumes are::

    closing region  -L/2 <  u <= L/2     |v| < D/2          |w| <= T/2
    fingers         -L/2 <  u <= L/2     D/2 <= |v| <= D/2+W |w| <= T/2
    back plate    -L/2-W <= u <= -L/2    |v| <= D/2+W       |w| <= T/2

with L finger length, W finger width, D open aperture and T finger
thickness. The volumes are pairwise disjoint.
"""
import math

import numpy
import simplejson

from pincer import constants
from pincer.exceptions import (
    ConfigError,
    PoseError,
)
from pincer.schema import (
    CreationMixin,
    HandParamsSchema,
)

ORTHONORMAL_TOLERANCE = 1e-9

OUTSIDE = 0
CLOSING_REGION = 1
LEFT_FINGER = 2
RIGHT_FINGER = 3
BACK_PLATE = 4


class HandParams(CreationMixin):
    """Hand geometry, all lengths in meters."""

    _valid_schema = HandParamsSchema()
    _fields = ('finger_length', 'finger_width', 'open_aperture',
               'closed_aperture', 'finger_thickness', 'slab')

    def __init__(self, finger_length=constants.FINGER_LENGTH,
                 finger_width=constants.FINGER_WIDTH,
                 open_aperture=constants.OPEN_APERTURE,
                 closed_aperture=constants.CLOSED_APERTURE,
                 finger_thickness=constants.FINGER_THICKNESS,
                 slab=None):
        self.finger_length = float(finger_length)
        self.finger_width = float(finger_width)
        self.open_aperture = float(open_aperture)
        self.closed_aperture = float(closed_aperture)
        self.finger_thickness = float(finger_thickness)
        self.slab = float(finger_thickness if slab is None else slab)

        for field in self._fields:
            if not getattr(self, field) > 0:
                raise ConfigError('%s must be positive' % field)
        if not self.closed_aperture < self.open_aperture:
            raise ConfigError('closed_aperture must be below open_aperture')

    def __eq__(self, other):
        if isinstance(other, HandParams):
            return self.to_dict() == other.to_dict()
        return False

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash(tuple(getattr(self, field) for field in self._fields))

    def __repr__(self):
        return 'HandParams(%s)' % ', '.join(
            '%s=%r' % (field, getattr(self, field)) for field in self._fields)

    def to_dict(self):
        return dict((field, getattr(self, field)) for field in self._fields)

    @property
    def body_radius(self):
        """Radius of the smallest ball around r(h) holding the body."""
        return math.sqrt(
            (self.finger_length / 2.0 + self.finger_width) ** 2 +
            (self.open_aperture / 2.0 + self.finger_width) ** 2 +
            (self.finger_thickness / 2.0) ** 2)

    @property
    def region_radius(self):
        """Radius of the smallest ball around r(h) holding R(h)."""
        return math.sqrt(
            (self.finger_length / 2.0) ** 2 +
            (self.open_aperture / 2.0) ** 2 +
            (self.finger_thickness / 2.0) ** 2)

    @classmethod
    def from_dict(cls, data):
        return cls.create(_raise_invalid=True, **dict(data))

    @classmethod
    def load(cls, filename):
        """Read hand parameters from a JSON or key=value file."""
        with open(filename, 'r') as fd:
            text = fd.read()
        if text.lstrip().startswith('{'):
            try:
                data = simplejson.loads(text)
            except ValueError as exc:
                raise ConfigError('%s: %s' % (filename, exc))
        else:
            data = {}
            for lineno, line in enumerate(text.splitlines(), 1):
                line = line.split('#', 1)[0].strip()
                if not line:
                    continue
                if '=' not in line:
                    raise ConfigError(
                        '%s line %s: expected key=value' % (filename, lineno))
                key, value = line.split('=', 1)
                data[key.strip()] = value.strip()
        return cls.from_dict(data)


class HandPose(object):
    """A proper rotation (columns approach, closing, axis) and r(h)."""

    def __init__(self, rotation, position):
        rotation = numpy.array(rotation, dtype=numpy.float64).reshape(3, 3)
        position = numpy.array(position, dtype=numpy.float64).reshape(3)
        error = numpy.abs(rotation.T.dot(rotation) - numpy.eye(3)).max()
        if error > ORTHONORMAL_TOLERANCE:
            raise PoseError('Rotation is not orthonormal (%.3g).' % error)
        if numpy.linalg.det(rotation) < 0:
            raise PoseError('Rotation is a reflection.')
        if not numpy.all(numpy.isfinite(position)):
            raise PoseError('Position must be finite.')
        rotation.flags.writeable = False
        position.flags.writeable = False
        self.rotation = rotation
        self.position = position

    @property
    def approach(self):
        return self.rotation[:, 0]

    @property
    def closing(self):
        return self.rotation[:, 1]

    @property
    def axis(self):
        return self.rotation[:, 2]

    def transformed(self, rotation, translation):
        """This pose after the rigid motion x -> rotation x + translation."""
        rotation = numpy.asarray(rotation, dtype=numpy.float64)
        return HandPose(rotation.dot(self.rotation),
                        rotation.dot(self.position) + translation)


class HandHypothesis(object):
    """A hand pose with its parameters and where the sampler found it."""

    _repr_fields = ('source_point', 'grid_cell', 'pushed_offset')

    def __init__(self, pose, params, source_point=-1, grid_cell=(0, 0),
                 pushed_offset=0.0):
        self.pose = pose
        self.params = params
        self.source_point = int(source_point)
        self.grid_cell = (int(grid_cell[0]), int(grid_cell[1]))
        self.pushed_offset = float(pushed_offset)

    def __repr__(self):
        values = [getattr(self, field) for field in self._repr_fields]
        return '{klass}<{values}>'.format(
            klass=self.__class__.__name__,
            values=', '.join(
                ['%s:%s' % (f, v) for f, v in
                 zip(self._repr_fields, values)]))

    @property
    def position(self):
        return self.pose.position

    @property
    def rotation(self):
        return self.pose.rotation

    def local(self, points):
        """Hand frame coordinates (u, v, w) of an (n, 3) point array."""
        points = numpy.asarray(points, dtype=numpy.float64).reshape(-1, 3)
        return (points - self.pose.position).dot(self.pose.rotation)

    def transformed(self, rotation, translation):
        return HandHypothesis(self.pose.transformed(rotation, translation),
                              self.params, self.source_point,
                              self.grid_cell, self.pushed_offset)


def classify_points(hand, points):
    """Label every point with the hand volume containing it."""
    params = hand.params
    half_l = params.finger_length / 2.0
    half_d = params.open_aperture / 2.0
    half_t = params.finger_thickness / 2.0
    width = params.finger_width

    local = hand.local(points)
    u, v, w = local[:, 0], local[:, 1], local[:, 2]
    in_slab = numpy.abs(w) <= half_t
    along_fingers = (u > -half_l) & (u <= half_l)

    codes = numpy.zeros(len(local), dtype=numpy.int8)
    codes[in_slab & along_fingers & (numpy.abs(v) < half_d)] = CLOSING_REGION
    codes[in_slab & along_fingers &
          (v <= -half_d) & (v >= -half_d - width)] = LEFT_FINGER
    codes[in_slab & along_fingers &
          (v >= half_d) & (v <= half_d + width)] = RIGHT_FINGER
    codes[in_slab & (u >= -half_l - width) & (u <= -half_l) &
          (numpy.abs(v) <= half_d + width)] = BACK_PLATE
    return codes


def closing_region_mask(hand, points):
    return classify_points(hand, points) == CLOSING_REGION


def closing_region_contains(hand, point):
    return bool(closing_region_mask(hand, point)[0])


def body_mask(hand, points):
    return classify_points(hand, points) >= LEFT_FINGER


def body_collides(hand, points):
    """True iff any point lies in the fingers or the back plate."""
    points = numpy.asarray(points, dtype=numpy.float64).reshape(-1, 3)
    if not len(points):
        return False
    return bool(numpy.any(body_mask(hand, points)))


def closing_plane_points(hand, points, slab=None):
    """Indices of closing region points within slab/2 of the plane."""
    if slab is None:
        slab = hand.params.slab
    if not slab > 0:
        raise ConfigError('Slab thickness must be positive.')
    points = numpy.asarray(points, dtype=numpy.float64).reshape(-1, 3)
    if not len(points):
        return numpy.zeros(0, dtype=numpy.int64)
    inside = closing_region_mask(hand, points)
    offset = numpy.abs(hand.local(points)[:, 2])
    return numpy.flatnonzero(inside & (offset <= slab / 2.0))


def hypothesis_to_dict(hand):
    return {
        'rotation': [float(v) for v in hand.pose.rotation.reshape(-1)],
        'position': [float(v) for v in hand.pose.position],
        'params': hand.params.to_dict(),
        'source_point': hand.source_point,
        'grid_cell': list(hand.grid_cell),
        'pushed_offset': hand.pushed_offset,
    }


def hypothesis_from_dict(data):
    pose = HandPose(numpy.array(data['rotation']).reshape(3, 3),
                    data['position'])
    return HandHypothesis(pose, HandParams.from_dict(data['params']),
                          data.get('source_point', -1),
                          data.get('grid_cell', (0, 0)),
                          data.get('pushed_offset', 0.0))
