"""
Parametric primitives resting on a table plane.

Every primitive answers ray intersections, outward surface normals,
signed distances, support points and the extreme points of its cut by
half-spaces in world coordinates. The renderer casts rays, the
collision tests use support points and the oracle sweeps the fingers
with extreme points.
"""
import itertools
import math

import numpy
import simplejson

from pincer import constants
from pincer.exceptions import ConfigError
from pincer.util import atomic_write

TINY = 1e-300
# Candidates further than this outside a solid or half-space are dropped.
SECTION_TOLERANCE = 1e-9
# Plane triples and pairs this close to degenerate have no vertex or line.
SINGULAR = 1e-12


def rotation_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return numpy.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_x(angle):
    c, s = math.cos(angle), math.sin(angle)
    return numpy.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _safe(values):
    return numpy.where(numpy.abs(values) < TINY,
                       numpy.where(values < 0, -TINY, TINY), values)


def _combinations(count, size):
    return numpy.array(list(itertools.combinations(range(count), size)),
                       dtype=int).reshape(-1, size)


def plane_vertices(normals, offsets):
    """Every point where three of the planes ``n . x = o`` meet."""
    triples = _combinations(len(normals), 3)
    matrices = normals[triples]
    regular = numpy.abs(numpy.linalg.det(matrices)) > SINGULAR
    if not regular.any():
        return numpy.zeros((0, 3))
    rhs = offsets[triples][regular][:, :, None]
    return numpy.linalg.solve(matrices[regular], rhs)[:, :, 0]


def plane_lines(normals, offsets):
    """
    Lines where two of the planes ``n . x = o`` meet, as the point of
    each line closest to the origin and its unit direction.
    """
    pairs = _combinations(len(normals), 2)
    first, second = normals[pairs[:, 0]], normals[pairs[:, 1]]
    directions = numpy.cross(first, second).reshape(-1, 3)
    lengths = numpy.linalg.norm(directions, axis=1)
    regular = lengths > SINGULAR
    if not regular.any():
        return numpy.zeros((0, 3)), numpy.zeros((0, 3))
    pairs = pairs[regular]
    directions = directions[regular] / lengths[regular, None]
    matrices = numpy.stack(
        [first[regular], second[regular], directions], axis=1)
    rhs = numpy.column_stack([offsets[pairs[:, 0]], offsets[pairs[:, 1]],
                              numpy.zeros(len(pairs))])
    points = numpy.linalg.solve(matrices, rhs[:, :, None])[:, :, 0]
    return points, directions


def _perpendicular(vector):
    other = numpy.zeros(3)
    other[numpy.argmin(numpy.abs(vector))] = 1.0
    result = numpy.cross(vector, other)
    return result / numpy.linalg.norm(result)


class Primitive(object):
    """A convex solid with a rigid pose, local to world x = R x_l + t."""

    shape = None

    def __init__(self, rotation=None, position=(0.0, 0.0, 0.0)):
        if rotation is None:
            rotation = numpy.eye(3)
        self.rotation = numpy.array(rotation, dtype=numpy.float64)
        self.position = numpy.array(position, dtype=numpy.float64)
        error = numpy.abs(self.rotation.T.dot(self.rotation) -
                          numpy.eye(3)).max()
        if error > 1e-9 or numpy.linalg.det(self.rotation) < 0:
            raise ConfigError('Primitive pose must be a rotation.')

    def __repr__(self):
        return '{klass}<{dims}, position:{position}>'.format(
            klass=self.__class__.__name__, dims=self.dimensions(),
            position=self.position)

    def dimensions(self):
        raise NotImplementedError()

    def _to_local(self, points):
        points = numpy.asarray(points, dtype=numpy.float64).reshape(-1, 3)
        return (points - self.position).dot(self.rotation)

    def _direction_local(self, directions):
        directions = numpy.asarray(directions, dtype=numpy.float64)
        return directions.reshape(-1, 3).dot(self.rotation)

    def moved(self, rotation, position):
        return self.__class__(rotation=rotation, position=position,
                              **self.dimensions())

    def transformed(self, rotation, translation):
        rotation = numpy.asarray(rotation, dtype=numpy.float64)
        return self.moved(rotation.dot(self.rotation),
                          rotation.dot(self.position) + translation)

    def intersect(self, origins, directions):
        """
        Distance along every ray to the entry point, inf where the ray
        misses or starts inside.
        """
        return self._intersect_local(self._to_local(origins),
                                     self._direction_local(directions))

    def normals(self, points):
        return self._normals_local(self._to_local(points)).dot(
            self.rotation.T)

    def signed_distance(self, points):
        return self._signed_distance_local(self._to_local(points))

    def support(self, direction):
        """The point of the solid furthest along direction."""
        local = self._support_local(self._direction_local(direction)[0])
        return self.rotation.dot(local) + self.position

    def lowest_point(self):
        return self.support((0.0, 0.0, -1.0))

    def extreme_points(self, direction, normals, offsets):
        """
        Points of the solid cut by the half-spaces ``n . x <= o`` among
        which are all minimizers of ``direction . x`` over the cut, in
        world coordinates. Empty when the cut is empty.

        Candidates are the points where the first order optimality
        conditions can hold for some set of active constraints, so the
        smallest value among them is the exact minimum.
        """
        normals = numpy.asarray(normals, dtype=numpy.float64).reshape(-1, 3)
        offsets = numpy.asarray(offsets, dtype=numpy.float64).reshape(-1)
        scale = numpy.linalg.norm(normals, axis=1)
        normals = normals / scale[:, None]
        offsets = offsets / scale
        local_normals = normals.dot(self.rotation)
        local_offsets = offsets - normals.dot(self.position)
        candidates = self._extreme_local(
            self._direction_local(direction)[0], local_normals,
            local_offsets).reshape(-1, 3)
        feasible = (
            (self._signed_distance_local(candidates) <= SECTION_TOLERANCE) &
            numpy.all(candidates.dot(local_normals.T) - local_offsets <=
                      SECTION_TOLERANCE, axis=1))
        return candidates[feasible].dot(self.rotation.T) + self.position

    def to_dict(self):
        data = {
            'shape': self.shape,
            'rotation': [float(v) for v in self.rotation.reshape(-1)],
            'position': [float(v) for v in self.position],
        }
        data.update(self.dimensions())
        return data


class Box(Primitive):

    shape = 'box'

    def __init__(self, size, rotation=None, position=(0.0, 0.0, 0.0)):
        super(Box, self).__init__(rotation, position)
        self.size = numpy.array(size, dtype=numpy.float64).reshape(3)
        if not numpy.all(self.size > 0):
            raise ConfigError('Box sizes must be positive.')
        self.half = self.size / 2.0

    def dimensions(self):
        return {'size': [float(v) for v in self.size]}

    @property
    def bounding_radius(self):
        return float(numpy.linalg.norm(self.half))

    def _intersect_local(self, origins, directions):
        inverse = 1.0 / _safe(directions)
        first = (-self.half - origins) * inverse
        second = (self.half - origins) * inverse
        near = numpy.minimum(first, second).max(axis=1)
        far = numpy.maximum(first, second).min(axis=1)
        hit = (near <= far) & (near >= -constants.BOUNDARY_TOLERANCE)
        return numpy.where(hit, numpy.maximum(near, 0.0), numpy.inf)

    def _normals_local(self, local):
        ratio = numpy.abs(local) / self.half
        face = numpy.argmax(ratio, axis=1)
        normals = numpy.zeros_like(local)
        rows = numpy.arange(len(local))
        normals[rows, face] = numpy.sign(local[rows, face])
        return normals

    def _signed_distance_local(self, local):
        q = numpy.abs(local) - self.half
        outside = numpy.linalg.norm(numpy.maximum(q, 0.0), axis=1)
        return outside + numpy.minimum(q.max(axis=1), 0.0)

    def _support_local(self, direction):
        return numpy.sign(direction) * self.half

    def _extreme_local(self, direction, normals, offsets):
        # a linear objective on a polytope is minimal at a vertex
        eye = numpy.eye(3)
        return plane_vertices(
            numpy.vstack([eye, -eye, normals]),
            numpy.concatenate([self.half, self.half, offsets]))


class Cylinder(Primitive):
    """A capped cylinder around the local z axis."""

    shape = 'cylinder'

    def __init__(self, radius, length, rotation=None,
                 position=(0.0, 0.0, 0.0)):
        super(Cylinder, self).__init__(rotation, position)
        self.radius = float(radius)
        self.length = float(length)
        if not (self.radius > 0 and self.length > 0):
            raise ConfigError('Cylinder dimensions must be positive.')
        self.half_length = self.length / 2.0

    def dimensions(self):
        return {'radius': self.radius, 'length': self.length}

    @property
    def bounding_radius(self):
        return math.hypot(self.radius, self.half_length)

    def _intersect_local(self, origins, directions):
        ox, oy, oz = origins.T
        dx, dy, dz = directions.T
        tol = constants.BOUNDARY_TOLERANCE
        best = numpy.full(len(origins), numpy.inf)

        a = dx * dx + dy * dy
        b = ox * dx + oy * dy
        c = ox * ox + oy * oy - self.radius ** 2
        disc = b * b - a * c
        valid = (a > TINY) & (disc >= 0)
        side = numpy.where(
            valid, (-b - numpy.sqrt(numpy.maximum(disc, 0.0))) /
            numpy.where(valid, a, 1.0), numpy.inf)
        z = oz + side * dz
        side_ok = valid & (side >= -tol) & (numpy.abs(z) <= self.half_length)
        best = numpy.where(side_ok, numpy.maximum(side, 0.0), best)

        safe_dz = _safe(dz)
        for cap in (-self.half_length, self.half_length):
            t = (cap - oz) / safe_dz
            x = ox + t * dx
            y = oy + t * dy
            # only the cap facing the ray origin can be an entry point
            facing = numpy.sign(oz - cap) == numpy.sign(cap)
            ok = (facing & (t >= -tol) &
                  (x * x + y * y <= self.radius ** 2))
            best = numpy.where(ok & (t < best), numpy.maximum(t, 0.0), best)
        return best

    def _normals_local(self, local):
        radial = numpy.hypot(local[:, 0], local[:, 1])
        cap = (numpy.abs(numpy.abs(local[:, 2]) - self.half_length) <
               numpy.abs(radial - self.radius))
        normals = numpy.zeros_like(local)
        scale = numpy.where(radial > 0, radial, 1.0)
        normals[:, 0] = local[:, 0] / scale
        normals[:, 1] = local[:, 1] / scale
        normals[cap] = 0.0
        normals[cap, 2] = numpy.sign(local[cap, 2])
        return normals

    def _signed_distance_local(self, local):
        radial = numpy.hypot(local[:, 0], local[:, 1])
        q = numpy.column_stack([radial - self.radius,
                                numpy.abs(local[:, 2]) - self.half_length])
        outside = numpy.linalg.norm(numpy.maximum(q, 0.0), axis=1)
        return outside + numpy.minimum(q.max(axis=1), 0.0)

    def _support_local(self, direction):
        radial = math.hypot(direction[0], direction[1])
        point = numpy.zeros(3)
        if radial > 0:
            point[:2] = self.radius * direction[:2] / radial
        point[2] = numpy.sign(direction[2]) * self.half_length
        return point

    def _extreme_local(self, direction, normals, offsets):
        rho = self.radius
        normals = numpy.vstack([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], normals])
        offsets = numpy.concatenate(
            [[self.half_length, self.half_length], offsets])
        candidates = [plane_vertices(normals, offsets)]

        # A plane across the axis cuts the mantle in an ellipse, along
        # which the objective is a sinusoid of the polar angle.
        slanted = numpy.abs(normals[:, 2]) > SINGULAR
        cut, limit = normals[slanted], offsets[slanted]
        ratio = direction[2] / cut[:, 2]
        phase = numpy.arctan2(direction[1] - ratio * cut[:, 1],
                              direction[0] - ratio * cut[:, 0])
        for shift in (0.0, math.pi):
            x = rho * numpy.cos(phase + shift)
            y = rho * numpy.sin(phase + shift)
            z = (limit - cut[:, 0] * x - cut[:, 1] * y) / cut[:, 2]
            candidates.append(numpy.column_stack([x, y, z]))

        points, lines = plane_lines(normals, offsets)
        a = lines[:, 0] ** 2 + lines[:, 1] ** 2
        b = points[:, 0] * lines[:, 0] + points[:, 1] * lines[:, 1]
        c = points[:, 0] ** 2 + points[:, 1] ** 2 - rho ** 2
        disc = b * b - a * c
        meets = (a > SINGULAR) & (disc >= 0)
        for sign in (-1.0, 1.0):
            t = (-b[meets] + sign * numpy.sqrt(disc[meets])) / a[meets]
            candidates.append(points[meets] + t[:, None] * lines[meets])
        return numpy.vstack(candidates)


class Sphere(Primitive):

    shape = 'sphere'

    def __init__(self, radius, rotation=None, position=(0.0, 0.0, 0.0)):
        super(Sphere, self).__init__(rotation, position)
        self.radius = float(radius)
        if not self.radius > 0:
            raise ConfigError('Sphere radius must be positive.')

    def dimensions(self):
        return {'radius': self.radius}

    @property
    def bounding_radius(self):
        return self.radius

    def _intersect_local(self, origins, directions):
        length = numpy.linalg.norm(directions, axis=1)
        unit = directions / length[:, None]
        b = (origins * unit).sum(axis=1)
        c = (origins * origins).sum(axis=1) - self.radius ** 2
        disc = b * b - c
        t = -b - numpy.sqrt(numpy.maximum(disc, 0.0))
        hit = (disc >= 0) & (t >= -constants.BOUNDARY_TOLERANCE)
        return numpy.where(hit, numpy.maximum(t, 0.0) / length, numpy.inf)

    def _normals_local(self, local):
        return local / numpy.linalg.norm(local, axis=1)[:, None]

    def _signed_distance_local(self, local):
        return numpy.linalg.norm(local, axis=1) - self.radius

    def _support_local(self, direction):
        length = numpy.linalg.norm(direction)
        if not length > 0:
            return numpy.zeros(3)
        return self.radius * direction / length

    def _extreme_local(self, direction, normals, offsets):
        r = self.radius
        candidates = [plane_vertices(normals, offsets),
                      self._support_local(-direction)[None, :]]

        # circles cut by a single plane
        for normal, offset in zip(normals, offsets):
            if abs(offset) > r:
                continue
            tangent = direction - direction.dot(normal) * normal
            size = numpy.linalg.norm(tangent)
            # every point of the circle is optimal when size is zero
            tangent = (tangent / size if size > SINGULAR
                       else _perpendicular(normal))
            candidates.append(offset * normal -
                              math.sqrt(r * r - offset * offset) * tangent)

        points, lines = plane_lines(normals, offsets)
        b = (points * lines).sum(axis=1)
        disc = b * b - (points * points).sum(axis=1) + r * r
        meets = disc >= 0
        for sign in (-1.0, 1.0):
            t = -b[meets] + sign * numpy.sqrt(disc[meets])
            candidates.append(points[meets] + t[:, None] * lines[meets])
        return numpy.vstack(candidates)


SHAPES = {
    'box': Box,
    'cylinder': Cylinder,
    'sphere': Sphere,
}


def primitive_from_dict(data):
    data = dict(data)
    try:
        klass = SHAPES[data.pop('shape')]
        rotation = numpy.array(data.pop('rotation')).reshape(3, 3)
        return klass(rotation=rotation, **data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError('Invalid primitive: %s' % exc)


class Scene(object):
    """
    Primitives on the table plane ``table_normal . x = table_height``.
    A table_height of None means there is no table.
    """

    def __init__(self, primitives=(), table_height=constants.TABLE_HEIGHT,
                 cameras=(), table_normal=(0.0, 0.0, 1.0)):
        self.primitives = list(primitives)
        self.table_height = (None if table_height is None
                             else float(table_height))
        normal = numpy.array(table_normal, dtype=numpy.float64).reshape(3)
        self.table_normal = normal / numpy.linalg.norm(normal)
        self.cameras = list(cameras)

    def __repr__(self):
        return '{klass}<primitives:{count}, table:{table}>'.format(
            klass=self.__class__.__name__, count=len(self.primitives),
            table=self.table_height)

    def table_offset(self, points):
        """Signed height of points above the table plane."""
        points = numpy.asarray(points, dtype=numpy.float64).reshape(-1, 3)
        return points.dot(self.table_normal) - self.table_height

    def intersect_table(self, origins, directions):
        origins = numpy.asarray(origins, dtype=numpy.float64).reshape(-1, 3)
        directions = numpy.asarray(directions,
                                   dtype=numpy.float64).reshape(-1, 3)
        if self.table_height is None:
            return numpy.full(len(origins), numpy.inf)
        height = self.table_offset(origins)
        rate = directions.dot(self.table_normal)
        t = -height / _safe(rate)
        hit = (height >= 0) & (rate < 0) & (t >= 0)
        return numpy.where(hit, t, numpy.inf)

    def cast(self, origins, directions):
        """
        Nearest hit of every ray.

        :returns: (distances, primitive index), index -1 for the table
                  and -2 for a miss
        """
        best = self.intersect_table(origins, directions)
        owner = numpy.where(numpy.isinf(best), -2, -1)
        for i, primitive in enumerate(self.primitives):
            t = primitive.intersect(origins, directions)
            closer = t < best
            best = numpy.where(closer, t, best)
            owner = numpy.where(closer, i, owner)
        return best, owner

    def transformed(self, rotation, translation):
        """The scene after the rigid motion x -> rotation x + translation."""
        rotation = numpy.asarray(rotation, dtype=numpy.float64)
        translation = numpy.asarray(translation, dtype=numpy.float64)
        normal = rotation.dot(self.table_normal)
        height = self.table_height
        if height is not None:
            height = height + float(normal.dot(translation))
        return Scene([p.transformed(rotation, translation)
                      for p in self.primitives], table_height=height,
                     cameras=[c.transformed(rotation, translation)
                              for c in self.cameras],
                     table_normal=normal)

    def to_dict(self):
        return {
            'primitives': [p.to_dict() for p in self.primitives],
            'table_height': self.table_height,
            'table_normal': [float(v) for v in self.table_normal],
            'cameras': [c.to_dict() for c in self.cameras],
        }

    @classmethod
    def from_dict(cls, data):
        from pincer.synth.camera import VirtualCamera
        try:
            return cls(
                [primitive_from_dict(p) for p in data.get('primitives', ())],
                table_height=data.get('table_height'),
                cameras=[VirtualCamera.from_dict(c)
                         for c in data.get('cameras', ())],
                table_normal=data.get('table_normal', (0.0, 0.0, 1.0)))
        except (AttributeError, TypeError, ValueError) as exc:
            raise ConfigError('Invalid scene: %s' % exc)


def save_scene(scene, filename):
    with atomic_write(filename) as out:
        out.write(simplejson.dumps(scene.to_dict(), sort_keys=True,
                                   indent=2))


def load_scene(filename):
    try:
        with open(filename, 'r') as fd:
            data = simplejson.load(fd)
    except ValueError as exc:
        raise ConfigError('%s: %s' % (filename, exc))
    return Scene.from_dict(data)
