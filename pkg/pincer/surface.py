"""
Local differential geometry of point neighborhoods: Taubin quadric fits
and the Darboux frame (normal, minimum curvature axis, binormal) derived
from them.
"""
import numpy
from scipy import linalg

from pincer import constants
from pincer.cloud import NeighborIndex
from pincer.exceptions import (
    CloudError,
    DegenerateNeighborhoodError,
    TooFewPointsError,
    VanishingGradientError,
)
from pincer.log import LOGGER
from pincer.util import (
    chunked,
    parallel_map,
)

# Monomial order of the quadric coefficient vector.
MONOMIALS = ('xx', 'yy', 'zz', 'xy', 'xz', 'yz', 'x', 'y', 'z', '1')
QUADRATIC = numpy.array([1.0] * 6 + [0.0] * 4)

WORLD_AXES = numpy.eye(3)


def _monomials(points):
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    one = numpy.ones(len(points))
    return numpy.column_stack([x * x, y * y, z * z, x * y, x * z, y * z,
                               x, y, z, one])


def _jacobians(points):
    """Stacked 3x10 Jacobians of the gradient with respect to c."""
    n = len(points)
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    zero = numpy.zeros(n)
    one = numpy.ones(n)
    gx = numpy.column_stack([2 * x, zero, zero, y, z, zero,
                             one, zero, zero, zero])
    gy = numpy.column_stack([zero, 2 * y, zero, x, zero, z,
                             zero, one, zero, zero])
    gz = numpy.column_stack([zero, zero, 2 * z, zero, x, y,
                             zero, zero, one, zero])
    return numpy.vstack([gx, gy, gz])


def _hessian(c):
    return numpy.array([
        [2 * c[0], c[3], c[4]],
        [c[3], 2 * c[1], c[5]],
        [c[4], c[5], 2 * c[2]],
    ])


def _gradient(c, points):
    points = numpy.asarray(points, dtype=numpy.float64).reshape(-1, 3)
    linear = numpy.array(c[6:9])
    return points.dot(_hessian(c)) + linear


class QuadricFit(object):
    """
    An implicit quadric f(x) = c . l(x) fitted in normalized coordinates
    (x - center) / scale.

    ``normalized`` holds the unit coefficient vector in those coordinates,
    :attr:`coefficients` the unit vector for world coordinates.
    """

    def __init__(self, normalized, center, scale, eigenvalue=0.0):
        self.normalized = numpy.asarray(normalized, dtype=numpy.float64)
        self.center = numpy.asarray(center, dtype=numpy.float64)
        self.scale = float(scale)
        self.eigenvalue = float(eigenvalue)

    def _local(self, points):
        points = numpy.asarray(points, dtype=numpy.float64).reshape(-1, 3)
        return (points - self.center) / self.scale

    @property
    def coefficients(self):
        c = self.normalized
        q = _hessian(c) / 2.0 / self.scale ** 2
        b = c[6:9] / self.scale
        m = self.center
        linear = b - 2.0 * q.dot(m)
        const = m.dot(q).dot(m) - b.dot(m) + c[9]
        world = numpy.array([q[0, 0], q[1, 1], q[2, 2],
                             2 * q[0, 1], 2 * q[0, 2], 2 * q[1, 2],
                             linear[0], linear[1], linear[2], const])
        return world / numpy.linalg.norm(world)

    def value(self, points):
        return _monomials(self._local(points)).dot(self.normalized)

    def gradient(self, points):
        return _gradient(self.normalized, self._local(points)) / self.scale

    def hessian(self):
        return _hessian(self.normalized) / self.scale ** 2


def fit_quadric_taubin(points):
    """
    Fit the quadric minimizing sum f(p)^2 subject to
    sum |grad f(p)|^2 = 1 over the neighborhood.

    The objective carries a penalty of ``QUADRATIC_PENALTY * trace(A)``
    times the squared second order coefficients, A being the moment
    matrix of the monomials, which picks the lowest order surface among
    exact fits of degenerate neighborhoods. The returned fit thus
    minimizes the penalized ratio, and its plain ratio exceeds the plain
    minimum by at most the penalty at the plain minimizer.

    :raises: :exc:`~pincer.exceptions.TooFewPointsError`,
             :exc:`~pincer.exceptions.DegenerateNeighborhoodError`
    """
    points = numpy.asarray(points, dtype=numpy.float64).reshape(-1, 3)
    if len(points) < constants.MIN_FIT_POINTS:
        raise TooFewPointsError(
            'Need %s points, got %s.' % (constants.MIN_FIT_POINTS,
                                         len(points)))

    center = points.mean(axis=0)
    scale = numpy.linalg.norm(points - center, axis=1).mean()
    if not scale > 0:
        raise DegenerateNeighborhoodError('All points coincide.')
    local = (points - center) / scale

    design = _monomials(local)
    a = design.T.dot(design)
    a += constants.QUADRATIC_PENALTY * numpy.trace(a) * numpy.diag(QUADRATIC)
    jac = _jacobians(local)
    b = jac.T.dot(jac)

    # Reduce the pencil (A, B) on the range of B with a symmetric inverse
    # square root; directions B cannot see are minimized out exactly.
    s, v = linalg.eigh(b)
    keep = s > constants.PENCIL_CUTOFF * numpy.trace(b)
    if keep.sum() < 3:
        raise DegenerateNeighborhoodError('Gradient pencil is singular.')
    root = v[:, keep] / numpy.sqrt(s[keep])
    null = v[:, ~keep]

    reduced = root.T.dot(a).dot(root)
    elimination = numpy.zeros((null.shape[1], root.shape[1]))
    if null.shape[1]:
        a_nn = null.T.dot(a).dot(null)
        a_nr = null.T.dot(a).dot(root)
        elimination = -linalg.pinv(a_nn).dot(a_nr)
        reduced = reduced + a_nr.T.dot(elimination)
    reduced = (reduced + reduced.T) / 2.0

    values, vectors = linalg.eigh(reduced)
    if not numpy.all(numpy.isfinite(values)):
        raise DegenerateNeighborhoodError('Eigenproblem failed.')
    z = vectors[:, 0]
    c = root.dot(z) + null.dot(elimination.dot(z))
    norm = numpy.linalg.norm(c)
    if not norm > 0:
        raise DegenerateNeighborhoodError('Zero coefficient vector.')
    return QuadricFit(c / norm, center, scale, eigenvalue=values[0])


class DarbouxFrame(object):
    """Surface normal, minimum curvature axis and binormal at a point."""

    _repr_fields = ('origin', 'normal', 'axis', 'curvatures')

    def __init__(self, origin, normal, axis, curvatures):
        self.origin = numpy.asarray(origin, dtype=numpy.float64)
        self.normal = numpy.asarray(normal, dtype=numpy.float64)
        self.axis = numpy.asarray(axis, dtype=numpy.float64)
        self.binormal = numpy.cross(self.axis, self.normal)
        self.curvatures = (float(curvatures[0]), float(curvatures[1]))

    def __repr__(self):
        return '{klass}<{values}>'.format(
            klass=self.__class__.__name__,
            values=', '.join('%s:%s' % (f, getattr(self, f))
                             for f in self._repr_fields))

    @property
    def rotation(self):
        """Columns normal, binormal and axis."""
        return numpy.column_stack([self.normal, self.binormal, self.axis])


def _tangent_basis(normal):
    seed = WORLD_AXES[numpy.argmin(numpy.abs(normal))]
    first = numpy.cross(normal, seed)
    first /= numpy.linalg.norm(first)
    return first, numpy.cross(normal, first)


def _orient(axis):
    for world in WORLD_AXES:
        dot = axis.dot(world)
        if abs(dot) > 1e-9:
            return axis if dot > 0 else -axis
    return axis  # pragma: no cover


def darboux_from_quadric(quadric, point, view_origin):
    """
    Darboux frame of the quadric at point with the normal facing
    view_origin.

    :raises: :exc:`~pincer.exceptions.VanishingGradientError`
    """
    point = numpy.asarray(point, dtype=numpy.float64)
    gradient = quadric.gradient(point)[0]
    length = numpy.linalg.norm(gradient)
    if not length > 1e-12:
        raise VanishingGradientError('Gradient vanishes at %s.' % point)

    normal = gradient / length
    sign = 1.0
    if normal.dot(numpy.asarray(view_origin) - point) < 0:
        sign = -1.0
        normal = -normal

    projector = numpy.eye(3) - numpy.outer(normal, normal)
    shape = -sign * projector.dot(quadric.hessian()).dot(projector) / length
    first, second = _tangent_basis(normal)
    tangent = numpy.column_stack([first, second])
    restricted = tangent.T.dot(shape).dot(tangent)
    restricted = (restricted + restricted.T) / 2.0
    kappa, directions = numpy.linalg.eigh(restricted)

    order = numpy.argsort(numpy.abs(kappa), kind='mergesort')
    kappa = kappa[order]
    largest = abs(kappa[1])
    tie = (largest < 1e-6 or
           largest - abs(kappa[0]) <= constants.UMBILIC_TOLERANCE * largest)
    if tie:
        for world in WORLD_AXES:
            projected = projector.dot(world)
            size = numpy.linalg.norm(projected)
            if size > 1e-6:
                axis = projected / size
                break
    else:
        axis = tangent.dot(directions[:, order[0]])
        axis /= numpy.linalg.norm(axis)
    axis = _orient(axis)
    return DarbouxFrame(point, normal, axis, kappa)


def estimate_frame(cloud, index, point_index, radius):
    """Fit the Darboux frame of one cloud point from its neighborhood."""
    point = cloud.points[point_index]
    nbhd = index.radius_neighbors(point, radius)
    quadric = fit_quadric_taubin(cloud.points[nbhd])
    return darboux_from_quadric(quadric, point, cloud.origin_of(point_index))


def _normals_chunk(cloud, radius, indices):
    # this is executed in a worker process
    index = NeighborIndex(cloud)
    normals = numpy.full((len(indices), 3), numpy.nan)
    failed = 0
    for row, i in enumerate(indices):
        try:
            frame = estimate_frame(cloud, index, i, radius)
        except (TooFewPointsError, DegenerateNeighborhoodError,
                VanishingGradientError):
            failed += 1
            continue
        normals[row] = frame.normal / numpy.linalg.norm(frame.normal)
    return normals, failed


def estimate_normals(cloud, radius=constants.BALL_RADIUS, jobs=1):
    """
    Return the cloud with camera facing normals. Points whose
    neighborhood cannot be fitted get a null (nan) normal.
    """
    if not radius > 0:
        raise CloudError('Normal radius must be positive.')
    chunks = chunked(len(cloud), max(1, jobs) * 4)
    results = parallel_map(
        _normals_chunk, [(cloud, radius, chunk) for chunk in chunks], jobs)
    normals = numpy.full((len(cloud), 3), numpy.nan)
    failed = 0
    for chunk, (values, count) in zip(chunks, results):
        normals[chunk] = values
        failed += count
    LOGGER.info('Estimated normals for %s of %s points',
                len(cloud) - failed, len(cloud))
    return cloud.with_normals(normals)
