import math

import numpy
import pytest
from scipy.spatial.transform import Rotation

from pincer import (
    constants,
    surface,
)
from pincer.cloud import (
    NeighborIndex,
    PointCloud,
)
from pincer.exceptions import (
    CloudError,
    DegenerateNeighborhoodError,
    TooFewPointsError,
)
from pincer.surface import (
    darboux_from_quadric,
    estimate_frame,
    estimate_normals,
    fit_quadric_taubin,
)

RADIUS = 0.05


def fibonacci_sphere(count, radius=RADIUS):
    index = numpy.arange(count) + 0.5
    polar = numpy.arccos(1.0 - 2.0 * index / count)
    azimuth = math.pi * (1.0 + 5.0 ** 0.5) * index
    return radius * numpy.column_stack([
        numpy.cos(azimuth) * numpy.sin(polar),
        numpy.sin(azimuth) * numpy.sin(polar),
        numpy.cos(polar),
    ])


def cylinder_grid(radius=RADIUS, height=0.2, around=120, along=40):
    angles = numpy.linspace(0.0, 2.0 * math.pi, around, endpoint=False)
    heights = numpy.linspace(-height / 2.0, height / 2.0, along)
    grid_a, grid_h = numpy.meshgrid(angles, heights, indexing='ij')
    return numpy.column_stack([
        radius * numpy.cos(grid_a.reshape(-1)),
        radius * numpy.sin(grid_a.reshape(-1)),
        grid_h.reshape(-1),
    ])


def _angle(a, b):
    cosine = numpy.clip(numpy.abs((a * b).sum(axis=1)), 0.0, 1.0)
    return numpy.degrees(numpy.arccos(cosine))


def _frames(cloud, indices, radius=0.02):
    index = NeighborIndex(cloud)
    return [estimate_frame(cloud, index, i, radius) for i in indices]


class TestQuadricFit(object):

    def test_sphere(self):
        points = fibonacci_sphere(200)
        quadric = fit_quadric_taubin(points)
        assert numpy.abs(quadric.value(points)).max() < 1e-5
        coefficients = quadric.coefficients
        # x^2 + y^2 + z^2 - r^2 up to scale
        ratio = coefficients[:3] / coefficients[0]
        assert numpy.allclose(ratio, 1.0, atol=1e-4)
        assert abs(coefficients[9] / coefficients[0] / -RADIUS ** 2 -
                   1.0) < 1e-4

    def test_world_coefficients(self, rng):
        points = fibonacci_sphere(200) + [0.3, -0.1, 0.2]
        quadric = fit_quadric_taubin(points)
        monomials = numpy.column_stack([
            points[:, 0] ** 2, points[:, 1] ** 2, points[:, 2] ** 2,
            points[:, 0] * points[:, 1], points[:, 0] * points[:, 2],
            points[:, 1] * points[:, 2], points, numpy.ones(len(points))])
        values = monomials.dot(quadric.coefficients)
        center = numpy.array([0.09, 0.01, 0.04, -0.03, 0.06, -0.02,
                              0.3, -0.1, 0.2, 1.0]).dot(quadric.coefficients)
        assert numpy.abs(values).max() < 1e-4 * abs(center)

    def test_beats_competitors(self, rng):
        xy = rng.uniform(-0.03, 0.03, (150, 2))
        z = 8.0 * xy[:, 0] ** 2 - 5.0 * xy[:, 1] ** 2
        points = numpy.column_stack([xy, z + rng.normal(0.0, 5e-4, 150)])
        quadric = fit_quadric_taubin(points)
        local = quadric._local(points)
        design = surface._monomials(local)
        jac = surface._jacobians(local)
        a = design.T.dot(design)
        b = jac.T.dot(jac)
        penalty = constants.QUADRATIC_PENALTY * numpy.trace(a) * numpy.diag(
            surface.QUADRATIC)

        def ratio(c, matrix):
            return c.dot(matrix).dot(c) / c.dot(b).dot(c)

        best = ratio(quadric.normalized, a)
        assert abs(best - quadric.eigenvalue) <= 1e-3 * best
        competitors = numpy.vstack([
            rng.normal(size=(50, 10)),
            quadric.normalized + 0.01 * rng.normal(size=(50, 10)),
        ])
        for c in competitors:
            # the minimum of the penalized ratio bounds the plain one
            assert best <= ratio(c, a + penalty) * (1.0 + 1e-9)

    def test_too_few_points(self):
        with pytest.raises(TooFewPointsError):
            fit_quadric_taubin(fibonacci_sphere(5))

    def test_coincident_points(self):
        with pytest.raises(DegenerateNeighborhoodError):
            fit_quadric_taubin(numpy.ones((12, 3)))


class TestDarbouxFrame(object):

    def test_sphere_normals(self):
        points = fibonacci_sphere(2000)
        cloud = PointCloud(points, view_origins={0: (0.0, 0.0, 1.0)})
        indices = numpy.flatnonzero(points[:, 2] > 0.01)[::10]
        frames = _frames(cloud, indices)
        normals = numpy.array([frame.normal for frame in frames])
        expected = points[indices] / RADIUS
        assert numpy.median(_angle(normals, expected)) < 1.0
        # normals face the camera, outwards on the upper half
        assert ((normals * expected).sum(axis=1) > 0).all()
        for frame in frames:
            assert abs(abs(frame.curvatures[1]) - 1.0 / RADIUS) < 1.0
            assert abs(abs(frame.curvatures[0]) - 1.0 / RADIUS) < 1.0

    def test_noisy_sphere(self, rng):
        points = fibonacci_sphere(10000)
        points = points + rng.normal(0.0, 0.002, points.shape) * (
            points / RADIUS)
        cloud = PointCloud(points, view_origins={0: (0.0, 0.0, 1.0)})
        indices = numpy.flatnonzero(points[:, 2] > 0.01)[::50]
        frames = _frames(cloud, indices, radius=0.025)
        normals = numpy.array([frame.normal for frame in frames])
        expected = points[indices] / numpy.linalg.norm(
            points[indices], axis=1)[:, None]
        assert numpy.median(_angle(normals, expected)) < 5.0

    def test_cylinder_axis(self):
        points = cylinder_grid()
        cloud = PointCloud(points, view_origins={0: (1.0, 0.0, 0.0)})
        indices = numpy.arange(0, len(points), 7)
        frames = _frames(cloud, indices)
        axes = numpy.array([frame.axis for frame in frames])
        errors = _angle(axes, numpy.array([[0.0, 0.0, 1.0]]))
        assert (errors < 5.0).mean() >= 0.95
        largest = numpy.array([abs(frame.curvatures[1]) for frame in frames])
        assert (numpy.abs(largest - 1.0 / RADIUS) <
                0.05 / RADIUS).mean() >= 0.95

    def test_frame_is_rotation(self):
        points = cylinder_grid()
        cloud = PointCloud(points, view_origins={0: (1.0, 0.0, 0.0)})
        frame = _frames(cloud, [100])[0]
        rotation = frame.rotation
        assert numpy.allclose(rotation.T.dot(rotation), numpy.eye(3),
                              atol=1e-9)
        assert numpy.linalg.det(rotation) > 0

    def test_plane(self):
        grid = numpy.indices((15, 15)).reshape(2, -1).T * 0.003
        points = numpy.column_stack([grid, numpy.zeros(len(grid))])
        cloud = PointCloud(points, view_origins={0: (0.02, 0.02, 1.0)})
        frame = _frames(cloud, [112])[0]
        assert numpy.allclose(frame.normal, [0.0, 0.0, 1.0], atol=1e-6)
        # no preferred direction, the first world axis in the plane wins
        assert numpy.allclose(frame.axis, [1.0, 0.0, 0.0], atol=1e-6)

    def test_rigid_invariance(self):
        points = cylinder_grid()
        rotation = Rotation.random(random_state=3).as_matrix()
        translation = numpy.array([0.2, 0.1, -0.3])
        origin = numpy.array([1.0, 0.0, 0.0])
        moved = points.dot(rotation.T) + translation
        first = _frames(PointCloud(points, view_origins={0: origin}),
                        [50])[0]
        second = _frames(PointCloud(
            moved, view_origins={0: rotation.dot(origin) + translation}),
            [50])[0]
        assert numpy.allclose(rotation.dot(first.normal), second.normal,
                              atol=1e-5)
        assert abs(abs(rotation.dot(first.axis).dot(second.axis)) -
                   1.0) < 1e-6

    def test_orientation_flip(self):
        points = fibonacci_sphere(500)
        quadric = fit_quadric_taubin(points)
        top = numpy.array([0.0, 0.0, RADIUS])
        outside = darboux_from_quadric(quadric, top, (0.0, 0.0, 1.0))
        inside = darboux_from_quadric(quadric, top, (0.0, 0.0, 0.0))
        assert numpy.allclose(outside.normal, [0.0, 0.0, 1.0], atol=1e-5)
        assert numpy.allclose(inside.normal, [0.0, 0.0, -1.0], atol=1e-5)


class TestEstimateNormals(object):

    def _cloud(self):
        points = numpy.vstack([fibonacci_sphere(1000), [[1.0, 1.0, 1.0]]])
        return PointCloud(points, view_origins={0: (0.0, 0.0, 1.0)})

    def test_normals(self):
        cloud = self._cloud()
        result = estimate_normals(cloud, radius=0.02)
        valid = result.normal_mask()
        # the isolated point cannot be fitted
        assert not valid[-1]
        assert valid[:-1].all()
        facing = ((result.normals[:-1] *
                   ([0.0, 0.0, 1.0] - cloud.points[:-1])).sum(axis=1))
        assert (facing > 0).all()

    def test_parallel(self):
        cloud = self._cloud()
        serial = estimate_normals(cloud, radius=0.02, jobs=1)
        parallel = estimate_normals(cloud, radius=0.02, jobs=2)
        assert numpy.array_equal(serial.normal_mask(),
                                 parallel.normal_mask())
        valid = serial.normal_mask()
        assert numpy.array_equal(serial.normals[valid],
                                 parallel.normals[valid])

    def test_invalid_radius(self):
        with pytest.raises(CloudError):
            estimate_normals(self._cloud(), radius=0.0)
