import os.path

import numpy
import pytest
from scipy.spatial.transform import Rotation

from pincer.exceptions import ConfigError
from pincer.synth.scene import (
    Box,
    Cylinder,
    Scene,
    Sphere,
    load_scene,
    plane_lines,
    plane_vertices,
    primitive_from_dict,
    rotation_z,
    save_scene,
)
from pincer.tests.factories import (
    BoxFactory,
    CameraFactory,
    CylinderFactory,
    SphereFactory,
)
from pincer.util import selfdestruct_tempdir


def ray(origin, direction):
    return (numpy.array([origin], dtype=numpy.float64),
            numpy.array([direction], dtype=numpy.float64))


class TestPrimitives(object):

    def test_box_intersect(self):
        box = Box((1.0, 1.0, 1.0))
        assert box.intersect(*ray((-1.0, 0.0, 0.0), (1.0, 0.0, 0.0)))[0] == 0.5
        assert numpy.isinf(
            box.intersect(*ray((-1.0, 2.0, 0.0), (1.0, 0.0, 0.0)))[0])
        # rays starting inside have no entry point
        assert numpy.isinf(
            box.intersect(*ray((0.0, 0.0, 0.0), (1.0, 0.0, 0.0)))[0])

    def test_sphere_intersect(self):
        sphere = Sphere(1.0)
        # distances are in units of the direction length
        assert abs(sphere.intersect(
            *ray((-5.0, 0.0, 0.0), (2.0, 0.0, 0.0)))[0] - 2.0) < 1e-12
        assert numpy.isinf(
            sphere.intersect(*ray((0.5, 0.0, 0.0), (1.0, 0.0, 0.0)))[0])

    def test_cylinder_intersect(self):
        cylinder = Cylinder(0.1, 1.0)
        side = cylinder.intersect(*ray((-1.0, 0.0, 0.0), (1.0, 0.0, 0.0)))
        assert abs(side[0] - 0.9) < 1e-12
        cap = cylinder.intersect(*ray((0.0, 0.0, 1.25), (0.0, 0.0, -1.0)))
        assert abs(cap[0] - 0.75) < 1e-12
        beside = cylinder.intersect(*ray((0.2, 0.0, 1.0), (0.0, 0.0, -1.0)))
        assert numpy.isinf(beside[0])
        assert numpy.isinf(
            cylinder.intersect(*ray((0.0, 0.0, 0.0), (0.0, 0.0, 1.0)))[0])

    def test_rigid_invariance(self, rng):
        rotation = Rotation.random(random_state=5).as_matrix()
        translation = numpy.array([0.3, -0.2, 0.1])
        origins = rng.uniform(-0.3, 0.3, (200, 3))
        targets = rng.uniform(-0.02, 0.02, (200, 3))
        directions = targets - origins
        for primitive in (BoxFactory(), CylinderFactory(), SphereFactory()):
            moved = primitive.transformed(rotation, translation)
            first = primitive.intersect(origins, directions)
            second = moved.intersect(origins.dot(rotation.T) + translation,
                                     directions.dot(rotation.T))
            finite = numpy.isfinite(first)
            assert numpy.array_equal(finite, numpy.isfinite(second))
            assert numpy.allclose(first[finite], second[finite], atol=1e-12)

    def test_normals(self):
        box = Box((1.0, 1.0, 1.0))
        assert box.normals([(0.5, 0.1, 0.0)]).tolist() == [[1.0, 0.0, 0.0]]
        cylinder = Cylinder(0.1, 1.0)
        assert numpy.allclose(cylinder.normals([(0.1, 0.0, 0.0)]),
                              [[1.0, 0.0, 0.0]])
        assert numpy.allclose(cylinder.normals([(0.0, 0.02, 0.5)]),
                              [[0.0, 0.0, 1.0]])
        sphere = Sphere(1.0, position=(1.0, 1.0, 1.0))
        assert numpy.allclose(sphere.normals([(1.0, 1.0, 2.0)]),
                              [[0.0, 0.0, 1.0]])

    def test_signed_distance(self):
        box = Box((1.0, 1.0, 1.0))
        assert numpy.allclose(box.signed_distance([(1.0, 0.0, 0.0),
                                                   (0.0, 0.0, 0.0)]),
                              [0.5, -0.5])
        cylinder = Cylinder(0.1, 1.0)
        assert numpy.allclose(cylinder.signed_distance([(0.4, 0.0, 0.0)]),
                              [0.3])

    def test_support(self):
        box = Box((1.0, 1.0, 1.0))
        assert box.support((1.0, 1.0, 1.0)).tolist() == [0.5, 0.5, 0.5]
        cylinder = Cylinder(0.1, 1.0, position=(0.0, 0.0, 0.5))
        assert abs(cylinder.lowest_point()[2]) < 1e-12
        lying = Cylinder(0.1, 1.0, rotation=Rotation.from_euler(
            'x', 90.0, degrees=True).as_matrix(), position=(0.0, 0.0, 0.1))
        assert abs(lying.lowest_point()[2]) < 1e-12

    def test_invalid(self):
        with pytest.raises(ConfigError):
            Box((0.1, -0.1, 0.1))
        with pytest.raises(ConfigError):
            Sphere(0.0)
        with pytest.raises(ConfigError):
            Cylinder(0.1, 0.1, rotation=numpy.diag([1.0, 1.0, -1.0]))

    def test_from_dict(self):
        box = BoxFactory(rotation=rotation_z(0.3), position=(0.1, 0.2, 0.3))
        loaded = primitive_from_dict(box.to_dict())
        assert isinstance(loaded, Box)
        assert numpy.array_equal(loaded.rotation, box.rotation)
        assert numpy.array_equal(loaded.size, box.size)
        with pytest.raises(ConfigError):
            primitive_from_dict({'shape': 'cone', 'rotation': [0.0] * 9})
        with pytest.raises(ConfigError):
            primitive_from_dict({'shape': 'sphere'})


def interior_samples(primitive, count, rng):
    """Uniform samples inside a primitive, in world coordinates."""
    if isinstance(primitive, Box):
        local = rng.uniform(-primitive.half, primitive.half, (count, 3))
    elif isinstance(primitive, Cylinder):
        radius = primitive.radius * numpy.sqrt(rng.uniform(0.0, 1.0, count))
        angle = rng.uniform(0.0, 2.0 * numpy.pi, count)
        local = numpy.column_stack([
            radius * numpy.cos(angle), radius * numpy.sin(angle),
            rng.uniform(-primitive.half_length, primitive.half_length,
                        count)])
    else:
        direction = rng.normal(size=(count, 3))
        direction /= numpy.linalg.norm(direction, axis=1)[:, None]
        radius = primitive.radius * rng.uniform(0.0, 1.0, count) ** (1 / 3.0)
        local = direction * radius[:, None]
    return local.dot(primitive.rotation.T) + primitive.position


class TestExtremePoints(object):

    def test_plane_vertices(self):
        eye = numpy.eye(3)
        vertices = plane_vertices(numpy.vstack([eye, -eye]), numpy.ones(6))
        assert len(vertices) == 8
        assert numpy.allclose(numpy.abs(vertices), 1.0)
        assert len(plane_vertices(eye[:2], numpy.ones(2))) == 0

    def test_plane_lines(self):
        points, lines = plane_lines(numpy.eye(3)[:2], numpy.array([1.0, 2.0]))
        assert numpy.allclose(points, [[1.0, 2.0, 0.0]])
        assert numpy.allclose(numpy.abs(lines), [[0.0, 0.0, 1.0]])
        # parallel planes never meet
        points, _ = plane_lines(numpy.array([[1.0, 0.0, 0.0],
                                             [-1.0, 0.0, 0.0]]),
                                numpy.ones(2))
        assert len(points) == 0

    def test_uncut_box(self):
        box = Box((0.2, 0.4, 0.6))
        points = box.extreme_points((0.0, 0.0, 1.0), numpy.zeros((0, 3)), ())
        lowest = points[:, 2].min()
        assert abs(lowest + 0.3) < 1e-12
        assert numpy.sum(numpy.abs(points[:, 2] - lowest) < 1e-12) == 4

    def test_sphere_slab(self):
        sphere = Sphere(0.05)
        normals = numpy.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0],
                               [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
        offsets = numpy.array([0.04, -0.02, 0.01, 0.01])
        points = sphere.extreme_points((0.0, 1.0, 0.0), normals, offsets)
        best = points[numpy.argmin(points[:, 1])]
        # the slab is 2 cm off the center
        assert numpy.allclose(best, [0.02, -numpy.sqrt(0.0021), 0.0])

    def test_empty_cut(self):
        box = Box((0.1, 0.1, 0.1))
        points = box.extreme_points((0.0, 1.0, 0.0), [[1.0, 0.0, 0.0]],
                                    [-0.2])
        assert points.shape == (0, 3)

    def test_against_samples(self, rng):
        slab = Rotation.random(random_state=4).as_matrix()
        approach, closing, axis = slab.T
        normals = numpy.array([approach, -approach, axis, -axis])
        offsets = numpy.array([0.02, 0.02, 0.005, 0.005])
        primitives = [
            Box((0.03, 0.05, 0.08),
                rotation=Rotation.random(random_state=1).as_matrix()),
            Cylinder(0.03, 0.1,
                     rotation=Rotation.random(random_state=2).as_matrix()),
            Sphere(0.04),
        ]
        for primitive in primitives:
            samples = interior_samples(primitive, 400000, rng)
            inside = numpy.all(samples.dot(normals.T) <= offsets, axis=1)
            values = samples[inside].dot(closing)
            for sign in (1.0, -1.0):
                points = primitive.extreme_points(
                    sign * closing, normals, offsets)
                assert numpy.all(primitive.signed_distance(points) <= 1e-9)
                assert numpy.all(points.dot(normals.T) <= offsets + 1e-9)
                exact = (sign * points.dot(closing)).min()
                sampled = (sign * values).min()
                assert exact <= sampled + 1e-9, primitive
                assert sampled - exact < 0.005, primitive


class TestScene(object):

    def test_cast(self):
        scene = Scene([Box((0.1, 0.1, 0.1), position=(0.0, 0.0, 0.05))], 0.0)
        origins = numpy.array([(0.0, 0.0, 1.0), (0.5, 0.0, 1.0),
                               (0.5, 0.0, 1.0)])
        directions = numpy.array([(0.0, 0.0, -1.0), (0.0, 0.0, -1.0),
                                  (0.0, 0.0, 1.0)])
        distances, owners = scene.cast(origins, directions)
        assert numpy.allclose(distances[:2], [0.9, 1.0])
        assert numpy.isinf(distances[2])
        assert owners.tolist() == [0, -1, -2]

    def test_no_table(self):
        scene = Scene([], table_height=None)
        distances, owners = scene.cast(*ray((0.0, 0.0, 1.0),
                                            (0.0, 0.0, -1.0)))
        assert numpy.isinf(distances[0])
        assert owners.tolist() == [-2]

    def test_below_table_origin(self):
        scene = Scene([], 0.0)
        distances, _ = scene.cast(*ray((0.0, 0.0, -1.0), (0.0, 0.0, 1.0)))
        assert numpy.isinf(distances[0])

    def test_transformed(self, rng):
        scene = Scene([BoxFactory(position=(0.0, 0.0, 0.025)),
                       SphereFactory(position=(0.1, 0.0, 0.025))], 0.0,
                      [CameraFactory()])
        rotation = Rotation.random(random_state=9).as_matrix()
        translation = numpy.array([1.0, 2.0, 3.0])
        moved = scene.transformed(rotation, translation)
        origins = rng.uniform(-0.5, 0.5, (300, 3)) + [0.0, 0.0, 0.6]
        directions = rng.normal(size=(300, 3))
        first, owners = scene.cast(origins, directions)
        second, moved_owners = moved.cast(
            origins.dot(rotation.T) + translation, directions.dot(rotation.T))
        assert numpy.array_equal(owners, moved_owners)
        finite = numpy.isfinite(first)
        assert numpy.allclose(first[finite], second[finite], atol=1e-9)
        assert numpy.allclose(moved.cameras[0].origin,
                              rotation.dot(scene.cameras[0].origin) +
                              translation)

    def test_save_load(self):
        scene = Scene([BoxFactory(), CylinderFactory(), SphereFactory()],
                      0.0, [CameraFactory()])
        with selfdestruct_tempdir() as tmp:
            path = os.path.join(tmp, 'scene.json')
            save_scene(scene, path)
            loaded = load_scene(path)
        assert [p.shape for p in loaded.primitives] == [
            'box', 'cylinder', 'sphere']
        assert loaded.table_height == 0.0
        assert numpy.array_equal(loaded.cameras[0].origin,
                                 scene.cameras[0].origin)

    def test_load_malformed(self):
        with selfdestruct_tempdir() as tmp:
            path = os.path.join(tmp, 'scene.json')
            with open(path, 'w') as fd:
                fd.write('{"primitives": [')
            with pytest.raises(ConfigError):
                load_scene(path)
