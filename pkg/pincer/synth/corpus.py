"""
Seeded corpora of synthetic scenes, each rendered by a pair of cameras.
"""
import math
import os
import os.path

import numpy

from pincer import constants
from pincer.cloud import (
    load_pcd,
    write_pcd,
)
from pincer.exceptions import (
    ConfigError,
    PlacementError,
)
from pincer.log import LOGGER
from pincer.synth.camera import (
    camera_pair,
    render_view,
)
from pincer.synth.scene import (
    Box,
    Cylinder,
    Scene,
    Sphere,
    load_scene,
    rotation_x,
    rotation_z,
    save_scene,
)
from pincer.util import (
    parallel_map,
    stage_seed,
)

PRESETS = ('single', 'clutter')

SCENE_FILE = 'scene.json'
VIEW_FILES = ('view_0.pcd', 'view_1.pcd')


def random_primitive(rng):
    """A graspable primitive standing or lying at the origin."""
    shape = rng.choice(['box', 'cylinder', 'sphere'])
    yaw = rotation_z(rng.uniform(0.0, 2.0 * math.pi))
    if shape == 'box':
        size = (rng.uniform(0.03, 0.06), rng.uniform(0.03, 0.06),
                rng.uniform(0.04, 0.08))
        return Box(size, rotation=yaw)
    if shape == 'cylinder':
        rotation = yaw
        if rng.uniform() < 0.5:
            rotation = yaw.dot(rotation_x(math.pi / 2.0))
        return Cylinder(rng.uniform(0.02, 0.03), rng.uniform(0.05, 0.1),
                        rotation=rotation)
    return Sphere(rng.uniform(0.02, 0.034))


def rest_on_table(primitive, x, y, table_height=constants.TABLE_HEIGHT):
    """Move primitive to (x, y) with its lowest point on the table."""
    placed = primitive.moved(primitive.rotation, (x, y, 0.0))
    lift = table_height - placed.lowest_point()[2]
    return placed.moved(placed.rotation, (x, y, lift))


def place_clutter(rng, count, footprint=constants.CLUTTER_FOOTPRINT,
                  retries=constants.PLACEMENT_RETRIES):
    """
    Rejection sample count primitives whose horizontal bounding circles
    do not overlap, centers inside a square footprint.

    :raises: :exc:`~pincer.exceptions.PlacementError`
    """
    placed = []
    for _ in range(count):
        primitive = random_primitive(rng)
        radius = primitive.bounding_radius
        for _ in range(retries):
            x, y = rng.uniform(-footprint / 2.0, footprint / 2.0, size=2)
            clear = all(
                math.hypot(x - other.position[0], y - other.position[1]) >=
                radius + other.bounding_radius
                for other in placed)
            if clear:
                placed.append(rest_on_table(primitive, x, y))
                break
        else:
            raise PlacementError(
                'Could not place object %s of %s after %s tries.' % (
                    len(placed) + 1, count, retries))
    return placed


def make_scene(preset, seed, objects=10, rays=constants.CAMERA_RAYS,
               noise=constants.CAMERA_NOISE):
    if preset not in PRESETS:
        raise ConfigError('Unknown preset %r.' % preset)
    rng = numpy.random.RandomState(seed)
    if preset == 'single':
        x, y = rng.uniform(-0.02, 0.02, size=2)
        primitives = [rest_on_table(random_primitive(rng), x, y)]
    else:
        primitives = place_clutter(rng, objects)
    target = (0.0, 0.0, constants.TABLE_HEIGHT + 0.05)
    cameras = camera_pair(target, rays_h=rays[0], rays_v=rays[1],
                          noise=noise)
    return Scene(primitives, constants.TABLE_HEIGHT, cameras)


def render_scene(scene, seed):
    """Both camera views, with view ids 0 and 1."""
    return tuple(
        render_view(scene, camera, seed=stage_seed(seed, 'view:%s' % i),
                    view_id=i)
        for i, camera in enumerate(scene.cameras))


def _corpus_entry(preset, seed, objects, rays, noise):
    # this is executed in a worker process
    scene = make_scene(preset, seed, objects, rays, noise)
    return scene, render_scene(scene, seed)


def make_corpus(preset, count, seed=0, objects=10,
                rays=constants.CAMERA_RAYS, noise=constants.CAMERA_NOISE,
                jobs=1):
    """
    :returns: list of (scene, (view_0, view_1)) in scene order
    """
    if count < 0:
        raise ConfigError('Scene count must not be negative.')
    if preset not in PRESETS:
        raise ConfigError('Unknown preset %r.' % preset)
    tasks = [(preset, stage_seed(seed, 'scene:%s' % i), objects, rays, noise)
             for i in range(count)]
    corpus = parallel_map(_corpus_entry, tasks, jobs)
    LOGGER.info('Generated %s %s scenes', len(corpus), preset)
    return corpus


def scene_dirname(index):
    return 'scene_%04d' % index


def write_corpus(corpus, out_dir):
    """Write every scene as a directory of two PCD views and scene JSON."""
    paths = []
    for index, (scene, views) in enumerate(corpus):
        path = os.path.join(out_dir, scene_dirname(index))
        if not os.path.isdir(path):
            os.makedirs(path)
        for view, name in zip(views, VIEW_FILES):
            write_pcd(view, os.path.join(path, name))
        save_scene(scene, os.path.join(path, SCENE_FILE))
        paths.append(path)
    return paths


def load_scene_dir(path):
    """
    :returns: (scene, view_0, view_1)
    """
    scene = load_scene(os.path.join(path, SCENE_FILE))
    views = [load_pcd(os.path.join(path, name)) for name in VIEW_FILES]
    return scene, views[0], views[1]


def scene_dirs(root):
    """Scene directories below root in name order."""
    return [os.path.join(root, name) for name in sorted(os.listdir(root))
            if os.path.isfile(os.path.join(root, name, SCENE_FILE))]
