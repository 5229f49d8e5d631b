"""
Virtual depth cameras casting one ray per pixel into a scene.
"""
import math

import numpy

from pincer import constants
from pincer.cloud import (
    PointCloud,
    view_bit,
)
from pincer.exceptions import ConfigError
from pincer.log import LOGGER


class VirtualCamera(object):
    """A pinhole camera at origin looking at look_at, z up."""

    def __init__(self, origin, look_at,
                 rays_h=constants.CAMERA_RAYS[0],
                 rays_v=constants.CAMERA_RAYS[1],
                 fov_h=constants.CAMERA_FOV[0],
                 fov_v=constants.CAMERA_FOV[1],
                 max_range=constants.CAMERA_RANGE,
                 noise=constants.CAMERA_NOISE,
                 up=(0.0, 0.0, 1.0)):
        self.origin = numpy.array(origin, dtype=numpy.float64).reshape(3)
        self.look_at = numpy.array(look_at, dtype=numpy.float64).reshape(3)
        self.rays_h = int(rays_h)
        self.rays_v = int(rays_v)
        self.fov_h = float(fov_h)
        self.fov_v = float(fov_v)
        self.max_range = float(max_range)
        self.noise = float(noise)
        self.up = numpy.array(up, dtype=numpy.float64).reshape(3)

        if self.rays_h < 1 or self.rays_v < 1:
            raise ConfigError('Cameras need at least one ray per axis.')
        if self.noise < 0:
            raise ConfigError('Camera noise must not be negative.')
        if not (0 < self.fov_h < math.pi and 0 < self.fov_v < math.pi):
            raise ConfigError('Field of view must be within (0, pi).')
        forward = self.look_at - self.origin
        if not numpy.linalg.norm(forward) > 0:
            raise ConfigError('Camera must not look at its own origin.')
        if not numpy.linalg.norm(numpy.cross(forward, self.up)) > 1e-9:
            raise ConfigError('Camera up must not be parallel to the view.')

    def __repr__(self):
        return '{klass}<origin:{origin}, look_at:{look_at}>'.format(
            klass=self.__class__.__name__, origin=self.origin,
            look_at=self.look_at)

    def basis(self):
        forward = self.look_at - self.origin
        forward /= numpy.linalg.norm(forward)
        right = numpy.cross(forward, self.up)
        right /= numpy.linalg.norm(right)
        down = numpy.cross(forward, right)
        return forward, right, down

    def directions(self):
        """Unit ray directions, row by row from the top left pixel."""
        forward, right, down = self.basis()
        xs = (numpy.arange(self.rays_h) + 0.5) / self.rays_h * 2.0 - 1.0
        ys = (numpy.arange(self.rays_v) + 0.5) / self.rays_v * 2.0 - 1.0
        xs = xs * math.tan(self.fov_h / 2.0)
        ys = ys * math.tan(self.fov_v / 2.0)
        grid_y, grid_x = numpy.meshgrid(ys, xs, indexing='ij')
        rays = (forward[None, :] + grid_x.reshape(-1, 1) * right[None, :] +
                grid_y.reshape(-1, 1) * down[None, :])
        return rays / numpy.linalg.norm(rays, axis=1)[:, None]

    def transformed(self, rotation, translation):
        rotation = numpy.asarray(rotation, dtype=numpy.float64)
        return VirtualCamera(
            rotation.dot(self.origin) + translation,
            rotation.dot(self.look_at) + translation,
            self.rays_h, self.rays_v, self.fov_h, self.fov_v,
            self.max_range, self.noise, rotation.dot(self.up))

    def to_dict(self):
        return {
            'origin': [float(v) for v in self.origin],
            'look_at': [float(v) for v in self.look_at],
            'rays_h': self.rays_h,
            'rays_v': self.rays_v,
            'fov_h': self.fov_h,
            'fov_v': self.fov_v,
            'max_range': self.max_range,
            'noise': self.noise,
            'up': [float(v) for v in self.up],
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        return cls(data.pop('origin'), data.pop('look_at'), **data)


def camera_pair(target=(0.0, 0.0, 0.0), distance=constants.CAMERA_DISTANCE,
                elevation=constants.CAMERA_ELEVATION,
                separation=constants.CAMERA_SEPARATION, azimuth=math.pi,
                **kw):
    """
    Two cameras at the same distance and elevation from target, their
    azimuths separation apart.
    """
    target = numpy.asarray(target, dtype=numpy.float64)
    cameras = []
    for offset in (-separation / 2.0, separation / 2.0):
        angle = azimuth + offset
        direction = numpy.array([
            math.cos(elevation) * math.cos(angle),
            math.cos(elevation) * math.sin(angle),
            math.sin(elevation),
        ])
        cameras.append(VirtualCamera(target + distance * direction,
                                     target, **kw))
    return cameras


def render_view(scene, camera, seed=0, view_id=0):
    """
    Cast every camera ray and return the nearest hits as a single view
    cloud, optionally with gaussian range noise along the rays.
    """
    directions = camera.directions()
    origins = numpy.broadcast_to(camera.origin, directions.shape)
    distances, _ = scene.cast(origins, directions)
    hit = distances <= camera.max_range

    distances = distances[hit]
    if camera.noise > 0:
        rng = numpy.random.RandomState(seed)
        distances = distances + rng.normal(0.0, camera.noise, len(distances))
    points = camera.origin + directions[hit] * distances[:, None]
    LOGGER.debug('Rendered %s of %s rays', len(points), len(directions))
    views = numpy.full(len(points), view_bit(view_id), dtype=numpy.uint64)
    return PointCloud(points, views, {view_id: camera.origin})
