"""
Hand hypothesis sampling.

Points are drawn uniformly from the cloud; at every point the Darboux
frame fixes the cutting plane and a grid over hand orientation (about
the minimum curvature axis) and closing-direction offset is searched.
For every grid cell the hand is pushed along its approach direction as
far as it stays collision free, and it is kept if its closing slab then
holds at least one point.
"""
import math

import numpy

from pincer import constants
from pincer.cloud import NeighborIndex
from pincer.exceptions import (
    ConfigError,
    DegenerateNeighborhoodError,
    EmptyCloudError,
    TooFewPointsError,
    VanishingGradientError,
)
from pincer.hand import (
    HandHypothesis,
    HandPose,
    body_collides,
)
from pincer.log import LOGGER
from pincer.schema import (
    CreationMixin,
    SamplerSchema,
)
from pincer.surface import estimate_frame
from pincer.util import (
    chunked,
    parallel_map,
)


class SamplerConfig(CreationMixin):

    _valid_schema = SamplerSchema()
    _fields = ('n_samples', 'n_orientations', 'n_positions',
               'ball_radius', 'seed')

    def __init__(self, n_samples=constants.SAMPLE_COUNT,
                 n_orientations=constants.ORIENTATION_COUNT,
                 n_positions=constants.POSITION_COUNT,
                 ball_radius=constants.BALL_RADIUS, seed=0):
        self.n_samples = int(n_samples)
        self.n_orientations = int(n_orientations)
        self.n_positions = int(n_positions)
        self.ball_radius = float(ball_radius)
        self.seed = int(seed)
        if min(self.n_samples, self.n_orientations, self.n_positions) < 1:
            raise ConfigError('Sampler counts must be at least one.')
        if not self.ball_radius > 0:
            raise ConfigError('ball_radius must be positive.')

    def to_dict(self):
        return dict((field, getattr(self, field)) for field in self._fields)


class HypothesisList(list):
    """Hypotheses in sample order with the counts of every funnel step."""

    def __init__(self, hands=(), funnel=None):
        super(HypothesisList, self).__init__(hands)
        self.funnel = funnel or {}


def orientation_grid(cfg):
    """Rotations about the cutting plane normal, spanning a half turn."""
    count = cfg.n_orientations
    return -math.pi / 2.0 + math.pi * numpy.arange(count) / count


def position_grid(cfg, params):
    if cfg.n_positions == 1:
        return numpy.zeros(1)
    return numpy.linspace(-params.open_aperture, params.open_aperture,
                          cfg.n_positions)


def push_offsets(lower, upper, active, start, stop):
    """
    For every column find the largest offset in [stop, start] outside
    all active closed intervals [lower, upper]; nan where none exists.
    """
    offsets = numpy.full(lower.shape[1], start)
    for _ in range(lower.shape[0] + 1):
        blocked = (active & (lower <= offsets) & (offsets <= upper) &
                   (offsets >= stop))
        hit = blocked.any(axis=0)
        if not hit.any():
            break
        lowest = numpy.where(blocked, lower, numpy.inf).min(axis=0)
        offsets = numpy.where(hit, lowest - constants.PUSH_MARGIN, offsets)
    offsets[offsets < stop] = numpy.nan
    return offsets


def grid_search(frame, nbhd, params, cfg, source_point=-1):
    """
    Search hand placements around the frame origin against the
    neighborhood points nbhd.
    """
    nbhd = numpy.asarray(nbhd, dtype=numpy.float64).reshape(-1, 3)
    if not len(nbhd):
        return []

    tol = constants.BOUNDARY_TOLERANCE
    half_l = params.finger_length / 2.0
    half_d = params.open_aperture / 2.0
    half_t = params.finger_thickness / 2.0
    half_slab = min(params.slab, params.finger_thickness) / 2.0
    width = params.finger_width

    axis = frame.axis
    approach0 = -frame.normal
    closing0 = numpy.cross(axis, approach0)
    offsets = nbhd - frame.origin
    w = offsets.dot(axis)
    body_slab = numpy.abs(w) <= half_t + tol
    plane_slab = numpy.abs(w) <= half_slab - tol

    xs = position_grid(cfg, params)
    hands = []
    for i, phi in enumerate(orientation_grid(cfg)):
        approach = math.cos(phi) * approach0 + math.sin(phi) * closing0
        closing = -math.sin(phi) * approach0 + math.cos(phi) * closing0
        u0 = offsets.dot(approach)[:, None]
        v = offsets.dot(closing)[:, None] - xs[None, :]
        abs_v = numpy.abs(v)

        # Every point in the body slab forbids one interval of approach
        # offsets: the plate sweep, extended by the finger sweep when
        # the point lies in a finger's closing-direction band.
        active = body_slab[:, None] & (abs_v <= half_d + width + tol)
        finger = active & (abs_v >= half_d - tol)
        lower = numpy.where(finger, u0 - half_l, u0 + half_l) - tol
        upper = numpy.broadcast_to(u0 + half_l + width + tol, lower.shape)
        pushed = push_offsets(lower, upper, active,
                              params.open_aperture, -params.open_aperture)

        valid = ~numpy.isnan(pushed)
        if not valid.any():
            continue
        u = u0 - numpy.where(valid, pushed, 0.0)[None, :]
        in_plane = (plane_slab[:, None] & (abs_v < half_d - tol) &
                    (u > -half_l + tol) & (u <= half_l - tol))
        occupied = in_plane.any(axis=0) & valid

        rotation = numpy.column_stack([approach, closing, axis])
        for j in numpy.flatnonzero(occupied):
            position = (frame.origin + xs[j] * closing +
                        pushed[j] * approach)
            hands.append(HandHypothesis(
                HandPose(rotation, position), params,
                source_point=source_point, grid_cell=(i, j),
                pushed_offset=pushed[j]))
    return hands


def _sample_chunk(cloud, params, cfg, samples):
    # this is executed in a worker process
    index = NeighborIndex(cloud)
    search_radius = max(cfg.ball_radius, params.open_aperture)
    results = []
    funnel = {'frames': 0, 'frame_failures': 0, 'dropped': 0}
    for point_index in samples:
        try:
            frame = estimate_frame(cloud, index, point_index,
                                   cfg.ball_radius)
        except (TooFewPointsError, DegenerateNeighborhoodError,
                VanishingGradientError) as exc:
            LOGGER.debug('No frame at point %s: %s', point_index, exc)
            funnel['frame_failures'] += 1
            results.append([])
            continue
        funnel['frames'] += 1
        nbhd = index.radius_neighbors(frame.origin, search_radius)
        found = grid_search(frame, cloud.points[nbhd], params, cfg,
                            source_point=point_index)

        # The search only sees the neighborhood; the body must also
        # miss every other point of the cloud.
        kept = []
        for hand in found:
            near = index.radius_neighbors(hand.position, params.body_radius)
            if body_collides(hand, cloud.points[near]):
                funnel['dropped'] += 1
                continue
            kept.append(hand)
        results.append(kept)
    return results, funnel


def draw_samples(cloud, cfg):
    rng = numpy.random.RandomState(cfg.seed)
    return rng.randint(0, len(cloud), size=cfg.n_samples)


def sample_hands(cloud, params, cfg, jobs=1):
    """
    Sample hand hypotheses satisfying the collision, closing plane and
    cutting plane constraints.

    :raises: :exc:`~pincer.exceptions.EmptyCloudError`
    """
    if not len(cloud):
        raise EmptyCloudError('Cannot sample hands from an empty cloud.')

    samples = draw_samples(cloud, cfg)
    chunks = chunked(len(samples), max(1, jobs) * 4)
    results = parallel_map(
        _sample_chunk,
        [(cloud, params, cfg, samples[chunk]) for chunk in chunks], jobs)

    hands = HypothesisList(funnel={
        'samples': len(samples),
        'frames': 0,
        'frame_failures': 0,
        'dropped': 0,
    })
    for per_sample, funnel in results:
        for found in per_sample:
            hands.extend(found)
        for key, value in funnel.items():
            hands.funnel[key] += value
    hands.funnel['hypotheses'] = len(hands)
    LOGGER.info('Sampled %s hypotheses from %s points (%s frames failed)',
                len(hands), len(samples), hands.funnel['frame_failures'])
    return hands
