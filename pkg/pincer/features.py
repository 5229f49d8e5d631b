"""
Grasp hypothesis images and their HOG descriptors.

The image is the projection of all cloud points inside the closing
region onto the closing plane. Image rows follow the approach direction
across the finger length, columns follow the closing direction across
the aperture, so the image is ``IMAGE_HEIGHT`` by ``IMAGE_WIDTH`` pixels
whatever the hand geometry.
"""
import numpy
import simplejson

from pincer import constants
from pincer.cloud import NeighborIndex
from pincer.exceptions import (
    DatasetError,
    DimensionMismatchError,
)
from pincer.hand import closing_region_mask
from pincer.log import LOGGER
from pincer.schema import (
    CreationMixin,
    FeatureSchema,
)
from pincer.util import (
    atomic_write,
    chunked,
    parallel_map,
)

IMAGE_SHAPE = (constants.IMAGE_HEIGHT, constants.IMAGE_WIDTH)
CELL_SIZE = (constants.IMAGE_HEIGHT // constants.CELLS_Y,
             constants.IMAGE_WIDTH // constants.CELLS_X)
BIN_WIDTH = 180.0 / constants.ORIENTATION_BINS

VIEW_TAGS = ('1', '2', '12')


class FeatureConfig(CreationMixin):

    _valid_schema = FeatureSchema()
    _fields = ('occupancy', )

    def __init__(self, occupancy=False):
        self.occupancy = bool(occupancy)

    def to_dict(self):
        return {'occupancy': self.occupancy}


def grasp_image(cloud, hand, occupancy=False, index=None):
    """
    Project the closing region points of cloud into a grasp image with
    intensities in [0, 1].
    """
    image = numpy.zeros(IMAGE_SHAPE)
    if not len(cloud):
        return image
    if index is None:
        index = NeighborIndex(cloud)

    near = index.radius_neighbors(hand.position, hand.params.region_radius)
    if not len(near):
        return image
    points = cloud.points[near]
    points = points[closing_region_mask(hand, points)]
    if not len(points):
        return image

    params = hand.params
    local = hand.local(points)
    rows = numpy.floor((local[:, 0] / params.finger_length + 0.5) *
                       IMAGE_SHAPE[0]).astype(numpy.int64)
    cols = numpy.floor((local[:, 1] / params.open_aperture + 0.5) *
                       IMAGE_SHAPE[1]).astype(numpy.int64)
    rows = numpy.clip(rows, 0, IMAGE_SHAPE[0] - 1)
    cols = numpy.clip(cols, 0, IMAGE_SHAPE[1] - 1)
    numpy.add.at(image, (rows, cols), 1.0)

    if occupancy:
        return (image > 0).astype(numpy.float64)
    return image / image.max()


def _gradients(image):
    gx = numpy.zeros_like(image)
    gy = numpy.zeros_like(image)
    gx[:, 1:-1] = image[:, 2:] - image[:, :-2]
    gy[1:-1, :] = image[2:, :] - image[:-2, :]
    return gx, gy


def cell_histograms(image):
    """Magnitude weighted orientation histograms of every cell."""
    gx, gy = _gradients(image)
    magnitude = numpy.hypot(gx, gy)
    angle = numpy.degrees(numpy.arctan2(gy, gx)) % 180.0

    position = angle / BIN_WIDTH
    base = numpy.floor(position)
    upper_weight = position - base
    lower = base.astype(numpy.int64) % constants.ORIENTATION_BINS
    upper = (lower + 1) % constants.ORIENTATION_BINS

    votes = numpy.zeros(IMAGE_SHAPE + (constants.ORIENTATION_BINS, ))
    rows, cols = numpy.indices(IMAGE_SHAPE)
    numpy.add.at(votes, (rows, cols, lower), magnitude * (1.0 - upper_weight))
    numpy.add.at(votes, (rows, cols, upper), magnitude * upper_weight)

    return votes.reshape(
        constants.CELLS_Y, CELL_SIZE[0], constants.CELLS_X, CELL_SIZE[1],
        constants.ORIENTATION_BINS).sum(axis=(1, 3))


def _normalize_block(block):
    eps2 = constants.BLOCK_EPSILON ** 2
    block = block / numpy.sqrt(block.dot(block) + eps2)
    block = numpy.minimum(block, constants.BLOCK_CLIP)
    return block / numpy.sqrt(block.dot(block) + eps2)


def hog(image):
    """
    Encode a grasp image as a descriptor of 2x2 cell blocks, stepping
    one cell at a time, in row-major block order.

    :raises: :exc:`~pincer.exceptions.DimensionMismatchError`
    """
    image = numpy.asarray(image, dtype=numpy.float64)
    if image.shape != IMAGE_SHAPE:
        raise DimensionMismatchError(
            'Expected a %sx%s image, got %s.' % (IMAGE_SHAPE + (image.shape,)))

    cells = cell_histograms(image)
    blocks = []
    for row in range(constants.CELLS_Y - 1):
        for col in range(constants.CELLS_X - 1):
            block = cells[row:row + 2, col:col + 2].reshape(-1)
            blocks.append(_normalize_block(block))
    return numpy.concatenate(blocks)


def descriptors_for_hand(hand, c1, c2, c12, occupancy=False, indexes=None):
    """
    One descriptor per view cloud and the merged cloud, tagged '1', '2'
    and '12'. Views not seeing the region contribute zero images.
    """
    clouds = (c1, c2, c12)
    if indexes is None:
        indexes = [NeighborIndex(cloud) for cloud in clouds]
    return [(hog(grasp_image(cloud, hand, occupancy, index)), tag)
            for cloud, index, tag in zip(clouds, indexes, VIEW_TAGS)]


def _training_chunk(hands, c1, c2, c12, occupancy):
    # this is executed in a worker process
    indexes = [NeighborIndex(cloud) for cloud in (c1, c2, c12)]
    return [descriptors_for_hand(hand, c1, c2, c12, occupancy, indexes)
            for hand in hands]


def training_rows(labeled, c1, c2, c12, occupancy=False, jobs=1):
    """
    Descriptor rows for labeled hands, three per hand sharing its label.

    :returns: (rows, labels, tags)
    """
    labeled = list(labeled)
    hands = [hand for hand, _ in labeled]
    chunks = chunked(len(hands), max(1, jobs) * 4)
    results = parallel_map(
        _training_chunk,
        [([hands[i] for i in chunk], c1, c2, c12, occupancy)
         for chunk in chunks], jobs)
    per_hand = [entry for result in results for entry in result]

    rows, labels, tags = [], [], []
    for (_, outcome), entries in zip(labeled, per_hand):
        for descriptor, tag in entries:
            rows.append(descriptor)
            labels.append(1 if outcome.positive else -1)
            tags.append(tag)
    if not rows:
        return numpy.zeros((0, constants.DESCRIPTOR_SIZE)), [], []
    return numpy.vstack(rows), labels, tags


def _detection_chunk(hands, cloud, occupancy):
    # this is executed in a worker process
    index = NeighborIndex(cloud)
    return [hog(grasp_image(cloud, hand, occupancy, index))
            for hand in hands]


def hand_descriptors(hands, cloud, occupancy=False, jobs=1):
    """One descriptor per hand against a single cloud."""
    hands = list(hands)
    if not hands:
        return numpy.zeros((0, constants.DESCRIPTOR_SIZE))
    chunks = chunked(len(hands), max(1, jobs) * 4)
    results = parallel_map(
        _detection_chunk,
        [([hands[i] for i in chunk], cloud, occupancy) for chunk in chunks],
        jobs)
    return numpy.vstack([row for result in results for row in result])


def sidecar_name(filename):
    return filename + '.json'


def write_dataset(filename, rows, labels, tags=None):
    """
    Write descriptor rows as little-endian float32 and a JSON sidecar
    with the row count, dimension, labels and view tags.
    """
    rows = numpy.asarray(rows, dtype=numpy.float64)
    if rows.ndim != 2:
        rows = rows.reshape(len(labels), -1)
    if len(rows) != len(labels):
        raise DatasetError('Expected one label per row.')
    if tags is None:
        tags = [''] * len(labels)

    with atomic_write(filename, 'wb') as out:
        out.write(numpy.ascontiguousarray(rows, dtype='<f4').tobytes())
    header = {
        'rows': int(rows.shape[0]),
        'dim': int(rows.shape[1]) if rows.size else constants.DESCRIPTOR_SIZE,
        'labels': [int(label) for label in labels],
        'tags': list(tags),
    }
    with atomic_write(sidecar_name(filename)) as out:
        out.write(simplejson.dumps(header, sort_keys=True))
    LOGGER.info('Wrote %s rows to %s', header['rows'], filename)


def load_dataset(filename):
    """
    :returns: (rows, labels, tags)
    :raises: :exc:`~pincer.exceptions.DatasetError`
    """
    try:
        with open(sidecar_name(filename), 'r') as fd:
            header = simplejson.load(fd)
        with open(filename, 'rb') as fd:
            data = fd.read()
    except (IOError, OSError) as exc:
        raise DatasetError('Cannot read dataset %s: %s' % (filename, exc))
    except ValueError as exc:
        raise DatasetError('Malformed dataset header: %s' % exc)

    try:
        count = int(header['rows'])
        dim = int(header['dim'])
        labels = [int(label) for label in header['labels']]
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError('Incomplete dataset header: %s' % exc)
    tags = list(header.get('tags') or [''] * count)

    if len(data) != count * dim * 4:
        raise DatasetError(
            'Expected %s bytes of rows, found %s.' % (count * dim * 4,
                                                       len(data)))
    if len(labels) != count or len(tags) != count:
        raise DatasetError('Labels and tags must match the row count.')
    if any(label not in (-1, 1) for label in labels):
        raise DatasetError('Labels must be -1 or 1.')
    rows = numpy.frombuffer(data, dtype='<f4').astype(numpy.float64)
    return rows.reshape(count, dim), labels, tags


def write_pgm(image, filename):
    """Write a grasp image as a binary 8 bit PGM."""
    image = numpy.clip(numpy.asarray(image, dtype=numpy.float64), 0.0, 1.0)
    pixels = numpy.round(image * 255).astype(numpy.uint8)
    height, width = pixels.shape
    with atomic_write(filename, 'wb') as out:
        out.write(('P5\n%d %d\n255\n' % (width, height)).encode('ascii'))
        out.write(pixels.tobytes())
