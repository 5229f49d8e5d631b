"""
Default values shared across the detection pipeline. All lengths are
in meters and all angles in radians.
"""
from enum import IntEnum
import math

# Hand geometry. The apertures match a gripper that is 3 cm apart
# when closed and 7 cm apart when open.
FINGER_LENGTH = 0.06
FINGER_WIDTH = 0.01
OPEN_APERTURE = 0.07
CLOSED_APERTURE = 0.03
FINGER_THICKNESS = 0.01

# Slack of the sampler slab and push interval tests and of ray entry
# points. Hand volume membership in hand.classify_points uses exact bounds.
BOUNDARY_TOLERANCE = 1e-9

# Gap left below a forbidden push interval when the hand is backed off.
PUSH_MARGIN = 1e-6

# Hypothesis sampling.
SAMPLE_COUNT = 4000
ORIENTATION_COUNT = 8
POSITION_COUNT = 20
BALL_RADIUS = 0.03

# Preprocessing, voxel size matches typical depth sensor resolution.
VOXEL_SIZE = 0.003
# Workspace box (min corner, max corner) relative to the world frame,
# the minimum height keeps the supporting table out of the cloud.
WORKSPACE = ((-0.3, -0.3, 0.005), (0.3, 0.3, 0.4))

# Surface fitting needs at least as many points as quadric coefficients.
MIN_FIT_POINTS = 10
# Pencil directions below this fraction of trace(B) are discarded.
PENCIL_CUTOFF = 1e-12
# Principal curvatures within this relative gap count as a tie.
UMBILIC_TOLERANCE = 0.01
# Tiny penalty on second order coefficients, selecting the lowest
# order surface among exact fits of degenerate neighborhoods.
QUADRATIC_PENALTY = 1e-10

# Near antipodal labeling.
LABEL_MIN_POINTS = 6
LABEL_ANGLE = math.radians(20.0)

# Grasp image and HOG geometry.
IMAGE_WIDTH = 60
IMAGE_HEIGHT = 72
CELLS_X = 10
CELLS_Y = 12
ORIENTATION_BINS = 9
BLOCK_CLIP = 0.2
BLOCK_EPSILON = 1e-5
DESCRIPTOR_SIZE = (CELLS_X - 1) * (CELLS_Y - 1) * 4 * ORIENTATION_BINS

# Support vector machine.
SVM_C = 1.0
SVM_DEGREE = 3
SVM_COEF0 = 1.0
SVM_TOLERANCE = 1e-3
SVM_MAX_ITERATIONS = 1000000
SVM_TAU = 1e-12
# Kernel rows kept in memory while training.
SVM_CACHE_ROWS = 2000
MODEL_FORMAT_VERSION = 1

# Grasp selection.
CLUSTER_DISTANCE = 0.02
CLUSTER_ANGLE = math.radians(20.0)
CLUSTER_MIN_SIZE = 3
UP = (0.0, 0.0, 1.0)

# Synthetic scenes.
TABLE_HEIGHT = 0.0
FRICTION = 0.3
CAMERA_DISTANCE = 0.8
CAMERA_ELEVATION = math.radians(40.0)
CAMERA_SEPARATION = math.radians(45.0)
CAMERA_RAYS = (320, 240)
CAMERA_FOV = (math.radians(58.0), math.radians(45.0))
CAMERA_RANGE = 3.0
CAMERA_NOISE = 0.0
CLUTTER_FOOTPRINT = 0.4
PLACEMENT_RETRIES = 1000


class Label(IntEnum):
    """Outcome of the near antipodal test."""

    negative = 0
    positive = 1
    indeterminate = 2


class Variant(IntEnum):
    """Decides which hypotheses are passed on to grasp selection."""

    svm = 0  # classify hypotheses with the trained model
    antipodal = 1  # evaluate the near antipodal test directly
    unclassified = 2  # pass every hypothesis on
