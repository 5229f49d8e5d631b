"""
Binary soft margin SVM with a cubic polynomial kernel.

The dual is solved by sequential minimal optimization with second order
working set selection. Features are min-max scaled to [0, 1] using the
training data ranges, and the scaling is part of the model.
"""
import numpy
from repoze import lru
import simplejson

from pincer import constants
from pincer.exceptions import (
    ConfigError,
    DatasetError,
    DimensionMismatchError,
    FoldError,
    ModelFormatError,
    SingleClassError,
)
from pincer.log import LOGGER
from pincer.schema import (
    CreationMixin,
    SvmSchema,
)
from pincer.util import (
    atomic_write,
    decode_array,
    encode_array,
    parallel_map,
)


class SvmConfig(CreationMixin):

    _valid_schema = SvmSchema()
    _fields = ('C', 'gamma', 'coef0', 'tol', 'class_weight',
               'max_iterations')

    def __init__(self, C=constants.SVM_C, gamma=None,
                 coef0=constants.SVM_COEF0, tol=constants.SVM_TOLERANCE,
                 class_weight='none',
                 max_iterations=constants.SVM_MAX_ITERATIONS):
        self.C = float(C)
        self.gamma = None if gamma is None else float(gamma)
        self.coef0 = float(coef0)
        self.tol = float(tol)
        self.class_weight = class_weight
        self.max_iterations = int(max_iterations)
        if not self.C > 0:
            raise ConfigError('C must be positive.')
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError('gamma must be positive.')
        if not self.tol > 0:
            raise ConfigError('tol must be positive.')
        if class_weight not in ('none', 'balanced'):
            raise ConfigError('Unknown class weight %r.' % class_weight)

    def to_dict(self):
        return dict((field, getattr(self, field)) for field in self._fields)


class Scaling(object):
    """Per-dimension min-max scaling, constant dimensions map to 0."""

    def __init__(self, minimum, maximum):
        self.minimum = numpy.asarray(minimum, dtype=numpy.float64)
        self.maximum = numpy.asarray(maximum, dtype=numpy.float64)
        span = self.maximum - self.minimum
        self._factor = numpy.where(span > 0, 1.0 / numpy.where(
            span > 0, span, 1.0), 0.0)

    @classmethod
    def fit(cls, rows):
        return cls(rows.min(axis=0), rows.max(axis=0))

    def __call__(self, rows):
        return (rows - self.minimum) * self._factor


class PolynomialKernel(object):

    degree = constants.SVM_DEGREE

    def __init__(self, gamma, coef0):
        self.gamma = float(gamma)
        self.coef0 = float(coef0)

    def __call__(self, a, b):
        return (self.gamma * a.dot(b.T) + self.coef0) ** self.degree

    def diagonal(self, rows):
        return (self.gamma * (rows * rows).sum(axis=1) +
                self.coef0) ** self.degree

    def to_dict(self):
        return {'degree': self.degree, 'gamma': self.gamma,
                'coef0': self.coef0}


class SvmModel(object):
    """
    Support vectors in scaled feature space, their signed dual
    coefficients, the bias, the kernel and the feature scaling.
    """

    def __init__(self, support_vectors, coefficients, bias, kernel, scaling):
        self.support_vectors = numpy.asarray(support_vectors,
                                             dtype=numpy.float64)
        self.coefficients = numpy.asarray(coefficients, dtype=numpy.float64)
        self.bias = float(bias)
        self.kernel = kernel
        self.scaling = scaling

    def __repr__(self):
        return '{klass}<support:{count}, dim:{dim}, bias:{bias}>'.format(
            klass=self.__class__.__name__, count=len(self.coefficients),
            dim=self.dim, bias=self.bias)

    @property
    def dim(self):
        return self.support_vectors.shape[1]

    def decision_function(self, rows):
        """
        Classifier scores for an (n, dim) array.

        :raises: :exc:`~pincer.exceptions.DimensionMismatchError`
        """
        rows = numpy.asarray(rows, dtype=numpy.float64)
        if rows.ndim == 1:
            rows = rows.reshape(1, -1)
        if rows.shape[1] != self.dim:
            raise DimensionMismatchError(
                'Model expects %s values per row, got %s.' % (
                    self.dim, rows.shape[1]))
        scaled = self.scaling(rows)
        return (self.kernel(scaled, self.support_vectors).dot(
            self.coefficients) + self.bias)

    def predict(self, rows):
        """Labels in {-1, 1}, a zero score counts as positive."""
        return numpy.where(self.decision_function(rows) >= 0.0, 1, -1)

    def to_dict(self):
        count, dim = self.support_vectors.shape
        return {
            'format_version': constants.MODEL_FORMAT_VERSION,
            'kernel': self.kernel.to_dict(),
            'bias': self.bias,
            'dim': dim,
            'support_count': count,
            'support_vectors': encode_array(self.support_vectors, '<f4'),
            'coefficients': encode_array(self.coefficients, '<f8'),
            'scale_min': encode_array(self.scaling.minimum, '<f8'),
            'scale_max': encode_array(self.scaling.maximum, '<f8'),
        }

    @classmethod
    def from_dict(cls, data):
        if data.get('format_version') != constants.MODEL_FORMAT_VERSION:
            raise ModelFormatError(
                'Unsupported model format %r.' % data.get('format_version'))
        try:
            kernel = data['kernel']
            if kernel['degree'] != constants.SVM_DEGREE:
                raise ModelFormatError('Only cubic kernels are supported.')
            dim = int(data['dim'])
            count = int(data['support_count'])
            return cls(
                decode_array(data['support_vectors'], (count, dim), '<f4'),
                decode_array(data['coefficients'], (count, ), '<f8'),
                data['bias'],
                PolynomialKernel(kernel['gamma'], kernel['coef0']),
                Scaling(decode_array(data['scale_min'], (dim, ), '<f8'),
                        decode_array(data['scale_max'], (dim, ), '<f8')))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError('Malformed model: %s' % exc)

    def save(self, filename):
        with atomic_write(filename) as out:
            out.write(simplejson.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, filename):
        """
        :raises: :exc:`~pincer.exceptions.ModelFormatError`
        """
        try:
            with open(filename, 'r') as fd:
                data = simplejson.load(fd)
        except (IOError, OSError) as exc:
            raise ModelFormatError('Cannot read model %s: %s' % (filename,
                                                                  exc))
        except ValueError as exc:
            raise ModelFormatError('Model is not JSON: %s' % exc)
        return cls.from_dict(data)


def predict(model, row):
    """
    :returns: (label, score) of a single descriptor
    """
    score = float(model.decision_function(row)[0])
    return (1 if score >= 0.0 else -1), score


def _check_training_data(rows, labels):
    rows = numpy.asarray(rows, dtype=numpy.float64)
    labels = numpy.asarray(labels, dtype=numpy.int64).reshape(-1)
    if rows.ndim != 2:
        raise DimensionMismatchError('Rows must form a 2d array.')
    if len(rows) != len(labels):
        raise DimensionMismatchError('Expected one label per row.')
    if numpy.any((labels != 1) & (labels != -1)):
        raise DatasetError('Labels must be -1 or 1.')
    if not (numpy.any(labels == 1) and numpy.any(labels == -1)):
        raise SingleClassError('Training needs both classes.')
    return rows, labels


class _KernelRows(object):
    """Cached kernel matrix rows of the training set."""

    def __init__(self, rows, kernel, size=constants.SVM_CACHE_ROWS):
        self.rows = rows
        self.kernel = kernel
        self.diagonal = kernel.diagonal(rows)
        self._cache = lru.LRUCache(size)

    def __getitem__(self, i):
        row = self._cache.get(i)
        if row is None:
            row = self.kernel(self.rows, self.rows[i:i + 1])[:, 0]
            self._cache.put(i, row)
        return row


def _select_working_set(y, alpha, grad, bounds, kernel_rows, tol):
    tau = constants.SVM_TAU
    up = ((y > 0) & (alpha < bounds)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < bounds))
    score = -y * grad

    up_score = numpy.where(up, score, -numpy.inf)
    i = int(numpy.argmax(up_score))
    g_max = up_score[i]
    g_min = numpy.where(low, score, numpy.inf).min()
    if g_max - g_min < tol:
        return None

    k_i = kernel_rows[i]
    gain = g_max - score
    candidates = low & (gain > 0)
    curvature = kernel_rows.diagonal[i] + kernel_rows.diagonal - 2.0 * k_i
    curvature = numpy.where(curvature > 0, curvature, tau)
    objective = numpy.where(candidates, -gain ** 2 / curvature, numpy.inf)
    j = int(numpy.argmin(objective))
    return i, j


def _update_pair(i, j, y, alpha, grad, bounds, kernel_rows):
    tau = constants.SVM_TAU
    k_i = kernel_rows[i]
    k_j = kernel_rows[j]
    c_i, c_j = bounds[i], bounds[j]
    old_i, old_j = alpha[i], alpha[j]
    curvature = kernel_rows.diagonal[i] + kernel_rows.diagonal[j] - 2 * k_i[j]
    if curvature <= 0:
        curvature = tau
    a_i, a_j = old_i, old_j

    if y[i] != y[j]:
        delta = (-grad[i] - grad[j]) / curvature
        diff = a_i - a_j
        a_i += delta
        a_j += delta
        if diff > 0:
            if a_j < 0:
                a_j, a_i = 0.0, diff
        elif a_i < 0:
            a_i, a_j = 0.0, -diff
        if diff > c_i - c_j:
            if a_i > c_i:
                a_i, a_j = c_i, c_i - diff
        elif a_j > c_j:
            a_j, a_i = c_j, c_j + diff
    else:
        delta = (grad[i] - grad[j]) / curvature
        total = a_i + a_j
        a_i -= delta
        a_j += delta
        if total > c_i:
            if a_i > c_i:
                a_i, a_j = c_i, total - c_i
        elif a_j < 0:
            a_j, a_i = 0.0, total
        if total > c_j:
            if a_j > c_j:
                a_j, a_i = c_j, total - c_j
        elif a_i < 0:
            a_i, a_j = 0.0, total

    alpha[i], alpha[j] = a_i, a_j
    grad += y * (y[i] * k_i * (a_i - old_i) + y[j] * k_j * (a_j - old_j))


def _offset(y, alpha, grad, bounds):
    signed = y * grad
    free = (alpha > 0) & (alpha < bounds)
    if free.any():
        return signed[free].mean()
    at_upper = alpha >= bounds
    upper_side = (at_upper & (y < 0)) | (~at_upper & (y > 0))
    upper = signed[upper_side].min() if upper_side.any() else numpy.inf
    lower = signed[~upper_side].max() if (~upper_side).any() else -numpy.inf
    return (upper + lower) / 2.0


def dual_objective(alpha, grad):
    return 0.5 * alpha.dot(grad - 1.0)


def class_bounds(labels, cfg):
    bounds = numpy.full(len(labels), cfg.C)
    if cfg.class_weight == 'balanced':
        total = float(len(labels))
        for label in (-1, 1):
            members = labels == label
            bounds[members] = cfg.C * total / (2.0 * members.sum())
    return bounds


def solve_dual(rows, labels, kernel, cfg, history=None):
    """
    Minimize 1/2 a^T Q a - e^T a subject to y^T a = 0 and
    0 <= a_i <= C_i on already scaled rows.

    :returns: (alpha, rho)
    """
    y = labels.astype(numpy.float64)
    bounds = class_bounds(labels, cfg)
    alpha = numpy.zeros(len(y))
    grad = -numpy.ones(len(y))
    kernel_rows = _KernelRows(rows, kernel)

    iterations = 0
    while iterations < cfg.max_iterations:
        pair = _select_working_set(y, alpha, grad, bounds, kernel_rows,
                                   cfg.tol)
        if pair is None:
            break
        _update_pair(pair[0], pair[1], y, alpha, grad, bounds, kernel_rows)
        iterations += 1
        if history is not None:
            history.append(dual_objective(alpha, grad))
    else:
        LOGGER.warning('SVM stopped after %s iterations', iterations)

    LOGGER.debug('SVM converged after %s iterations', iterations)
    return alpha, _offset(y, alpha, grad, bounds)


def train(rows, labels, cfg=None, history=None):
    """
    Train a classifier on descriptor rows with labels in {-1, 1}.

    :param history: Optional list receiving the dual objective after
                    every pair update.
    :raises: :exc:`~pincer.exceptions.SingleClassError`,
             :exc:`~pincer.exceptions.DimensionMismatchError`
    """
    if cfg is None:
        cfg = SvmConfig()
    rows, labels = _check_training_data(rows, labels)

    scaling = Scaling.fit(rows)
    scaled = scaling(rows)
    gamma = cfg.gamma if cfg.gamma is not None else 1.0 / rows.shape[1]
    kernel = PolynomialKernel(gamma, cfg.coef0)

    alpha, rho = solve_dual(scaled, labels, kernel, cfg, history=history)
    support = numpy.flatnonzero(alpha > 0)
    model = SvmModel(scaled[support], labels[support] * alpha[support], -rho,
                     kernel, scaling)
    LOGGER.info('Trained on %s rows (%s positive), %s support vectors',
                len(labels), int((labels > 0).sum()), len(support))
    return model


def confusion(labels, predicted):
    """[[tn, fp], [fn, tp]] for labels in {-1, 1}."""
    labels = numpy.asarray(labels)
    predicted = numpy.asarray(predicted)
    return [
        [int(((labels < 0) & (predicted < 0)).sum()),
         int(((labels < 0) & (predicted > 0)).sum())],
        [int(((labels > 0) & (predicted < 0)).sum()),
         int(((labels > 0) & (predicted > 0)).sum())],
    ]


def evaluate(model, rows, labels):
    """Accuracy and confusion matrix of a model on labeled rows."""
    labels = numpy.asarray(labels, dtype=numpy.int64).reshape(-1)
    if not len(labels):
        return {'accuracy': 0.0, 'confusion': [[0, 0], [0, 0]], 'rows': 0}
    predicted = model.predict(rows)
    return {
        'accuracy': float((predicted == labels).mean()),
        'confusion': confusion(labels, predicted),
        'rows': int(len(labels)),
    }


def assign_folds(labels, folds, seed=0):
    """Seeded stratified fold number of every row."""
    labels = numpy.asarray(labels)
    if folds < 2:
        raise FoldError('Need at least two folds.')
    rng = numpy.random.RandomState(seed)
    assignment = numpy.zeros(len(labels), dtype=numpy.int64)
    for label in (-1, 1):
        members = numpy.flatnonzero(labels == label)
        if len(members) < folds:
            raise FoldError(
                'Only %s rows labeled %s for %s folds.' % (
                    len(members), label, folds))
        order = rng.permutation(members)
        assignment[order] = numpy.arange(len(order)) % folds
    return assignment


def _fold(rows, labels, assignment, fold, cfg):
    # this is executed in a worker process
    test = assignment == fold
    model = train(rows[~test], labels[~test], cfg)
    return evaluate(model, rows[test], labels[test])


def cross_validate(rows, labels, folds=10, seed=0, cfg=None, jobs=1):
    """
    Stratified k-fold cross validation.

    :returns: dict with the mean accuracy, per-fold accuracies and the
              summed confusion matrix
    :raises: :exc:`~pincer.exceptions.FoldError`
    """
    if cfg is None:
        cfg = SvmConfig()
    rows, labels = _check_training_data(rows, labels)
    assignment = assign_folds(labels, folds, seed)
    results = parallel_map(
        _fold,
        [(rows, labels, assignment, fold, cfg) for fold in range(folds)],
        jobs)

    total = numpy.zeros((2, 2), dtype=numpy.int64)
    for result in results:
        total += numpy.array(result['confusion'])
    accuracies = [result['accuracy'] for result in results]
    return {
        'accuracy': float(numpy.mean(accuracies)),
        'folds': accuracies,
        'confusion': total.tolist(),
    }
