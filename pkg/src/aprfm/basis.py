"""Partition-of-unity random feature models with analytic first derivatives.

A model covers an enclosing hypercube split into axis-aligned boxes.  Each
box ``i`` carries ``J`` fixed random neurons ``phi_ij(y) = act(w_ij . z + b_ij)``
evaluated in box-normalized coordinates ``z = (y - center_i) / radius_i``,
and a bump weight ``psi_i(y)`` built as a tensor product of a univariate
window.  The normalized weights ``psi_i / sum_k psi_k`` sum to one over the
whole hypercube, so a linear combination of ``psi_i * phi_ij`` glues the
per-box neurons into one global approximant.

Coefficient/column order everywhere is box-major, neuron-minor:
column ``c = i * J + j``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCoverError

ACTIVATIONS = ("tanh", "sine-pi")
POU_KINDS = ("phi_a", "phi_b")


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; ``lo[j] < hi[j]`` for every axis."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", _frozen(np.atleast_1d(self.lo)))
        object.__setattr__(self, "hi", _frozen(np.atleast_1d(self.hi)))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1 or self.lo.size < 1:
            raise ValueError("box bounds must be matching 1-d vectors")
        if not np.all(self.lo < self.hi):
            raise ValueError("box requires lo < hi on every axis")

    @property
    def dim(self):
        return self.lo.size

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def radius(self):
        return 0.5 * (self.hi - self.lo)


@dataclass(frozen=True)
class BoxPartition:
    """Boxes tiling an enclosing hypercube, shared faces, axis-major order."""

    boxes: tuple
    dims: tuple

    def __post_init__(self):
        boxes = tuple(self.boxes)
        dims = tuple(int(m) for m in self.dims)
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "dims", dims)
        if not boxes:
            raise ValueError("partition needs at least one box")
        d = boxes[0].dim
        if any(b.dim != d for b in boxes):
            raise ValueError("boxes must share one dimension")
        if len(dims) != d or int(np.prod(dims)) != len(boxes):
            raise ValueError("per-axis counts do not match the box list")
        object.__setattr__(self, "_centers", _frozen([b.center for b in boxes]))
        object.__setattr__(self, "_radii", _frozen([b.radius for b in boxes]))

    @property
    def n_boxes(self):
        return len(self.boxes)

    @property
    def dim(self):
        return self.boxes[0].dim

    @property
    def centers(self):
        """(M, d) box centers."""
        return self._centers

    @property
    def radii(self):
        """(M, d) box half-widths."""
        return self._radii


def uniform_partition(bounds, counts):
    """Split ``prod_j [lo_j, hi_j]`` into a uniform grid of boxes.

    ``bounds`` is a sequence of (lo, hi) pairs, ``counts`` the per-axis box
    counts.  Boxes are ordered with the first axis slowest, so neighbours
    along the last axis are adjacent in the list.
    """
    bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    counts = [int(m) for m in counts]
    if len(bounds) != len(counts) or any(m < 1 for m in counts):
        raise ValueError("need one positive count per axis")
    edges = [np.linspace(lo, hi, m + 1) for (lo, hi), m in zip(bounds, counts)]
    boxes = []
    for idx in np.ndindex(*counts):
        lo = [edges[a][i] for a, i in enumerate(idx)]
        hi = [edges[a][i + 1] for a, i in enumerate(idx)]
        boxes.append(Box(np.array(lo), np.array(hi)))
    return BoxPartition(tuple(boxes), tuple(counts))


@dataclass(frozen=True)
class FeatureWeights:
    """Fixed inner weights, regenerable bit-identically from the seed.

    Entry (i, j) is drawn from its own counter-based stream keyed by
    (seed, i, j), components in row-major order (w first, then b), so the
    draws do not depend on how assembly is parallelized.
    """

    w: np.ndarray
    b: np.ndarray
    range_b: float
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "w", _frozen(self.w))
        object.__setattr__(self, "b", _frozen(self.b))
        if self.w.ndim != 3 or self.b.ndim != 2 or self.w.shape[:2] != self.b.shape:
            raise ValueError("weights must be (M, J, d) with biases (M, J)")

    @staticmethod
    def generate(seed, n_boxes, n_features, dim, range_b):
        seed = int(seed)
        if not 0 <= seed < 2 ** 63:
            raise ValueError("seed must lie in [0, 2**63)")
        if range_b <= 0:
            raise ValueError("weight range must be positive")
        w = np.empty((n_boxes, n_features, dim))
        b = np.empty((n_boxes, n_features))
        for i in range(n_boxes):
            for j in range(n_features):
                key = (seed << 64) | (i << 32) | j
                gen = np.random.Generator(np.random.Philox(key=key))
                draw = gen.uniform(-range_b, range_b, dim + 1)
                w[i, j] = draw[:dim]
                b[i, j] = draw[dim]
        return FeatureWeights(w=w, b=b, range_b=float(range_b), seed=seed)


@dataclass(frozen=True)
class FeatureModel:
    """Partition + fixed random neurons + activation + window kind."""

    partition: BoxPartition
    weights: FeatureWeights
    activation: str = "tanh"
    pou_kind: str = "phi_b"

    def __post_init__(self):
        m, j, d = self.weights.w.shape
        if m != self.partition.n_boxes or d != self.partition.dim:
            raise ValueError("weight shape does not match the partition")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.pou_kind not in POU_KINDS:
            raise ValueError(f"unknown pou kind {self.pou_kind!r}")

    @property
    def dim(self):
        return self.partition.dim

    @property
    def n_boxes(self):
        return self.partition.n_boxes

    @property
    def n_features(self):
        return self.weights.w.shape[1]

    @property
    def n_columns(self):
        return self.n_boxes * self.n_features


def make_model(partition, n_features, seed, range_b=1.0, activation="tanh",
               pou_kind="phi_b"):
    """Build a model with freshly generated weights for this partition."""
    weights = FeatureWeights.generate(seed, partition.n_boxes, int(n_features),
                                      partition.dim, range_b)
    return FeatureModel(partition=partition, weights=weights,
                        activation=activation, pou_kind=pou_kind)


# -- scalar operations ----------------------------------------------------

def normalize_to_box(y, box):
    """Map ``y`` into box coordinates, box onto [-1, 1]^d."""
    y = np.asarray(y, dtype=float)
    if y.shape != (box.dim,):
        raise ValueError(f"expected a {box.dim}-vector, got shape {y.shape}")
    return (y - box.center) / box.radius


def pou_univariate(kind, z):
    """Univariate window. ``phi_a`` is the indicator of |z| <= 1; ``phi_b``
    is 1 on |z| <= 3/4, decays as (1 - sin(2 pi |z|)) / 2 up to |z| = 5/4,
    and vanishes beyond.  Vectorized over ``z``."""
    value, _ = _axis_pou(kind, np.asarray(z, dtype=float))
    return value if value.ndim else float(value)


def pou_tensor_normalized(partition, kind, y):
    """Normalized bump weights at ``y``; the M entries sum to one."""
    y = np.asarray(y, dtype=float)
    if y.shape != (partition.dim,):
        raise ValueError(f"expected a {partition.dim}-vector, got shape {y.shape}")
    psi_t, _ = pou_normalized_batch(partition, kind, y[None, :])
    return psi_t[0]


def feature_eval(model, i, j, y):
    """Value and gradient of neuron (i, j) at ``y``.

    The gradient applies the chain rule through the box-normalization map,
    so it is taken with respect to the raw coordinates.
    """
    if not (0 <= i < model.n_boxes and 0 <= j < model.n_features):
        raise ValueError("feature index out of range")
    y = np.asarray(y, dtype=float)
    if y.shape != (model.dim,):
        raise ValueError(f"expected a {model.dim}-vector, got shape {y.shape}")
    box = model.partition.boxes[i]
    z = normalize_to_box(y, box)
    t = float(model.weights.w[i, j] @ z + model.weights.b[i, j])
    val, dval = _activation(model.activation, np.asarray(t))
    grad = float(dval) * model.weights.w[i, j] / box.radius
    return float(val), grad


def model_eval(model, coeffs, y):
    """Evaluate ``sum_i psi~_i(y) sum_j c_ij phi_ij(y)``; linear in coeffs."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (model.n_columns,):
        raise ValueError(f"expected {model.n_columns} coefficients")
    y = np.asarray(y, dtype=float)
    return float(model_values(model, coeffs, y[None, :])[0])


# -- vectorized internals (shared with assembly) ---------------------------

def _axis_pou(kind, z):
    """Window value and d/dz, elementwise.  At the piecewise joints of
    ``phi_b`` the derivative is taken from the transition side; the window
    is C1 there, so the two one-sided values agree anyway."""
    az = np.abs(z)
    if kind == "phi_a":
        value = (az <= 1.0).astype(float)
        return value, np.zeros_like(value)
    if kind == "phi_b":
        flat = az <= 0.75
        ramp = ~flat & (az <= 1.25)
        value = np.where(flat, 1.0, 0.0)
        value = np.where(ramp, 0.5 * (1.0 - np.sin(2.0 * np.pi * az)), value)
        deriv = np.where(ramp,
                         -np.pi * np.cos(2.0 * np.pi * az) * np.sign(z), 0.0)
        return value, deriv
    raise ValueError(f"unknown pou kind {kind!r}")


def pou_raw_batch(partition, kind, points):
    """Raw bump values/gradients: psi (n, M) and dpsi (n, M, d)."""
    points = np.asarray(points, dtype=float)
    centers = partition.centers
    radii = partition.radii
    z = (points[:, None, :] - centers[None, :, :]) / radii[None, :, :]
    u, du_dz = _axis_pou(kind, z)
    du = du_dz / radii[None, :, :]
    psi = np.prod(u, axis=2)
    d = partition.dim
    dpsi = np.empty(u.shape)
    for axis in range(d):
        rest = np.prod(np.delete(u, axis, axis=2), axis=2) if d > 1 else 1.0
        dpsi[:, :, axis] = du[:, :, axis] * rest
    return psi, dpsi


def pou_normalized_batch(partition, kind, points):
    """Normalized bump values/gradients via the quotient rule."""
    psi, dpsi = pou_raw_batch(partition, kind, points)
    total = psi.sum(axis=1)
    bad = total <= 0.0
    if np.any(bad):
        where = np.asarray(points)[np.argmax(bad)]
        raise DegenerateCoverError(
            f"no partition box covers point {where}; check partition overlap")
    dtotal = dpsi.sum(axis=1)
    psi_t = psi / total[:, None]
    dpsi_t = (dpsi - psi_t[:, :, None] * dtotal[:, None, :]) / total[:, None, None]
    return psi_t, dpsi_t


def _activation(name, t):
    if name == "tanh":
        value = np.tanh(t)
        return value, 1.0 - value * value
    if name == "sine-pi":
        return np.sin(np.pi * t), np.pi * np.cos(np.pi * t)
    raise ValueError(f"unknown activation {name!r}")


def feature_batch(model, points):
    """Neuron values/gradients: phi (n, M, J) and dphi (n, M, J, d)."""
    points = np.asarray(points, dtype=float)
    centers = model.partition.centers
    radii = model.partition.radii
    z = (points[:, None, :] - centers[None, :, :]) / radii[None, :, :]
    t = np.einsum("nmd,mjd->nmj", z, model.weights.w) + model.weights.b[None]
    phi, dact = _activation(model.activation, t)
    dphi = dact[:, :, :, None] * (model.weights.w / radii[:, None, :])[None]
    return phi, dphi


def column_batch(model, points):
    """Glued columns chi_c = psi~_i phi_ij and their gradients.

    Returns chi (n, M*J) and dchi (n, M*J, d) in box-major column order.
    """
    points = np.asarray(points, dtype=float)
    psi_t, dpsi_t = pou_normalized_batch(model.partition, model.pou_kind, points)
    phi, dphi = feature_batch(model, points)
    n = points.shape[0]
    chi = (psi_t[:, :, None] * phi).reshape(n, model.n_columns)
    dchi = (dpsi_t[:, :, None, :] * phi[:, :, :, None]
            + psi_t[:, :, None, None] * dphi).reshape(n, model.n_columns, model.dim)
    return chi, dchi


def model_values(model, coeffs, points):
    """Batched model evaluation, (n,) values for (n, d) points.

    Evaluation is chunked internally so large grids never materialize the
    full (n, M, J) neuron tensor at once.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (model.n_columns,):
        raise ValueError(f"expected {model.n_columns} coefficients")
    points = np.asarray(points, dtype=float)
    c = coeffs.reshape(model.n_boxes, model.n_features)
    centers = model.partition.centers
    radii = model.partition.radii
    n = points.shape[0]
    out = np.empty(n)
    chunk = max(1, 8_000_000 // max(model.n_columns, 1))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        block = points[lo:hi]
        psi_t, _ = pou_normalized_batch(model.partition, model.pou_kind, block)
        z = (block[:, None, :] - centers[None, :, :]) / radii[None, :, :]
        t = np.einsum("nmd,mjd->nmj", z, model.weights.w) \
            + model.weights.b[None]
        phi, _ = _activation(model.activation, t)
        out[lo:hi] = np.einsum("nm,nmj,mj->n", psi_t, phi, c)
    return out
