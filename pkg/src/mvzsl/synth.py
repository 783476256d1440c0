"""Seeded synthetic data with a controllable projection domain shift.

The generator draws class centers in feature space, stretches each class
toward a partner class (classes are extended shapes a single mean vector
represents poorly), and draws two random linear maps that turn features
into attribute and word-space vectors. Auxiliary instances obey those
maps. Target classes obey perturbed maps: a single random rotation of
feature space, turning every direction by ``shift_magnitude`` radians, is
composed in front of both maps. Class prototypes are the exact semantic
means of their classes under the perturbed maps, so a projection trained
on auxiliary data is displaced from each target prototype in a direction
that depends on that class's own center: the displacement is class
specific, and its size is the experiment's control variable. With
``shift_magnitude = 0`` the perturbed maps equal the originals exactly.

Target instances expose only their feature view. Their semantic views
exist solely as outputs of a learned projection, which is where the
displacement enters; handing out true semantic vectors for unlabeled data
would let a plain nearest-neighbor rule sidestep the shift entirely.

Everything is drawn from one seeded generator in a fixed order, so a given
config always produces byte-identical data.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .annotation import Vocabulary
from .data import Dataset, PrototypeSet, ViewMatrix
from .errors import ConfigError


@dataclass(frozen=True)
class SynthConfig:
    """Knobs of the synthetic world.

    ``n_per_class`` applies to auxiliary and target classes alike unless
    ``aux_per_class`` overrides the auxiliary side; a small auxiliary
    sample makes the learned projections imperfect in a class-coherent
    way, which is the realistic regime for transfer.
    ``noise_sigma`` scales the within-class feature spread;
    ``semantic_noise_sigma`` is the observation noise on the auxiliary
    semantic annotations and defaults to ``noise_sigma`` when not given.
    The two regimes are physically distinct: the first is how spread out
    a class's instances are, the second is how sloppily the auxiliary
    classes were annotated. ``class_elongation``
    stretches each class toward a partner class by that factor, so
    classes are extended manifolds rather than isotropic blobs.
    A nonzero
    ``arc_span`` bends each class into a circular arc of that many radians
    (radius ``noise_sigma * class_elongation``); paired classes share a
    plane and open toward each other, interleaving like two moons, which
    rewards methods that follow the manifold over nearest-mean rules.
    ``center_offset`` sets the size of the common component shared by
    every class center, in units of the per-class spread.
    ``semantic_rank`` restricts each semantic map to a random subspace of
    feature space of that rank, so the semantic descriptions are lossy:
    class directions outside the subspace are invisible to them, and only
    the feature view keeps the full separation. ``None`` leaves the maps
    full rank. ``view_correlation`` interpolates the word-vector map
    between an independent draw (0) and a linear image of the attribute
    map (1); correlated views mimic real class descriptions, where the
    attribute list and the word embedding of a class agree because both
    paraphrase one underlying description. ``n_extra_vocab`` adds
    distractor words to the vocabulary beyond the class names.
    """

    seed: int = 0
    n_aux_classes: int = 10
    n_target_classes: int = 8
    n_per_class: int = 25
    aux_per_class: int | None = None
    feature_dim: int = 12
    attribute_dim: int = 8
    wordvec_dim: int = 6
    shift_magnitude: float = 0.3
    noise_sigma: float = 0.25
    semantic_noise_sigma: float | None = None
    class_elongation: float = 4.0
    arc_span: float = 0.0
    center_offset: float = 0.0
    semantic_rank: int | None = None
    view_correlation: float = 0.0
    n_extra_vocab: int = 0

    def __post_init__(self):
        if min(self.feature_dim, self.attribute_dim, self.wordvec_dim) < 2:
            raise ConfigError("all dimensions must be at least 2")
        if self.semantic_rank is not None and not (
            2 <= self.semantic_rank <= self.feature_dim
        ):
            raise ConfigError(
                "semantic_rank must lie in [2, feature_dim] when given"
            )
        if not 0.0 <= self.view_correlation <= 1.0:
            raise ConfigError("view_correlation must lie in [0, 1]")
        if not 0.0 <= self.arc_span <= 2.0 * np.pi:
            raise ConfigError("arc_span must lie in [0, 2*pi] radians")
        if self.n_aux_classes < 2 or self.n_target_classes < 2:
            raise ConfigError("need at least two classes on each side")
        if self.n_per_class < 1:
            raise ConfigError("need at least one instance per class")
        if self.aux_per_class is not None and self.aux_per_class < 1:
            raise ConfigError("aux_per_class must be positive when given")
        if self.shift_magnitude < 0:
            raise ConfigError("shift_magnitude must be nonnegative")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be nonnegative")
        if self.semantic_noise_sigma is not None and self.semantic_noise_sigma < 0:
            raise ConfigError("semantic_noise_sigma must be nonnegative")
        if self.class_elongation < 0:
            raise ConfigError("class_elongation must be nonnegative")
        if self.center_offset < 0:
            raise ConfigError("center_offset must be nonnegative")
        if self.n_extra_vocab < 0:
            raise ConfigError("n_extra_vocab must be nonnegative")

    @classmethod
    def from_mapping(cls, doc: Mapping) -> "SynthConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown synthetic config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True, eq=False)
class SynthResult:
    """The generated world plus its hidden ground truth.

    ``truth`` records what no real dataset would reveal: the generative
    maps of both sides, the class centers, and the target instances' true
    semantic vectors (used to score annotation experiments).
    """

    dataset: Dataset
    prototypes: PrototypeSet
    vocabulary: Vocabulary
    truth: dict = field(default_factory=dict)


# The target-side maps are the auxiliary maps seen through a drifted
# feature space: a rotation plus a non-orthogonal distortion of relative
# size _DRIFT_DISTORTION per unit of shift. The distortion is what makes
# the drift more than a change of basis: it warps relative distances, so
# decision boundaries transfer imperfectly even after a global alignment.
# The rotation angle saturates with the nominal shift (_DRIFT_CAP is the
# largest reachable angle in radians, _DRIFT_SLOPE the initial
# radians-per-unit-shift): domains deform quickly at first, then level
# off, as doubling a large drift cannot double how far features move.
_DRIFT_DISTORTION = 0.3
_DRIFT_CAP = 0.65
_DRIFT_SLOPE = 2.69


def _drift_angle(shift: float) -> float:
    """Monotone saturating map from nominal shift to rotation angle."""
    if shift == 0.0:
        return 0.0
    return _DRIFT_CAP * float(np.tanh(_DRIFT_SLOPE * shift / _DRIFT_CAP))


def _random_rotation(dim: int, angle: float, rng: np.random.Generator) -> np.ndarray:
    """Rotation of R^dim turning every 2-plane of a random frame by *angle*.

    The planes are the consecutive pairs of a random orthonormal basis, so
    every vector turns by the same amount: ``|Rc - c| = 2 sin(angle/2) |c|``
    exactly (up to one fixed axis when the dimension is odd). This makes
    the displacement caused by a given angle as large and as uniform as a
    rotation allows. ``angle = 0`` returns the exact identity.
    """
    raw = rng.normal(size=(dim, dim))
    if angle == 0.0:
        return np.eye(dim)
    frame, _ = np.linalg.qr(raw)
    block = np.eye(dim)
    c, s = np.cos(angle), np.sin(angle)
    for i in range(0, dim - 1, 2):
        block[i: i + 2, i: i + 2] = [[c, -s], [s, c]]
    return frame @ block @ frame.T


def generate_synthetic(config: SynthConfig) -> SynthResult:
    """Draw a complete dataset, prototype set and vocabulary from the config."""
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    t = cfg.feature_dim
    sem_dims = {"A": cfg.attribute_dim, "V": cfg.wordvec_dim}

    n_classes = cfg.n_aux_classes + cfg.n_target_classes
    # optional common component shared by every class center, as real
    # feature vectors often have; zero by default
    common = rng.normal(size=t)
    common *= cfg.center_offset * np.sqrt(t) / max(np.linalg.norm(common), 1e-12)
    centers = common + rng.normal(size=(n_classes, t))
    aux_centers = centers[: cfg.n_aux_classes]
    tgt_centers = centers[cfg.n_aux_classes:]

    def unit(vec):
        return vec / np.linalg.norm(vec)

    def class_shapes(side_centers, n_each):
        """Zero-mean displacement block (n_each x t) for every class.

        Straight mode (``arc_span == 0``): a stick toward a partner class,
        so class manifolds interleave and a mean vector represents them
        poorly. Arc mode: paired classes share a plane and bend toward
        each other like two moons; the deterministic arc centroid is
        subtracted, so each class mean stays exactly on its center and
        prototypes remain honest class means.
        """
        k = side_centers.shape[0]
        scale = cfg.noise_sigma * cfg.class_elongation
        order = rng.permutation(k)
        shapes: list = [None] * k
        if cfg.arc_span == 0.0:
            for pos in range(k):
                c, partner = order[pos], order[(pos + 1) % k]
                axis = unit(side_centers[partner] - side_centers[c])
                along = scale * rng.uniform(-1.0, 1.0, size=(n_each, 1))
                shapes[c] = along * axis
            return shapes
        half = cfg.arc_span / 2.0
        sinc = np.sin(half) / half
        pairs = [(order[i], order[i + 1]) for i in range(0, k - 1, 2)]
        for a, b in pairs:
            toward_b = unit(side_centers[b] - side_centers[a])
            raw = rng.normal(size=side_centers.shape[1])
            side = unit(raw - (raw @ toward_b) * toward_b)
            for c, bow in ((a, toward_b), (b, -toward_b)):
                phi = cfg.arc_span * (rng.uniform(size=(n_each, 1)) - 0.5)
                shapes[c] = scale * ((np.cos(phi) - sinc) * bow + np.sin(phi) * side)
        if k % 2:  # odd class out arcs in its own random plane
            c = order[k - 1]
            bow = unit(rng.normal(size=side_centers.shape[1]))
            raw = rng.normal(size=side_centers.shape[1])
            side = unit(raw - (raw @ bow) * bow)
            phi = cfg.arc_span * (rng.uniform(size=(n_each, 1)) - 0.5)
            shapes[c] = scale * ((np.cos(phi) - sinc) * bow + np.sin(phi) * side)
        return shapes

    # feature -> semantic maps; columns scaled so outputs are O(1). With a
    # semantic_rank each map first projects onto a random subspace, so any
    # class structure orthogonal to it never reaches the semantic views.
    def semantic_map(m: int) -> np.ndarray:
        full = rng.normal(size=(t, m)) / np.sqrt(t)
        if cfg.semantic_rank is None or cfg.semantic_rank >= t:
            return full
        basis, _ = np.linalg.qr(rng.normal(size=(t, cfg.semantic_rank)))
        return basis @ (basis.T @ full)

    maps_aux = {v: semantic_map(m) for v, m in sem_dims.items()}
    # the bridge re-encodes attribute space into word-vector space without
    # stretching: an isometry when dims match, orthonormal columns or rows
    # otherwise, so a bridged word-vector view is as informative per
    # dimension as the attribute view it paraphrases
    m_a, m_v = sem_dims["A"], sem_dims["V"]
    frame, _ = np.linalg.qr(rng.normal(size=(max(m_a, m_v), min(m_a, m_v))))
    bridge = frame if m_a >= m_v else frame.T
    rho = cfg.view_correlation
    if rho > 0.0:
        # pull the word-vector map toward a linear image of the attribute
        # map; the mixing weights keep output magnitude roughly constant
        maps_aux["V"] = (
            np.sqrt(rho) * maps_aux["A"] @ bridge
            + np.sqrt(1.0 - rho) * maps_aux["V"]
        )

    # one drift of feature space perturbs the feature-to-semantic relation
    # of the whole target domain; both semantic views inherit it, so no
    # amount of view averaging can cancel the displacement
    level = _drift_angle(cfg.shift_magnitude)
    rotation = _random_rotation(t, level, rng)
    distortion = rng.normal(size=(t, t)) / np.sqrt(t)
    drift = rotation + level * _DRIFT_DISTORTION * distortion
    maps_tgt = {v: drift @ maps_aux[v] for v in sem_dims}

    aux_names = tuple(f"aux{i:02d}" for i in range(cfg.n_aux_classes))
    tgt_names = tuple(f"tgt{i:02d}" for i in range(cfg.n_target_classes))

    def draw_side(side_centers, names, n_each):
        shapes = class_shapes(side_centers, n_each)
        rows, labels = [], []
        for center, shape, name in zip(side_centers, shapes, names):
            block = (
                center
                + shape
                + cfg.noise_sigma * rng.normal(size=(n_each, t))
            )
            rows.append(block)
            labels.extend([name] * n_each)
        return np.vstack(rows), tuple(labels)

    aux_each = cfg.aux_per_class or cfg.n_per_class
    aux_x, aux_labels = draw_side(aux_centers, aux_names, aux_each)
    tgt_x, tgt_labels = draw_side(tgt_centers, tgt_names, cfg.n_per_class)

    sem_sigma = (
        cfg.noise_sigma
        if cfg.semantic_noise_sigma is None
        else cfg.semantic_noise_sigma
    )
    aux_semantics = []
    for v in sorted(sem_dims):
        clean = aux_x @ maps_aux[v]
        noisy = clean + sem_sigma * rng.normal(size=clean.shape)
        aux_semantics.append(ViewMatrix(noisy, v))

    # prototypes: exact semantic class means under the target-side maps
    proto_vectors = {
        v: {
            name: tgt_centers[i] @ maps_tgt[v]
            for i, name in enumerate(tgt_names)
        }
        for v in sem_dims
    }
    prototypes = PrototypeSet(proto_vectors)

    # true target semantics (per instance, noiseless) for annotation scoring
    target_semantics = {v: tgt_x @ maps_tgt[v] for v in sorted(sem_dims)}

    words = list(tgt_names) + list(aux_names)
    vectors = [proto_vectors["V"][name] for name in tgt_names]
    vectors += [aux_centers[i] @ maps_aux["V"] for i in range(cfg.n_aux_classes)]
    for i in range(cfg.n_extra_vocab):
        words.append(f"rand{i:02d}")
        vectors.append(rng.normal(size=t) @ maps_aux["V"])
    vocabulary = Vocabulary(tuple(words), np.vstack(vectors))

    dataset = Dataset(
        auxiliary_features=ViewMatrix(aux_x, "X"),
        auxiliary_semantics=tuple(aux_semantics),
        auxiliary_labels=aux_labels,
        target_features=ViewMatrix(tgt_x, "X"),
        target_labels=tgt_labels,
    )
    truth = {
        "maps_aux": maps_aux,
        "maps_target": maps_tgt,
        "aux_centers": aux_centers,
        "target_centers": tgt_centers,
        "target_semantics": target_semantics,
    }
    return SynthResult(dataset, prototypes, vocabulary, truth)


def with_seed(config: SynthConfig, seed: int) -> SynthConfig:
    """The same world parameters under a different seed."""
    return replace(config, seed=seed)
