"""Morphology genome of a tensegrity modular robot and chain construction.

A robot is a linear chain of icosahedron tensegrity modules.  The genome holds
two global genes (module count, stiffness level) and one local gene per joint:
the triangular face of module ``i`` that is attached to module ``i + 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import itertools

import numpy as np

MAX_MODULES = 10
N_STIFFNESS_LEVELS = 9
N_FACES = 8

# cable spring constants (N/m), linear over the 9 levels
STIFFNESS_TABLE = np.linspace(25.0, 800.0, N_STIFFNESS_LEVELS)

# module width equals its length; the squeezing walls are 1.5 module lengths deep
MODULE_WIDTH = 0.1667 / 1.5
PRESTRETCH = 0.20
# modules are centred this far apart along the chain axis
MODULE_PITCH = MODULE_WIDTH
# faces 0 (octant +++) and 7 (octant ---) are pulled together by the servomotor
ACTUATED_FACES = (0, 7)
# orientation gene used for the tail module, which has no outgoing face
TAIL_EXIT_FACE = 0

MUTATION_KINDS = ("add_module", "delete_module", "change_stiffness", "change_face")


@dataclass(frozen=True)
class MorphologyGenome:
    num_modules: int
    stiffness_level: int
    connection_faces: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "connection_faces", tuple(int(f) for f in self.connection_faces))
        if not 1 <= self.num_modules <= MAX_MODULES:
            raise ValueError(f"num_modules must be in [1, {MAX_MODULES}], got {self.num_modules}")
        if not 0 <= self.stiffness_level < N_STIFFNESS_LEVELS:
            raise ValueError(f"stiffness_level out of range: {self.stiffness_level}")
        if len(self.connection_faces) != self.num_modules - 1:
            raise ValueError("need exactly num_modules - 1 connection faces")
        if any(not 0 <= f < N_FACES for f in self.connection_faces):
            raise ValueError(f"connection face out of range: {self.connection_faces}")

    @property
    def stiffness(self) -> float:
        """Cable spring constant in N/m."""
        return float(STIFFNESS_TABLE[self.stiffness_level])

    @property
    def descriptor(self) -> tuple[int, int]:
        """Cell of the morphology archive: (stiffness level, modules - 1)."""
        return (self.stiffness_level, self.num_modules - 1)

    def to_record(self) -> str:
        faces = ",".join(str(f) for f in self.connection_faces)
        return f"M:{self.num_modules};S:{self.stiffness_level};F:{faces}"

    @classmethod
    def from_record(cls, record: str) -> "MorphologyGenome":
        parts = dict(p.split(":", 1) for p in record.strip().split(";"))
        faces = tuple(int(f) for f in parts["F"].split(",") if f != "")
        return cls(int(parts["M"]), int(parts["S"]), faces)


def random_morphology(rng_seed) -> MorphologyGenome:
    """Uniform random genome.  ``rng_seed`` may be an int or a ``np.random.Generator``."""
    rng = np.random.default_rng(rng_seed)
    n = int(rng.integers(1, MAX_MODULES + 1))
    level = int(rng.integers(0, N_STIFFNESS_LEVELS))
    faces = tuple(int(f) for f in rng.integers(0, N_FACES, size=n - 1))
    return MorphologyGenome(n, level, faces)


def applicable_mutations(g: MorphologyGenome) -> list[str]:
    kinds = []
    if g.num_modules < MAX_MODULES:
        kinds.append("add_module")
    if g.num_modules > 1:
        kinds.append("delete_module")
    kinds.append("change_stiffness")
    if g.num_modules > 1:
        kinds.append("change_face")
    return kinds


def mutate_morphology(g: MorphologyGenome, rng: np.random.Generator, kind: str | None = None) -> MorphologyGenome:
    """Apply one mutation, drawn uniformly from the kinds applicable to ``g``.

    Adding a module inserts it at a random position in the chain together with
    a random face gene; deleting removes a random module and one face gene.
    Stiffness moves by one level (clamped), and a face change redraws one face
    gene among the 7 other values.
    """
    kinds = applicable_mutations(g)
    if kind is None:
        kind = kinds[int(rng.integers(len(kinds)))]
    elif kind not in kinds:
        raise ValueError(f"mutation {kind!r} not applicable to {g.to_record()}")

    faces = list(g.connection_faces)
    if kind == "add_module":
        pos = int(rng.integers(0, len(faces) + 1))
        faces.insert(pos, int(rng.integers(N_FACES)))
        return MorphologyGenome(g.num_modules + 1, g.stiffness_level, faces)
    if kind == "delete_module":
        pos = int(rng.integers(0, len(faces)))
        del faces[pos]
        return MorphologyGenome(g.num_modules - 1, g.stiffness_level, faces)
    if kind == "change_stiffness":
        if g.stiffness_level == 0:
            level = 1
        elif g.stiffness_level == N_STIFFNESS_LEVELS - 1:
            level = N_STIFFNESS_LEVELS - 2
        else:
            level = g.stiffness_level + (1 if rng.random() < 0.5 else -1)
        return MorphologyGenome(g.num_modules, level, faces)
    # change_face
    pos = int(rng.integers(0, len(faces)))
    new = int(rng.integers(N_FACES - 1))
    faces[pos] = new if new < faces[pos] else new + 1
    return MorphologyGenome(g.num_modules, g.stiffness_level, faces)


# --------------------------------------------------------------------------
# geometry


def face_signs(face: int) -> np.ndarray:
    return np.array([1 - 2 * ((face >> 2) & 1), 1 - 2 * ((face >> 1) & 1), 1 - 2 * (face & 1)], float)


def opposite_face(face: int) -> int:
    return N_FACES - 1 - face


@dataclass(frozen=True)
class ModuleGeometry:
    node_positions: np.ndarray  # (12, 3) metres
    rods: np.ndarray  # (6, 2)
    cables: np.ndarray  # (24, 2)
    cable_rest: np.ndarray  # (24,)
    prestretch: float
    actuated_face_pair: tuple[int, int]
    faces: np.ndarray  # (8, 3), row k is the face whose outward normal has signs face_signs(k)
    actuated_cables: np.ndarray = field(repr=False)  # bool (24,)

    @property
    def width(self) -> float:
        return float(np.ptp(self.node_positions[:, 0]))


@lru_cache(maxsize=None)
def icosahedron_module(width: float = MODULE_WIDTH, prestretch: float = PRESTRETCH) -> ModuleGeometry:
    """Six-strut tensegrity icosahedron built from three orthogonal rod pairs.

    With parallel rods at distance ``width / 2`` and rod length ``width`` all 24
    cables have equal length and equal tension, which is the self-stressed
    equilibrium of this structure.
    """
    s, h = width / 4.0, width / 2.0
    pts = []
    for sx, sz in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        pts.append((sx * s, 0.0, sz * h))
    for sx, sy in ((1, 1), (-1, 1), (1, -1), (-1, -1)):
        pts.append((sx * h, sy * s, 0.0))
    for sy, sz in ((1, 1), (-1, 1), (1, -1), (-1, -1)):
        pts.append((0.0, sy * h, sz * s))
    p = np.array(pts)
    rods = np.array([(0, 1), (2, 3), (4, 5), (6, 7), (8, 9), (10, 11)])

    cable_len = np.sqrt(6.0) * s
    d = np.linalg.norm(p[:, None] - p[None], axis=-1)
    cables = np.array([(i, j) for i, j in itertools.combinations(range(12), 2) if abs(d[i, j] - cable_len) < 1e-12])
    assert len(cables) == 24

    faces = []
    for k in range(N_FACES):
        sg = face_signs(k)
        a = next(i for i in range(4) if np.all(np.sign(p[i, [0, 2]]) == sg[[0, 2]]))
        b = next(i for i in range(4, 8) if np.all(np.sign(p[i, [0, 1]]) == sg[[0, 1]]))
        c = next(i for i in range(8, 12) if np.all(np.sign(p[i, [1, 2]]) == sg[[1, 2]]))
        faces.append((a, b, c))
    faces = np.array(faces)

    act_nodes = set(faces[ACTUATED_FACES[0]]) | set(faces[ACTUATED_FACES[1]])
    actuated = np.array([(i in act_nodes) != (j in act_nodes) for i, j in cables])

    rest = np.full(len(cables), cable_len / (1.0 + prestretch))
    return ModuleGeometry(p, rods, cables, rest, prestretch, ACTUATED_FACES, faces, actuated)


def _rotation_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotation matrix taking unit vector ``a`` onto unit vector ``b``."""
    v = np.cross(a, b)
    c = float(np.dot(a, b))
    if np.linalg.norm(v) < 1e-12:
        if c > 0:
            return np.eye(3)
        # 180 degrees about any axis orthogonal to a
        axis = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-9:
            axis = np.cross(a, [0.0, 1.0, 0.0])
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def _rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _yz_angles(points: np.ndarray) -> np.ndarray:
    return np.arctan2(points[:, 2], points[:, 1])


@dataclass(frozen=True)
class ChainGeometry:
    """Flattened node/element arrays of a whole robot.

    Module ``k`` owns nodes ``12k .. 12k + 11``.  The head is module 0; it sits
    at the +x end of the chain and its free face points along +x.
    """

    modules: tuple[ModuleGeometry, ...]
    positions: np.ndarray  # (12n, 3)
    rods: np.ndarray  # (6n, 2)
    rod_length: np.ndarray  # (6n,)
    cables: np.ndarray  # (24n, 2)
    cable_rest: np.ndarray  # (24n,)
    cable_module: np.ndarray  # (24n,) owning module index if actuated, else -1
    links: np.ndarray  # (3(n-1), 2)
    link_length: np.ndarray
    front_face: np.ndarray  # (3,) global node indices of the head's free face

    @property
    def num_modules(self) -> int:
        return len(self.modules)

    @property
    def chain_length(self) -> float:
        return float(np.ptp(self.positions[:, 0]))


def build_chain(g: MorphologyGenome) -> ChainGeometry:
    mod = icosahedron_module()
    n = g.num_modules
    exit_faces = list(g.connection_faces) + [TAIL_EXIT_FACE]
    centroid = {k: mod.node_positions[mod.faces[k]].mean(axis=0) for k in range(N_FACES)}

    placed = []
    links = []
    prev_exit = prev_exit_idx = None  # previous module's exit-face vertices (global coords) and node indices
    for i in range(n):
        e = exit_faces[i]
        entry = opposite_face(e)
        normal = centroid[e] / np.linalg.norm(centroid[e])
        R = _rotation_between(normal, np.array([-1.0, 0.0, 0.0]))
        local = mod.node_positions @ R.T
        entry_pts = local[mod.faces[entry]]
        if prev_exit is None:
            # put one vertex of the front face straight up
            twist = np.pi / 2 - _yz_angles(entry_pts)[0]
        else:
            target = _yz_angles(prev_exit)[0]
            cand = (target - _yz_angles(entry_pts) + np.pi) % (2 * np.pi) - np.pi
            twist = cand[np.argmin(np.abs(cand))]
        local = local @ _rot_x(twist).T
        pts = local + np.array([-i * MODULE_PITCH, 0.0, 0.0])
        if prev_exit is not None:
            entry_global = mod.faces[entry] + 12 * i
            ang_e = _yz_angles(pts[mod.faces[entry]])
            for a_idx, a_pt in zip(prev_exit_idx, prev_exit):
                diff = np.abs((ang_e - np.arctan2(a_pt[2], a_pt[1]) + np.pi) % (2 * np.pi) - np.pi)
                links.append((a_idx, entry_global[int(np.argmin(diff))]))
        prev_exit = pts[mod.faces[e]]
        prev_exit_idx = mod.faces[e] + 12 * i
        placed.append(pts)

    positions = np.vstack(placed)
    positions[:, 2] -= positions[:, 2].min()

    offs = 12 * np.arange(n)
    rods = np.concatenate([mod.rods + o for o in offs])
    rod_len = np.linalg.norm(positions[rods[:, 0]] - positions[rods[:, 1]], axis=1)
    cables = np.concatenate([mod.cables + o for o in offs])
    cable_rest = np.tile(mod.cable_rest, n)
    cable_module = np.concatenate([np.where(mod.actuated_cables, k, -1) for k in range(n)])
    links = np.array(links, dtype=np.int64).reshape(-1, 2)
    link_len = np.linalg.norm(positions[links[:, 0]] - positions[links[:, 1]], axis=1) if len(links) else np.zeros(0)
    front = mod.faces[opposite_face(exit_faces[0])].copy()
    return ChainGeometry(
        modules=(mod,) * n,
        positions=positions,
        rods=rods.astype(np.int64),
        rod_length=rod_len,
        cables=cables.astype(np.int64),
        cable_rest=cable_rest,
        cable_module=cable_module.astype(np.int64),
        links=links,
        link_length=link_len,
        front_face=front.astype(np.int64),
    )
