"""Dataset plumbing: frame sampling, feature files, manifests, synthetic corpus.

Feature file (little-endian): magic ``VDPF``, version u32=1, rows u32,
cols u32, then rows*cols f32 row-major. Manifests are JSONL with fields
video_id, feature_path (relative to the manifest), split, gold_structure
(space-joined tokens), description.

The synthetic generator plants orthogonal unit codes in the frame features:
each of the three EDU segments carries e(role) + e(relation of its governing
node) + Gaussian noise, where role = (nucleus|satellite, governed by
root|inner node). Shape, both relations and both nuclearities are therefore
decodable from features alone at low noise, which makes learnability a
property of the corpus by construction rather than an empirical hope.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import binio, rst
from .binio import BadMagic, NonFiniteValue, TruncatedFile

FEATURE_MAGIC = b"VDPF"
FEATURE_VERSION = 1

DEFAULT_FPS = 5.0


class EmptyVideo(ValueError):
    pass


class BadShape(ValueError):
    pass


class SpecError(ValueError):
    pass


@dataclass
class FeatureSequence:
    video_id: str
    frames: np.ndarray  # (p, D) float64
    fps_source: float | None = None


def sample_frames(frame_timestamps, target_fps: float) -> list[int]:
    """Pick the earliest frame at or after each tick k/target_fps.

    Output indices are strictly increasing (a frame serving several ticks is
    selected once).
    """
    ts = np.asarray(frame_timestamps, dtype=np.float64)
    if ts.size == 0:
        raise EmptyVideo("no frames to sample")
    if target_fps <= 0:
        raise ValueError("target_fps must be positive")
    if ts.size > 1 and not np.all(np.diff(ts) > 0):
        raise ValueError("frame timestamps must be strictly increasing")
    n_ticks = int(math.floor(ts[-1] * target_fps + 1e-9)) + 1
    ticks = np.arange(n_ticks) / target_fps
    idx = np.searchsorted(ts, ticks, side="left")
    idx = idx[idx < ts.size]
    return [int(i) for i in np.unique(idx)]


def toy_extract(image) -> np.ndarray:
    """64x64 grayscale grid -> 64 block means (8x8 blocks, row-major)."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.shape != (64, 64):
        raise BadShape(f"expected a 64x64 grid, got {arr.shape}")
    return arr.reshape(8, 8, 8, 8).mean(axis=(1, 3)).reshape(64)


def write_features(seq: FeatureSequence, path) -> None:
    frames = np.asarray(seq.frames)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise BadShape(f"feature matrix must be (p>=1, D), got {frames.shape}")
    if not np.all(np.isfinite(frames)):
        raise NonFiniteValue(f"non-finite feature values for {seq.video_id}")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        binio.write_u32(fh, FEATURE_VERSION)
        binio.write_u32(fh, frames.shape[0])
        binio.write_u32(fh, frames.shape[1])
        fh.write(np.ascontiguousarray(frames, dtype="<f4").tobytes())


def read_features(path, video_id: str | None = None,
                  fps_source: float | None = None) -> FeatureSequence:
    path = Path(path)
    with open(path, "rb") as fh:
        binio.expect_magic(fh, FEATURE_MAGIC, path)
        version = binio.read_u32(fh, "version")
        if version != FEATURE_VERSION:
            raise ValueError(f"{path}: unsupported feature file version {version}")
        rows = binio.read_u32(fh, "row count")
        cols = binio.read_u32(fh, "column count")
        raw = binio.read_exact(fh, 4 * rows * cols, "feature data")
        trailing = fh.read(1)
        if trailing:
            raise ValueError(f"{path}: trailing bytes after feature data")
    frames = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(rows, cols)
    if not np.all(np.isfinite(frames)):
        raise NonFiniteValue(f"{path}: non-finite feature values")
    return FeatureSequence(video_id or path.stem, frames, fps_source)


# Per-relation template sentences for synthetic EDU word spans.
TEMPLATES: dict[str, tuple[str, ...]] = {
    "Attribution": (
        "the coach says the team looks ready",
        "a student claims the library is quiet",
        "the driver reports the bus is full",
    ),
    "Background": (
        "the park sits beside a busy road",
        "the hall was decorated the night before",
        "the court has hosted games for years",
    ),
    "Cause": (
        "the person spills coffee on the shirt",
        "a sudden rain soaks the garden path",
        "the ball knocks a cup off the table",
    ),
    "Comparison": (
        "the second try looks faster than the first",
        "the red team scores more than the blue team",
        "the new racket feels lighter than the old one",
    ),
    "Condition": (
        "if the rain stops the match resumes",
        "if the bell rings the class ends",
        "if the bus arrives the group departs",
    ),
    "Contrast": (
        "one player rests while the other trains",
        "the hall is loud but the library stays calm",
        "the first serve fails yet the second lands",
    ),
    "Elaboration": (
        "the person dries the shirt with a handkerchief",
        "the player adjusts the grip on the racket",
        "the student stacks the books by size",
    ),
    "Enablement": (
        "the door is opened to let the team through",
        "the net is lowered so play can start",
        "the lights are switched on for the evening game",
    ),
    "Evaluation": (
        "the rally was the best of the day",
        "the cleanup made the room look great",
        "the plan worked better than expected",
    ),
    "Explanation": (
        "the delay happened because the court was wet",
        "the team won because practice paid off",
        "the shelf fell because a bracket broke",
    ),
    "Joint": (
        "one group plays frisbee and another eats lunch",
        "a bus stops and a crowd gathers",
        "the kids run and the parents watch",
    ),
    "Manner-Means": (
        "the player returns the ball with a backhand",
        "the stains are removed by careful scrubbing",
        "the shelf is fixed with a spare screw",
    ),
    "Same-Unit": (
        "the match paused then resumed at once",
        "the speech continued after a short break",
        "the game carried on despite the noise",
    ),
    "Summary": (
        "overall the visit went smoothly",
        "in short the team played well",
        "the day ended as a clear success",
    ),
    "Temporal": (
        "the person goes to the bathroom and cleans the stains",
        "the team warms up before the match",
        "the group leaves after the final whistle",
    ),
    "Textual-Organization": (
        "the first half covers the warmup",
        "the next part shows the main rally",
        "the final scene shows the awards",
    ),
    "Topic-Change": (
        "the view shifts from the court to the garden",
        "the scene moves to the dining hall",
        "the camera turns to the bus stop",
    ),
    "Topic-Comment": (
        "the new schedule everyone likes it",
        "the old racket nobody uses it",
        "the quiet corner students prefer it",
    ),
}


def _templates_for(relation: str) -> tuple[str, ...]:
    if relation in TEMPLATES:
        return TEMPLATES[relation]
    stem = relation.lower()
    return (
        f"the {stem} scene begins",
        f"the {stem} scene continues",
        f"the {stem} scene ends",
    )


@dataclass(frozen=True)
class SynthSpec:
    n_videos: int
    relation_subset: tuple[str, ...] = ("Cause", "Elaboration", "Contrast")
    frames_per_segment: tuple[int, int] = (3, 6)  # inclusive range
    noise_sigma: float = 0.0
    feature_dim: int = 64
    seed: int = 42
    train_count: int | None = None  # None: mirror the 210/310, 30/310 proportions
    val_count: int | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise SpecError(f"unknown synth spec fields: {sorted(extra)}")
        d = dict(d)
        for key in ("relation_subset", "frames_per_segment"):
            if key in d and d[key] is not None:
                d[key] = tuple(d[key])
        return cls(**d)


# Role codes: (is_nucleus, governed by root or inner node) -> basis index.
ROLE_INDEX = {
    ("N", "root"): 0,
    ("S", "root"): 1,
    ("N", "inner"): 2,
    ("S", "inner"): 3,
}
N_ROLE_CODES = len(ROLE_INDEX)


def planted_code(role: tuple[str, str], relation: str, spec: SynthSpec) -> np.ndarray:
    """Noise-free segment mean: e(role) + e(relation), orthogonal unit codes."""
    vec = np.zeros(spec.feature_dim)
    vec[ROLE_INDEX[role]] = 1.0
    vec[N_ROLE_CODES + spec.relation_subset.index(relation)] = 1.0
    return vec


def _validate_spec(spec: SynthSpec, relations: tuple[str, ...]) -> tuple[int, int]:
    if spec.n_videos < 1:
        raise SpecError("n_videos must be >= 1")
    if spec.noise_sigma < 0:
        raise SpecError("noise_sigma must be >= 0")
    if not spec.relation_subset:
        raise SpecError("relation_subset must be non-empty")
    unknown = [r for r in spec.relation_subset if r not in relations]
    if unknown:
        raise SpecError(f"relations not in the active vocabulary: {unknown}")
    if spec.feature_dim < N_ROLE_CODES + len(spec.relation_subset):
        raise SpecError(
            f"feature_dim must be >= {N_ROLE_CODES + len(spec.relation_subset)} "
            "to hold the orthogonal codes")
    lo, hi = spec.frames_per_segment
    if not 1 <= lo <= hi:
        raise SpecError("frames_per_segment must be an increasing range with lo >= 1")
    n = spec.n_videos
    if spec.train_count is None:
        train = round(n * 210 / 310)
        val = round(n * 30 / 310)
    else:
        train = spec.train_count
        val = spec.val_count if spec.val_count is not None else 0
    if train < 0 or val < 0 or train + val > n:
        raise SpecError(f"split counts {train}/{val} infeasible for {n} videos")
    return train, val


def _synth_video(spec: SynthSpec, rng: np.random.Generator):
    """Draw one synthetic video: (gold tree, sentences, feature matrix)."""
    rels = spec.relation_subset
    left_branching = bool(rng.integers(0, 2))
    r_root = rels[rng.integers(len(rels))]
    r_inner = rels[rng.integers(len(rels))]
    n_root = rst.NUCLEARITIES[rng.integers(2)]
    n_inner = rst.NUCLEARITIES[rng.integers(2)]
    lo, hi = spec.frames_per_segment
    seg_lens = [int(rng.integers(lo, hi + 1)) for _ in range(3)]

    if left_branching:
        # ((e0, e1), e2): e0,e1 under the inner node, e2 under the root.
        parent_rel = (r_inner, r_inner, r_root)
        roles = [
            ("N" if n_inner == rst.NUC_LEFT else "S", "inner"),
            ("N" if n_inner == rst.NUC_RIGHT else "S", "inner"),
            ("N" if n_root == rst.NUC_RIGHT else "S", "root"),
        ]
    else:
        # (e0, (e1, e2)): e0 under the root, e1,e2 under the inner node.
        parent_rel = (r_root, r_inner, r_inner)
        roles = [
            ("N" if n_root == rst.NUC_LEFT else "S", "root"),
            ("N" if n_inner == rst.NUC_LEFT else "S", "inner"),
            ("N" if n_inner == rst.NUC_RIGHT else "S", "inner"),
        ]

    sentences = []
    edus = []
    for i in range(3):
        options = _templates_for(parent_rel[i])
        sentence = options[rng.integers(len(options))]
        sentences.append(sentence)
        edus.append(rst.Leaf(rst.Edu(i, tuple(sentence.split()))))
    if left_branching:
        tree: rst.RstTree = rst.Node(r_root, n_root,
                                     rst.Node(r_inner, n_inner, edus[0], edus[1]), edus[2])
    else:
        tree = rst.Node(r_root, n_root, edus[0],
                        rst.Node(r_inner, n_inner, edus[1], edus[2]))

    segments = []
    for i in range(3):
        code = planted_code(roles[i], parent_rel[i], spec)
        noise = spec.noise_sigma * rng.standard_normal((seg_lens[i], spec.feature_dim))
        segments.append(code[None, :] + noise)
    frames = np.concatenate(segments, axis=0)
    return tree, sentences, frames


def generate_synthetic(spec: SynthSpec, out_dir,
                       relations: tuple[str, ...] = rst.DEFAULT_RELATIONS) -> Path:
    """Write feature files plus manifest; byte-deterministic in the spec."""
    train_count, val_count = _validate_spec(spec, relations)
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    lines = []
    for v in range(spec.n_videos):
        video_id = f"synth-{v:04d}"
        tree, sentences, frames = _synth_video(spec, rng)
        rel_path = f"features/{video_id}.vdpf"
        write_features(FeatureSequence(video_id, frames, DEFAULT_FPS), out / rel_path)
        if v < train_count:
            split = "train"
        elif v < train_count + val_count:
            split = "val"
        else:
            split = "test"
        lines.append(json.dumps({
            "video_id": video_id,
            "feature_path": rel_path,
            "split": split,
            "gold_structure": rst.to_line(rst.linearize(tree)),
            "description": " ; ".join(sentences),
        }, sort_keys=True))
    manifest = out / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


@dataclass
class RecordProblem:
    line_no: int
    video_id: str | None
    issue: str


@dataclass
class Example:
    video_id: str
    features: FeatureSequence
    gold_tokens: list[str]
    gold_tree: rst.RstTree
    description: str


@dataclass
class CorpusSplits:
    train: list[Example] = field(default_factory=list)
    val: list[Example] = field(default_factory=list)
    test: list[Example] = field(default_factory=list)
    problems: list[RecordProblem] = field(default_factory=list)

    def split(self, name: str) -> list[Example]:
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    @property
    def feature_dim(self) -> int | None:
        for part in (self.train, self.val, self.test):
            if part:
                return part[0].features.frames.shape[1]
        return None


REQUIRED_MANIFEST_FIELDS = ("video_id", "feature_path", "split", "gold_structure")


def load_corpus(manifest_path, relations: tuple[str, ...] = rst.DEFAULT_RELATIONS,
                max_frames: int = 128) -> CorpusSplits:
    """Load and validate every manifest record; bad records become problems.

    Only an unreadable manifest raises. Feature matrices longer than
    max_frames are tail-truncated.
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    splits = CorpusSplits()
    seen_ids: set[str] = set()
    feature_dim: int | None = None
    with open(manifest_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                splits.problems.append(RecordProblem(line_no, None, f"bad JSON: {exc}"))
                continue
            missing = [f for f in REQUIRED_MANIFEST_FIELDS if f not in rec]
            if missing:
                splits.problems.append(RecordProblem(line_no, rec.get("video_id"),
                                                     f"missing fields: {missing}"))
                continue
            vid = rec["video_id"]
            if vid in seen_ids:
                splits.problems.append(RecordProblem(line_no, vid, "DuplicateId"))
                continue
            if rec["split"] not in ("train", "val", "test"):
                splits.problems.append(RecordProblem(line_no, vid,
                                                     f"bad split {rec['split']!r}"))
                continue
            tokens = rst.from_line(rec["gold_structure"])
            try:
                tree = rst.parse(tokens, relations)
            except rst.ParseError as exc:
                splits.problems.append(RecordProblem(line_no, vid, f"gold_structure: {exc}"))
                continue
            try:
                feats = read_features(base / rec["feature_path"], video_id=vid)
            except (OSError, ValueError) as exc:
                splits.problems.append(RecordProblem(line_no, vid, f"features: {exc}"))
                continue
            if feature_dim is None:
                feature_dim = feats.frames.shape[1]
            elif feats.frames.shape[1] != feature_dim:
                splits.problems.append(RecordProblem(
                    line_no, vid,
                    f"feature dim {feats.frames.shape[1]} != corpus dim {feature_dim}"))
                continue
            if feats.frames.shape[0] > max_frames:
                feats = FeatureSequence(vid, feats.frames[:max_frames], feats.fps_source)
            seen_ids.add(vid)
            splits.split(rec["split"]).append(Example(
                video_id=vid,
                features=feats,
                gold_tokens=tokens,
                gold_tree=tree,
                description=rec.get("description", ""),
            ))
    return splits
