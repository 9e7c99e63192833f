"""Embedding datasets: container type, EMB1 binary I/O, CSV import/export,
profession filtering, stratified splitting and the planted-subspace generator.
"""
import csv
import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_dim
from .errors import ConfigError, FormatError, IntegrityError

MAGIC = b"EMB1"
SPLITS = ("unassigned", "train", "dev", "test")
_SPLIT_CODE = {name: code for code, name in enumerate(SPLITS)}
GENDER_VALUES = ("female", "male")  # label 0, label 1


@dataclass(eq=False)
class EmbeddingDataset:
    """Rows of one domain: vectors plus gender, profession and split labels.

    ``vectors`` is stored as float32 so that save/load round-trips bit-exactly.
    ``domain`` is a single tag because a dataset never mixes domains.
    """

    vectors: np.ndarray
    gender: np.ndarray
    profession: np.ndarray
    domain: str
    profession_names: tuple = ()
    split: np.ndarray = None

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2 or self.vectors.shape[1] < 1:
            raise IntegrityError(f"vectors must be n x d with d >= 1, got {self.vectors.shape}")
        n = self.vectors.shape[0]
        self.gender = np.asarray(self.gender, dtype=np.int64).ravel()
        self.profession = np.asarray(self.profession, dtype=np.int64).ravel()
        if self.split is None:
            self.split = np.full(n, "unassigned", dtype="<U10")
        self.split = np.asarray(self.split, dtype="<U10").ravel()
        self.profession_names = tuple(str(p) for p in self.profession_names)
        self.domain = str(self.domain)
        for name in ("gender", "profession", "split"):
            if getattr(self, name).shape[0] != n:
                raise IntegrityError(
                    f"{name} has {getattr(self, name).shape[0]} entries but vectors has {n} rows"
                )
        if not np.all(np.isfinite(self.vectors)):
            raise IntegrityError("vectors contain NaN or Inf")
        if n and not np.all((self.gender == 0) | (self.gender == 1)):
            raise IntegrityError("gender labels must be 0 or 1")
        if n and (self.profession.min() < 0 or self.profession.max() >= len(self.profession_names)):
            raise IntegrityError("profession id outside profession_names table")
        bad = set(np.unique(self.split)) - set(SPLITS)
        if bad:
            raise IntegrityError(f"unknown split tags {sorted(bad)}")

    @property
    def n(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, EmbeddingDataset):
            return NotImplemented
        return (
            self.domain == other.domain
            and self.profession_names == other.profession_names
            and self.vectors.shape == other.vectors.shape
            and self.vectors.tobytes() == other.vectors.tobytes()
            and np.array_equal(self.gender, other.gender)
            and np.array_equal(self.profession, other.profession)
            and np.array_equal(self.split, other.split)
        )

    def subset(self, rows):
        """Dataset restricted to ``rows`` (boolean mask or index array), order kept."""
        rows = np.asarray(rows)
        return EmbeddingDataset(
            vectors=self.vectors[rows],
            gender=self.gender[rows],
            profession=self.profession[rows],
            domain=self.domain,
            profession_names=self.profession_names,
            split=self.split[rows],
        )

    def part(self, name):
        """Rows tagged with split ``name`` (train/dev/test/unassigned)."""
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return self.subset(self.split == name)

    def has_splits(self):
        return bool(np.any(self.split == "train")) and bool(np.any(self.split == "test"))

    def labels(self, task):
        if task == "gender":
            return self.gender
        if task == "profession":
            return self.profession
        raise ValueError(f"unknown task {task!r}; expected 'gender' or 'profession'")


# ---------------------------------------------------------------------------
# EMB1 container


def _label_schemas(ds):
    return [
        {"name": "gender", "values": list(GENDER_VALUES)},
        {"name": "profession", "values": list(ds.profession_names)},
        {"name": "split", "values": list(SPLITS)},
    ]


def save_dataset(ds, path, provenance=None):
    """Write ``ds`` as an EMB1 file.

    Layout: ``b"EMB1"``, a little-endian uint32 header length, the UTF-8 JSON
    header, ``n*d`` little-endian float32 values (row-major), then one
    little-endian uint32 array per label column in header order.
    """
    header = {
        "n": ds.n,
        "d": ds.dim,
        "domain": ds.domain,
        "label_schemas": _label_schemas(ds),
        "provenance": provenance or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    split_codes = np.array([_SPLIT_CODE[s] for s in ds.split], dtype="<u4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(ds.vectors.astype("<f4", copy=False).tobytes())
        fh.write(ds.gender.astype("<u4").tobytes())
        fh.write(ds.profession.astype("<u4").tobytes())
        fh.write(split_codes.tobytes())


def read_header(path):
    """Return ``(header_dict, payload_offset)`` of an EMB1 file."""
    with open(path, "rb") as fh:
        head = fh.read(8)
        if len(head) < 8 or head[:4] != MAGIC:
            raise FormatError(f"{path}: missing EMB1 magic header")
        (length,) = struct.unpack("<I", head[4:8])
        blob = fh.read(length)
    if len(blob) != length:
        raise FormatError(f"{path}: header truncated")
    try:
        header = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: header is not valid JSON ({exc})") from None
    required = {"n", "d", "domain", "label_schemas"}
    if not isinstance(header, dict) or not required <= header.keys():
        raise FormatError(f"{path}: header lacks fields {sorted(required - set(header or {}))}")
    if not (isinstance(header["n"], int) and isinstance(header["d"], int)) or header["n"] < 0 or header["d"] < 1:
        raise FormatError(f"{path}: invalid n/d in header")
    return header, 8 + length


def load_dataset(path):
    header, offset = read_header(path)
    n, d = header["n"], header["d"]
    schemas = header["label_schemas"]
    names = [s.get("name") for s in schemas]
    if names[:2] != ["gender", "profession"]:
        raise FormatError(f"{path}: expected gender and profession label columns, got {names}")
    with open(path, "rb") as fh:
        fh.seek(offset)
        payload = fh.read()
    expected = 4 * n * d + 4 * n * len(schemas)
    if len(payload) != expected:
        raise IntegrityError(
            f"{path}: payload has {len(payload)} bytes, header implies {expected}"
        )
    vectors = np.frombuffer(payload, dtype="<f4", count=n * d).reshape(n, d)
    columns = {}
    pos = 4 * n * d
    for schema in schemas:
        columns[schema["name"]] = np.frombuffer(payload, dtype="<u4", count=n, offset=pos).astype(np.int64)
        pos += 4 * n
    split = None
    if "split" in columns:
        codes = columns["split"]
        if n and codes.max() >= len(SPLITS):
            raise IntegrityError(f"{path}: split code out of range")
        split = np.array(SPLITS, dtype="<U10")[codes]
    return EmbeddingDataset(
        vectors=vectors.astype(np.float32),
        gender=columns["gender"],
        profession=columns["profession"],
        domain=header["domain"],
        profession_names=schemas[1].get("values", []),
        split=split,
    )


# ---------------------------------------------------------------------------
# CSV (small data only; decimal text is not bit-exact)


def write_csv(ds, path):
    """Export with ``%.7g`` decimals; reloading gives values equal to ~1e-7 relative."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(ds.dim)] + ["gender", "profession", "split"])
        for i in range(ds.n):
            w.writerow(
                [f"{v:.7g}" for v in ds.vectors[i]]
                + [int(ds.gender[i]), ds.profession_names[ds.profession[i]], ds.split[i]]
            )


def read_csv(path, domain):
    """Import a CSV whose trailing columns are gender, profession[, split].

    Gender is 0/1 or female/male; professions are names, assigned ids in order
    of first appearance.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty CSV")
    head, body = rows[0], rows[1:]
    has_split = head[-1] == "split"
    n_labels = 3 if has_split else 2
    if len(head) <= n_labels or head[-n_labels:][:2] != ["gender", "profession"]:
        raise FormatError(f"{path}: header must end with gender,profession[,split]")
    d = len(head) - n_labels
    names, prof_ids, vectors, gender, split = {}, [], [], [], []
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(head):
            raise IntegrityError(f"{path}:{lineno}: expected {len(head)} fields, got {len(row)}")
        try:
            vectors.append([float(v) for v in row[:d]])
        except ValueError as exc:
            raise IntegrityError(f"{path}:{lineno}: {exc}") from None
        g = row[d].strip().lower()
        gender.append(GENDER_VALUES.index(g) if g in GENDER_VALUES else int(g))
        prof_ids.append(names.setdefault(row[d + 1], len(names)))
        if has_split:
            split.append(row[d + 2])
    return EmbeddingDataset(
        vectors=np.array(vectors, dtype=np.float64).reshape(len(body), d),
        gender=gender,
        profession=prof_ids,
        domain=domain,
        profession_names=list(names),
        split=split if has_split else None,
    )


# ---------------------------------------------------------------------------
# Filtering, splitting, statistics


def filter_rare_professions(ds, min_count):
    """Drop rows whose profession occurs fewer than ``min_count`` times."""
    if min_count < 0:
        raise ValueError("min_count must be >= 0")
    counts = np.bincount(ds.profession, minlength=len(ds.profession_names))
    return ds.subset(counts[ds.profession] >= min_count)


def _largest_remainder(count, ratios):
    exact = np.asarray(ratios) * count
    sizes = np.floor(exact).astype(np.int64)
    short = count - sizes.sum()
    # stable sort keeps train < dev < test order among equal remainders
    order = np.argsort(-(exact - sizes), kind="stable")
    sizes[order[:short]] += 1
    return sizes


def split_dataset(ds, ratios=(0.65, 0.10, 0.25), seed=0):
    """Assign train/dev/test tags stratified by profession.

    Each profession's rows are shuffled with a generator seeded by ``seed`` and
    cut into contiguous slices whose sizes are the largest-remainder rounding
    of ``ratio * count``, so every per-profession split size is within one row
    of its exact share.
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.shape != (3,) or np.any(ratios <= 0) or abs(ratios.sum() - 1.0) > 1e-9:
        raise ConfigError(f"ratios must be three positive fractions summing to 1, got {ratios.tolist()}")
    rng = np.random.default_rng(seed)
    split = np.full(ds.n, "unassigned", dtype="<U10")
    for prof in np.unique(ds.profession):
        rows = np.flatnonzero(ds.profession == prof)
        if rows.size < 3:
            warnings.warn(
                f"profession {ds.profession_names[prof]!r} has {rows.size} rows, fewer than 3 splits",
                stacklevel=2,
            )
        rows = rows[rng.permutation(rows.size)]
        bounds = np.cumsum(_largest_remainder(rows.size, ratios))
        split[rows[: bounds[0]]] = "train"
        split[rows[bounds[0] : bounds[1]]] = "dev"
        split[rows[bounds[1] :]] = "test"
    out = ds.subset(np.arange(ds.n))
    out.split = split
    return out


def majority_accuracy(labels):
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("majority_accuracy of an empty label array")
    _, counts = np.unique(labels, return_counts=True)
    return counts.max() / labels.size


def describe(ds):
    """Summary statistics in the shape of a per-language corpus table."""
    female = int(np.sum(ds.gender == 0))
    return {
        "domain": ds.domain,
        "examples": ds.n,
        "female": female,
        "male": ds.n - female,
        "majority": float(majority_accuracy(ds.gender)) if ds.n else float("nan"),
        "professions": int(np.unique(ds.profession).size),
    }


# ---------------------------------------------------------------------------
# Synthetic generator


def _default_shared():
    return (2.0, 1.5, 1.0)


def _default_specific():
    return (1.0, 0.8, 0.6)


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the planted-subspace generator.

    Each row is ``mu_domain + g * sum_i a_i s_i u_i + g * sum_j b_j t_j v_j + noise``
    with ``g = 2*gender - 1``. The amplitudes ``a_i, b_j`` are 1 unless
    ``amplitude_jitter > 0``, in which case they are drawn per row and per
    direction from ``N(1, amplitude_jitter**2)``; without jitter the gender
    signal is a single mean-difference vector and a linear probe can only
    recover one direction.
    """

    dim: int = 64
    n_per_domain: int = 20000
    shared_dirs: int = 3
    specific_dirs: int = 3
    shared_strengths: tuple = field(default_factory=_default_shared)
    specific_strengths: tuple = field(default_factory=_default_specific)
    noise_sigma: float = 0.5
    domain_offset_scale: float = 1.0
    gender_balance: float = 0.5
    profession_count: int = 5
    profession_gender_skew: float = 0.3
    amplitude_jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shared_strengths", tuple(float(s) for s in self.shared_strengths))
        object.__setattr__(self, "specific_strengths", tuple(float(s) for s in self.specific_strengths))
        self.validate()

    def validate(self):
        if self.dim < 1 or self.n_per_domain < 1:
            raise ConfigError("dim and n_per_domain must be positive")
        if self.shared_dirs < 0 or self.specific_dirs < 0:
            raise ConfigError("direction counts must be non-negative")
        if self.shared_dirs + self.specific_dirs > self.dim:
            raise ConfigError(
                f"shared_dirs + specific_dirs = {self.shared_dirs + self.specific_dirs} exceeds dim {self.dim}"
            )
        for name, count in (("shared", self.shared_dirs), ("specific", self.specific_dirs)):
            strengths = np.array(getattr(self, f"{name}_strengths"))
            if strengths.size != count:
                raise ConfigError(f"{name}_strengths has {strengths.size} entries, expected {count}")
            if np.any(strengths <= 0):
                raise ConfigError(f"{name}_strengths must be strictly positive")
            if np.any(np.diff(strengths) > 0):
                raise ConfigError(f"{name}_strengths must be non-increasing")
        if not 0 < self.gender_balance < 1:
            raise ConfigError("gender_balance must lie strictly between 0 and 1")
        if self.noise_sigma < 0 or self.domain_offset_scale < 0 or self.amplitude_jitter < 0:
            raise ConfigError("noise_sigma, domain_offset_scale and amplitude_jitter must be >= 0")
        if self.profession_count < 1:
            raise ConfigError("profession_count must be >= 1")
        if not 0 <= self.profession_gender_skew < 1:
            raise ConfigError("profession_gender_skew must lie in [0, 1)")

    def to_dict(self):
        return {
            "dim": self.dim,
            "n_per_domain": self.n_per_domain,
            "shared_dirs": self.shared_dirs,
            "specific_dirs": self.specific_dirs,
            "shared_strengths": list(self.shared_strengths),
            "specific_strengths": list(self.specific_strengths),
            "noise_sigma": self.noise_sigma,
            "domain_offset_scale": self.domain_offset_scale,
            "gender_balance": self.gender_balance,
            "profession_count": self.profession_count,
            "profession_gender_skew": self.profession_gender_skew,
            "amplitude_jitter": self.amplitude_jitter,
            "seed": self.seed,
        }


@dataclass
class PlantedGroundTruth:
    shared_basis: np.ndarray
    specific_basis: dict
    domain_means: dict

    def planted_basis(self, domain):
        """Orthonormal basis of everything gender-carrying in ``domain``."""
        return np.hstack([self.shared_basis, self.specific_basis[domain]])

    def to_dict(self):
        return {
            "shared_basis": self.shared_basis.tolist(),
            "specific_basis": {k: v.tolist() for k, v in self.specific_basis.items()},
            "domain_means": {k: v.tolist() for k, v in self.domain_means.items()},
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            shared_basis=np.array(data["shared_basis"], dtype=np.float64),
            specific_basis={k: np.array(v, dtype=np.float64) for k, v in data["specific_basis"].items()},
            domain_means={k: np.array(v, dtype=np.float64) for k, v in data["domain_means"].items()},
        )


def _profession_weights(cfg):
    if cfg.profession_count == 1:
        tilt = np.zeros(1)
    else:
        tilt = np.linspace(-1.0, 1.0, cfg.profession_count)
    weights = np.vstack([1.0 - cfg.profession_gender_skew * tilt, 1.0 + cfg.profession_gender_skew * tilt])
    return weights / weights.sum(axis=1, keepdims=True)


def synth_generate(cfg, domains):
    """Generate one dataset per domain tag plus the planted ground truth.

    Specific bases of different domains are mutually orthogonal whenever
    ``shared_dirs + specific_dirs * len(domains) <= dim``; otherwise each is
    only orthogonal to the shared basis.
    """
    cfg.validate()
    domains = list(domains)
    if len(set(domains)) != len(domains) or not domains:
        raise ConfigError("domains must be a non-empty list of distinct tags")
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(domains) + 1)
    rng = np.random.default_rng(seeds[0])
    k_sh, k_sp = cfg.shared_dirs, cfg.specific_dirs
    d = cfg.dim

    joint = k_sh + k_sp * len(domains) <= d
    width = k_sh + k_sp * len(domains) if joint else k_sh
    Q, _ = np.linalg.qr(rng.standard_normal((d, max(width, 1))))
    shared = Q[:, :k_sh]
    specific = {}
    for idx, dom in enumerate(domains):
        if joint:
            specific[dom] = Q[:, k_sh + idx * k_sp : k_sh + (idx + 1) * k_sp]
        else:
            raw = rng.standard_normal((d, k_sp))
            raw -= shared @ (shared.T @ raw)
            basis, _ = np.linalg.qr(raw)
            basis -= shared @ (shared.T @ basis)
            specific[dom], _ = np.linalg.qr(basis)
    means = {}
    for dom in domains:
        offset = rng.standard_normal(d)
        means[dom] = cfg.domain_offset_scale * offset / np.linalg.norm(offset)

    s = np.array(cfg.shared_strengths)
    t = np.array(cfg.specific_strengths)
    prof_w = _profession_weights(cfg)
    names = tuple(f"prof_{i:02d}" for i in range(cfg.profession_count))
    n = cfg.n_per_domain
    datasets = {}
    for idx, dom in enumerate(domains):
        r = np.random.default_rng(seeds[idx + 1])
        gender = (r.random(n) < cfg.gender_balance).astype(np.int64)
        g = (2 * gender - 1).astype(np.float64)[:, None]
        if cfg.amplitude_jitter > 0:
            a = 1.0 + cfg.amplitude_jitter * r.standard_normal((n, k_sh))
            b = 1.0 + cfg.amplitude_jitter * r.standard_normal((n, k_sp))
        else:
            a = np.ones((n, k_sh))
            b = np.ones((n, k_sp))
        X = means[dom] + g * ((a * s) @ shared.T) + g * ((b * t) @ specific[dom].T)
        if cfg.noise_sigma > 0:
            X = X + cfg.noise_sigma * r.standard_normal((n, d))
        cdf = np.cumsum(prof_w, axis=1)
        u = r.random(n)
        profession = np.minimum((u[:, None] >= cdf[gender]).sum(axis=1), cfg.profession_count - 1)
        datasets[dom] = EmbeddingDataset(
            vectors=X, gender=gender, profession=profession, domain=dom, profession_names=names
        )
    truth = PlantedGroundTruth(shared_basis=shared, specific_basis=specific, domain_means=means)
    return [datasets[d_] for d_ in domains], truth


def check_same_dim(datasets):
    dims = {ds.dim for ds in datasets}
    if len(dims) > 1:
        first = next(iter(datasets)).dim
        for ds in datasets:
            check_dim(ds.dim, first, f"dataset {ds.domain!r}")
    return dims.pop() if dims else None
