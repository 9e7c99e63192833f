"""``scrub`` command line: manifest-driven, deterministic experiment runs.

Usage::

    scrub <command> --manifest run.json [--out DIR] [--seed N]

Exit codes: 0 success, 2 invalid manifest or arguments, 3 corrupt or
inconsistent input data.
"""
import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ._serial import digest
from .dataio import (
    PlantedGroundTruth,
    SynthConfig,
    describe,
    filter_rare_professions,
    load_dataset,
    save_dataset,
    split_dataset,
    synth_generate,
)
from .errors import ConfigError, DegenerateLabelError, DimensionMismatchError, FormatError, IntegrityError
from .inlp import ConceptSubspace, run_inlp
from .linclf import TrainConfig
from .xlingual import (
    direction_similarity,
    overlap_curves,
    per_iteration_accuracy,
    probe_transfer_matrix,
    removal_transfer,
)

log = logging.getLogger("scrub")

COMMANDS = ("synth", "inlp", "transfer", "removal", "overlap", "dirsim")
EXIT_OK, EXIT_VALIDATION, EXIT_INTEGRITY = 0, 2, 3

_TOP_KEYS = {
    "command", "seed", "out", "synth", "inputs", "split", "probe", "inlp",
    "subspaces", "task", "pair", "components",
}


@dataclass
class RunManifest:
    command: str
    seed: int
    out: Path
    inputs: dict = field(default_factory=dict)
    synth_domains: list = field(default_factory=list)
    synth_cfg: SynthConfig = None
    split_ratios: tuple = (0.65, 0.10, 0.25)
    min_count: int = 0
    force_split: bool = False
    probe_cfg: TrainConfig = field(default_factory=TrainConfig)
    inlp_cfg: TrainConfig = field(default_factory=lambda: TrainConfig(loss_kind="hinge"))
    iterations: int = 100
    plateau_stop: bool = False
    subspaces: dict = field(default_factory=dict)
    task: str = "gender"
    pair: tuple = None
    components: int = 100
    digest: str = ""

    @classmethod
    def from_dict(cls, data, command, base_dir, out=None, seed=None):
        """Validate a manifest dict; every failure raises ConfigError."""
        if not isinstance(data, dict):
            raise ConfigError("manifest must be a JSON object")
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown manifest keys {sorted(unknown)}")
        if data.get("command", command) != command:
            raise ConfigError(f"manifest is for {data['command']!r}, not {command!r}")
        if seed is None:
            if "seed" not in data:
                raise ConfigError("manifest must set an explicit seed")
            seed = data["seed"]
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        out = out or data.get("out")
        if not out:
            raise ConfigError("no output directory: set 'out' or pass --out")

        def resolve(p):
            p = Path(p)
            return p if p.is_absolute() else base_dir / p

        m = cls(command=command, seed=seed, out=resolve(out))
        try:
            split = data.get("split", {})
            m.split_ratios = tuple(split.get("ratios", m.split_ratios))
            m.min_count = int(split.get("min_count", 0))
            m.force_split = bool(split.get("force", False))
            m.probe_cfg = TrainConfig.from_dict({"seed": seed, **data.get("probe", {})})
            inlp = dict(data.get("inlp", {}))
            m.iterations = int(inlp.pop("iterations", m.iterations))
            m.plateau_stop = bool(inlp.pop("plateau_stop", False))
            m.inlp_cfg = TrainConfig.from_dict({"loss_kind": "hinge", "seed": seed, **inlp.pop("train", {})})
            if inlp:
                raise ConfigError(f"unknown inlp keys {sorted(inlp)}")
            m.task = data.get("task", "gender")
            m.components = int(data.get("components", 100))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid manifest value: {exc}") from None
        if len(m.split_ratios) != 3 or abs(sum(m.split_ratios) - 1) > 1e-9 or min(m.split_ratios) <= 0:
            raise ConfigError("split.ratios must be three positive fractions summing to 1")
        if m.task not in ("gender", "profession"):
            raise ConfigError("task must be 'gender' or 'profession'")
        if m.iterations < 1 or m.components < 1 or m.min_count < 0:
            raise ConfigError("iterations and components must be >= 1, min_count >= 0")

        if command == "synth":
            synth = data.get("synth")
            if not isinstance(synth, dict) or not synth.get("domains"):
                raise ConfigError("synth command needs synth.domains")
            m.synth_domains = [str(d) for d in synth["domains"]]
            try:
                m.synth_cfg = SynthConfig(**{"seed": seed, **synth.get("config", {})})
            except TypeError as exc:
                raise ConfigError(f"invalid synth.config: {exc}") from None
        else:
            inputs = data.get("inputs")
            if not isinstance(inputs, dict) or not inputs:
                raise ConfigError(f"{command} needs an 'inputs' mapping of domain -> EMB1 path")
            m.inputs = {str(k): resolve(v) for k, v in inputs.items()}
            m.subspaces = {str(k): resolve(v) for k, v in data.get("subspaces", {}).items()}
            for what, paths in (("input", m.inputs), ("subspace", m.subspaces)):
                for dom, path in paths.items():
                    if not path.is_file():
                        raise ConfigError(f"{what} for {dom!r} not found: {path}")
            unknown_sub = set(m.subspaces) - set(m.inputs)
            if unknown_sub:
                raise ConfigError(f"subspaces given for unknown domains {sorted(unknown_sub)}")
        if command in ("overlap", "dirsim"):
            pair = data.get("pair") or list(m.inputs)[:2]
            if len(pair) != 2 or any(p not in m.inputs for p in pair):
                raise ConfigError("pair must name two domains from inputs")
            m.pair = tuple(pair)
        body = {k: v for k, v in data.items() if k != "out"}
        m.digest = digest({**body, "seed": seed})
        return m


# ---------------------------------------------------------------------------


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _write_csv(path, m, text):
    # provenance as a constant trailing column keeps the file plain CSV
    head, *rows = text.splitlines()
    lines = [f"{head},manifest_sha256", *(f"{r},{m.digest}" for r in rows)]
    _write(path, "\n".join(lines) + "\n")


def _write_json(path, m, text):
    data = json.loads(text)
    data["manifest_sha256"] = m.digest
    _write(path, json.dumps(data, indent=2) + "\n")


def _load_inputs(m):
    datasets = {}
    for dom, path in m.inputs.items():
        ds = load_dataset(path)
        if m.min_count:
            ds = filter_rare_professions(ds, m.min_count)
        if m.force_split or not ds.has_splits():
            ds = split_dataset(ds, m.split_ratios, m.seed)
        datasets[dom] = ds
    return datasets


def _subspaces(m, datasets, domains):
    out = {}
    for dom in domains:
        if dom in m.subspaces:
            out[dom] = ConceptSubspace.from_json(m.subspaces[dom].read_text())
            if out[dom].dim != datasets[dom].dim:
                raise DimensionMismatchError(f"subspace {dom!r} has dim {out[dom].dim}, data has {datasets[dom].dim}")
        else:
            ds = datasets[dom]
            log.info("running INLP on %s (%d iterations)", dom, m.iterations)
            out[dom] = run_inlp(
                ds.part("train"), ds.part("dev"), iterations=m.iterations, cfg=m.inlp_cfg,
                seed=m.seed, plateau_stop=m.plateau_stop,
            )
    return out


def cmd_synth(m):
    datasets, truth = synth_generate(m.synth_cfg, m.synth_domains)
    stats = {}
    for ds in datasets:
        raw = describe(ds)
        if m.min_count:
            ds = filter_rare_professions(ds, m.min_count)
        ds = split_dataset(ds, m.split_ratios, m.seed)
        stats[ds.domain] = {"before_filter": raw, "after_filter": describe(ds)}
        save_dataset(ds, m.out / f"{ds.domain}.emb1", provenance={"manifest_sha256": m.digest, "source": "synth"})
    payload = {"config": m.synth_cfg.to_dict(), "domains": m.synth_domains, "stats": stats, **truth.to_dict()}
    _write_json(m.out / "ground_truth.json", m, json.dumps(payload))


def cmd_inlp(m):
    datasets = _load_inputs(m)
    for dom, s in _subspaces(m, datasets, list(datasets)).items():
        _write_json(m.out / f"subspace_{dom}.json", m, s.to_json())
        rows = "".join(f"{i + 1},{float(a)!r}\n" for i, a in enumerate(s.iteration_accuracy))
        _write_csv(m.out / f"inlp_{dom}.csv", m, "iteration,dev_accuracy\n" + rows)


def cmd_transfer(m):
    datasets = _load_inputs(m)
    report = probe_transfer_matrix(list(datasets.values()), m.probe_cfg, task=m.task)
    _write_json(m.out / f"transfer_{m.task}.json", m, report.to_json())
    _write_csv(m.out / f"transfer_{m.task}.csv", m, report.to_csv())


def cmd_removal(m):
    datasets = _load_inputs(m)
    subs = _subspaces(m, datasets, list(datasets))
    report = removal_transfer(list(datasets.values()), [subs[d] for d in datasets], m.task, m.probe_cfg)
    _write_json(m.out / f"removal_{m.task}.json", m, report.to_json())
    _write_csv(m.out / f"removal_{m.task}.csv", m, report.to_csv())


def cmd_overlap(m):
    datasets = _load_inputs(m)
    a, b = m.pair
    subs = _subspaces(m, datasets, [a, b])
    report = overlap_curves(datasets[a].part("test"), subs[a], subs[b], K=m.components, seed=m.seed)
    _write_json(m.out / f"overlap_{a}_{b}.json", m, report.to_json())
    _write_csv(m.out / f"overlap_{a}_{b}.csv", m, report.to_csv())


def cmd_dirsim(m):
    datasets = _load_inputs(m)
    a, b = m.pair
    subs = _subspaces(m, datasets, [a, b])
    report = direction_similarity(subs[a], subs[b])
    _write_json(m.out / f"dirsim_{a}_{b}.json", m, report.to_json())
    _write_csv(m.out / f"dirsim_{a}_{b}.csv", m, report.to_csv())
    for src in (a, b):
        curves = per_iteration_accuracy(subs[src], datasets.values())
        doms = list(curves)
        rows = [[i + 1, *[float(curves[d][i]) for d in doms]] for i in range(len(subs[src]))]
        text = ",".join(["iteration", *doms]) + "\n" + "".join(",".join(map(repr, r)) + "\n" for r in rows)
        _write_csv(m.out / f"per_iteration_{src}.csv", m, text)


HANDLERS = {
    "synth": cmd_synth,
    "inlp": cmd_inlp,
    "transfer": cmd_transfer,
    "removal": cmd_removal,
    "overlap": cmd_overlap,
    "dirsim": cmd_dirsim,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="scrub", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--manifest", required=True, help="JSON run manifest")
    parser.add_argument("--out", help="output directory (overrides manifest 'out')")
    parser.add_argument("--seed", type=int, help="seed (overrides manifest 'seed')")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    manifest_path = Path(args.manifest)
    try:
        try:
            data = json.loads(manifest_path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read manifest: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"manifest is not valid JSON: {exc}") from None
        out = Path(args.out).resolve() if args.out else None
        m = RunManifest.from_dict(data, args.command, manifest_path.resolve().parent, out=out, seed=args.seed)
    except ConfigError as exc:
        print(f"scrub: invalid manifest: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        m.out.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](m)
    except ConfigError as exc:
        print(f"scrub: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (IntegrityError, FormatError, DimensionMismatchError, DegenerateLabelError, OSError) as exc:
        print(f"scrub: integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    log.info("wrote outputs to %s", os.fspath(m.out))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
