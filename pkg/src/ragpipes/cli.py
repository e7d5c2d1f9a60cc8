"""Command-line driver: index, augment, lora verify, run, eval, compare.

The config file (JSON or TOML) is the single source of pipeline truth;
flags override individual keys 1:1. Every artifact-producing subcommand
writes a ``<artifact>.manifest.json`` next to its output recording the
config snapshot, input digests, template version, adapter digest, tool
version, seed, and timestamp. Diagnostics go to stderr; data goes to
stdout or the ``--out`` path. Exit codes: 0 success, 1 validation or
configuration error, 2 I/O or remote failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .augmentation import AugmentationConfig, AugmentationReport, augment_index
from .datasets import (
    DatasetKind,
    EvalExample,
    load_corpus_jsonl,
    load_examples_jsonl,
    load_pubmedqa,
    load_twowiki,
    sample_examples,
)
from .embedding import EmbedderKind, EmbedderSpec
from .errors import ConfigError, FormatError, LoadError, RagError, ValidationError
from .evaluation import MetricsReport, aggregate, compare_reports, score_run
from .generation import GeneratorKind, GeneratorSpec
from .index import build_index, load_index, save_index
from .lora import (
    ScalingMode,
    load_adapter,
    load_adapter_mode,
    load_layer,
    lora_forward,
    merge_adapter,
)
from .pipelines import (
    CotPolicy,
    PipelineConfig,
    PipelineVariant,
    run_batch,
    save_traces_jsonl,
    load_traces_jsonl,
    validate_config,
)
from .prompting import PromptTemplate, builtin_template, load_template

logger = logging.getLogger("ragpipes")

_CONFIG_KEYS = {
    "top_k", "single_hop_cot", "dataset_kind", "template", "embedder",
    "generator", "adapter_path", "concurrency", "seed",
}

_DATASET_LOADERS = {
    "pubmedqa": load_pubmedqa,
    "twowiki": load_twowiki,
    "jsonl": load_examples_jsonl,
}


def _sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_config_file(path: str | Path) -> dict:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".toml":
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            data = tomllib.loads(raw.decode("utf-8"))
        except Exception as exc:
            raise ConfigError(f"{path}: bad TOML: {exc}") from exc
    else:
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: bad JSON: {exc}") from exc
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown config keys: {sorted(unknown)}")
    return data


def _resolve_template(name_or_path: str) -> PromptTemplate:
    if name_or_path.endswith(".txt") or "/" in name_or_path:
        return load_template(name_or_path)
    return builtin_template(name_or_path)


def _embedder_from_config(cfg: dict, default_dim: int | None = None) -> EmbedderSpec:
    section = cfg.get("embedder", {})
    kind = {"deterministic": EmbedderKind.DETERMINISTIC_TEST, "http": EmbedderKind.REMOTE_HTTP}.get(
        section.get("kind", "deterministic")
    )
    if kind is None:
        raise ConfigError(f"unknown embedder kind {section.get('kind')!r}")
    dim = section.get("dim", default_dim)
    if dim is None:
        raise ConfigError("embedder dim is required (no default exists)")
    return EmbedderSpec(
        kind=kind,
        dim=int(dim),
        endpoint=section.get("endpoint"),
        model_name=section.get("model_name"),
        timeout=float(section.get("timeout", 30.0)),
    )


def _generator_from_config(cfg: dict, config_dir: Path) -> GeneratorSpec:
    section = cfg.get("generator", {})
    kind_name = section.get("kind", "echo")
    kind = {
        "echo": GeneratorKind.STUB_ECHO,
        "scripted": GeneratorKind.STUB_SCRIPTED,
        "http": GeneratorKind.REMOTE_HTTP,
    }.get(kind_name)
    if kind is None:
        raise ConfigError(f"unknown generator kind {kind_name!r}")
    script: dict[str, str] = {}
    default = section.get("script_default")
    if kind is GeneratorKind.STUB_SCRIPTED:
        script_path = section.get("script_path")
        if not script_path:
            raise ConfigError("scripted generator requires generator.script_path")
        script_file = Path(script_path)
        if not script_file.is_absolute():
            script_file = config_dir / script_file
        try:
            payload = json.loads(script_file.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read script file {script_file}: {exc}") from exc
        script = dict(payload.get("responses", {}))
        if default is None:
            default = payload.get("default")
    return GeneratorSpec(
        kind=kind,
        endpoint=section.get("endpoint"),
        model_name=section.get("model_name"),
        max_tokens=int(section.get("max_tokens", 256)),
        temperature=float(section.get("temperature", 0.0)),
        timeout=float(section.get("timeout", 60.0)),
        script=script,
        script_default=default,
    )


def _write_manifest(
    artifact: Path,
    args: argparse.Namespace,
    config_snapshot: dict,
    inputs: dict[str, str],
    template_version: int | None = None,
    adapter_digest: str | None = None,
) -> None:
    manifest = {
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": getattr(args, "seed", None),
        "config": config_snapshot,
        "inputs": inputs,
        "template_version": template_version,
        "adapter_digest": adapter_digest,
    }
    path = Path(str(artifact) + ".manifest.json")
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _load_examples(path: str, kind_name: str) -> list[EvalExample]:
    loader = _DATASET_LOADERS.get(kind_name)
    if loader is None:
        raise ConfigError(f"unknown dataset kind {kind_name!r} (use pubmedqa/twowiki/jsonl)")
    return loader(path)


def _report_dataset_kind(examples: list[EvalExample]) -> DatasetKind:
    kinds = {ex.dataset for ex in examples}
    return kinds.pop() if len(kinds) == 1 else DatasetKind.OTHER


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_index_build(args, cfg: dict, config_dir: Path) -> int:
    corpus = load_corpus_jsonl(args.corpus)
    embedder = _embedder_from_config(cfg, default_dim=args.dim)
    if args.dim is not None:
        embedder = replace(embedder, dim=args.dim)
    index = build_index(corpus, embedder, name=args.name or corpus.name)
    save_index(index, args.out)
    _write_manifest(
        Path(args.out), args,
        {"embedder": {"kind": embedder.kind.value, "dim": embedder.dim}},
        {str(args.corpus): _sha256(args.corpus)},
    )
    print(f"indexed {len(index)} documents into {args.out} (dim {index.dim})", file=sys.stderr)
    return 0


def _cmd_augment(args, cfg: dict, config_dir: Path) -> int:
    index = load_index(args.index)
    corpus = load_corpus_jsonl(args.corpus)
    preserve: tuple[str, ...] = ()
    if args.preserve_terms:
        lines = Path(args.preserve_terms).read_text(encoding="utf-8").splitlines()
        preserve = tuple(t.strip() for t in lines if t.strip())
    generator = _generator_from_config(cfg, config_dir)
    embedder = _embedder_from_config(cfg, default_dim=index.dim)
    aug_config = AugmentationConfig(
        rewrites_per_doc=args.rewrites,
        qa_pairs_per_doc=args.qa,
        rewriter=generator,
        preserve_terms=preserve,
    )
    report = AugmentationReport()
    augmented = augment_index(index, corpus, aug_config, embedder, report)
    save_index(augmented, args.out)
    inputs = {str(args.index): _sha256(args.index), str(args.corpus): _sha256(args.corpus)}
    if args.preserve_terms:
        inputs[str(args.preserve_terms)] = _sha256(args.preserve_terms)
    _write_manifest(
        Path(args.out), args,
        {"rewrites_per_doc": args.rewrites, "qa_pairs_per_doc": args.qa,
         "generator": generator.kind.value},
        inputs,
    )
    print(json.dumps(report.to_dict(), sort_keys=True))
    print(
        f"augmented index: {len(index)} -> {len(augmented)} entries, saved to {args.out}",
        file=sys.stderr,
    )
    return 0


def _cmd_lora_verify(args, cfg: dict, config_dir: Path) -> int:
    adapter = load_adapter(args.adapter)
    mode = load_adapter_mode(args.adapter)
    layer = load_layer(args.layer)
    rng = np.random.RandomState(args.seed or 0)
    failures = []

    def check(label: str, ok: bool):
        print(f"  {'ok  ' if ok else 'FAIL'} {label}")
        if not ok:
            failures.append(label)

    print(f"adapter: d={adapter.d} k={adapter.k} r={adapter.rank} "
          f"alpha={adapter.alpha} mode={mode.name}")
    if (adapter.d, adapter.k) != (layer.d, layer.k):
        print(
            f"error: adapter shape ({adapter.d}, {adapter.k}) does not compose "
            f"with layer shape ({layer.d}, {layer.k})",
            file=sys.stderr,
        )
        return 1
    dense = layer.W.astype(np.float64)
    for check_mode in (mode, ScalingMode.UNIT, ScalingMode.ALPHA_OVER_RANK):
        s = 1.0 if check_mode is ScalingMode.UNIT else adapter.alpha / adapter.rank
        target = dense + s * adapter.A.astype(np.float64) @ adapter.B.astype(np.float64)
        merged = merge_adapter(layer, adapter, check_mode)
        worst_fwd = 0.0
        worst_merge = 0.0
        for _ in range(100):
            x = rng.standard_normal(layer.k)
            via_adapter = lora_forward(x, layer, adapter, check_mode)
            worst_fwd = max(worst_fwd, float(np.max(np.abs(via_adapter - target @ x))))
            worst_merge = max(worst_merge, float(np.max(np.abs(merged.forward(x) - via_adapter))))
        check(f"{check_mode.name}: bottleneck forward matches dense (max err {worst_fwd:.2e})",
              worst_fwd < 1e-5)
        check(f"{check_mode.name}: merge-then-forward matches adapter forward "
              f"(max err {worst_merge:.2e})", worst_merge < 1e-5)
    if failures:
        print(f"verification FAILED: {len(failures)} checks", file=sys.stderr)
        return 1
    print("all checks passed")
    return 0


def _cmd_run(args, cfg: dict, config_dir: Path) -> int:
    index = load_index(args.index)
    examples = _load_examples(args.dataset, args.dataset_kind or cfg.get("dataset_kind", "jsonl"))
    if not examples:
        raise ValidationError(f"{args.dataset} contains no examples")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    if args.sample is not None:
        examples = sample_examples(examples, args.sample, seed)

    single_hop = bool(cfg.get("single_hop_cot", False))
    if args.cot == "on":
        single_hop = True
    elif args.cot == "off":
        single_hop = False
    template = _resolve_template(args.template or cfg.get("template", "qa_default"))
    generator = _generator_from_config(cfg, config_dir)
    embedder = _embedder_from_config(cfg, default_dim=index.dim)
    adapter_path = args.adapter or cfg.get("adapter_path")
    config = PipelineConfig(
        variant=PipelineVariant(args.variant),
        top_k=args.top_k if args.top_k is not None else int(cfg.get("top_k", 5)),
        cot_policy=CotPolicy(single_hop=single_hop),
        template=template,
        index=index,
        embedder=embedder,
        generator=generator,
        adapter_path=str(adapter_path) if adapter_path else None,
        dataset=_report_dataset_kind(examples),
        concurrency=args.concurrency or int(cfg.get("concurrency", 1)),
    )
    validate_config(config)
    started = time.perf_counter()
    results = run_batch(examples, config)
    elapsed = time.perf_counter() - started
    save_traces_jsonl(results, args.out)
    errors = sum(1 for _, t in results if t.error is not None)
    stage_totals: dict[str, float] = {}
    for _, trace in results:
        for stage, seconds in trace.timings.items():
            stage_totals[stage] = stage_totals.get(stage, 0.0) + seconds
    if stage_totals:
        summary = ", ".join(f"{k} {v:.3f}s" for k, v in sorted(stage_totals.items()))
        print(f"stage totals: {summary}", file=sys.stderr)
    inputs = {str(args.dataset): _sha256(args.dataset), str(args.index): _sha256(args.index)}
    adapter_digest = _sha256(adapter_path) if adapter_path else None
    _write_manifest(
        Path(args.out), args,
        {
            "variant": config.variant.value,
            "top_k": config.top_k,
            "single_hop_cot": single_hop,
            "template": template.name,
            "embedder": {"kind": embedder.kind.value, "dim": embedder.dim},
            "generator": generator.kind.value,
            "adapter_path": config.adapter_path,
            "concurrency": config.concurrency,
            "sample": args.sample,
        },
        inputs,
        template_version=template.version,
        adapter_digest=adapter_digest,
    )
    print(
        f"ran {len(results)} examples ({errors} errors) in {elapsed:.2f}s -> {args.out}",
        file=sys.stderr,
    )
    return 0


def _cmd_eval(args, cfg: dict, config_dir: Path) -> int:
    traces = load_traces_jsonl(args.traces)
    examples = _load_examples(args.dataset, args.dataset_kind or cfg.get("dataset_kind", "jsonl"))
    by_id = {ex.id: ex for ex in examples}
    paired = []
    for trace in traces:
        example = by_id.get(trace.example_id)
        if example is None:
            raise ValidationError(
                f"trace example id {trace.example_id!r} not found in {args.dataset}"
            )
        paired.append((example, trace))
    scored = score_run(paired)
    report = aggregate(scored, _report_dataset_kind([ex for ex, _ in paired]))
    report_json = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    if args.report:
        Path(args.report).write_text(report_json, encoding="utf-8")
        _write_manifest(
            Path(args.report), args, {},
            {str(args.traces): _sha256(args.traces), str(args.dataset): _sha256(args.dataset)},
        )
        print(f"evaluated {report.n} traces -> {args.report}", file=sys.stderr)
    else:
        sys.stdout.write(report_json)
    return 0


def _cmd_compare(args, cfg: dict, config_dir: Path) -> int:
    report_a = MetricsReport.from_dict(json.loads(Path(args.a).read_text(encoding="utf-8")))
    report_b = MetricsReport.from_dict(json.loads(Path(args.b).read_text(encoding="utf-8")))
    diff = compare_reports(report_a, report_b)
    if args.json:
        print(json.dumps(diff.to_dict(), sort_keys=True, indent=2))
    else:
        print(diff.render())
    return 0


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ragpipes",
        description="Retrieval-augmented generation pipelines, offline-testable end to end.",
    )
    parser.add_argument("--version", action="version", version=f"ragpipes {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or TOML config file")
    common.add_argument("--verbose", action="store_true", help="debug logging to stderr")
    common.add_argument("--seed", type=int, default=None, help="seed for sampling")
    common.add_argument("--concurrency", type=int, default=None, help="parallel examples")

    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="index operations")
    index_sub = p_index.add_subparsers(dest="index_command", required=True)
    p_build = index_sub.add_parser("build", parents=[common], help="embed a corpus")
    p_build.add_argument("--corpus", required=True)
    p_build.add_argument("--out", required=True)
    p_build.add_argument("--dim", type=int, default=None)
    p_build.add_argument("--name", default=None)
    p_build.set_defaults(func=_cmd_index_build)

    p_aug = sub.add_parser("augment", parents=[common],
                           help="add rewrites and synthetic-QA pseudo-queries to an index")
    p_aug.add_argument("--index", required=True)
    p_aug.add_argument("--corpus", required=True)
    p_aug.add_argument("--out", required=True)
    p_aug.add_argument("--rewrites", type=int, default=1)
    p_aug.add_argument("--qa", type=int, default=1)
    p_aug.add_argument("--preserve-terms", default=None)
    p_aug.set_defaults(func=_cmd_augment)

    p_lora = sub.add_parser("lora", help="adapter operations")
    lora_sub = p_lora.add_subparsers(dest="lora_command", required=True)
    p_verify = lora_sub.add_parser("verify", parents=[common],
                                   help="check adapter/layer equivalence properties")
    p_verify.add_argument("--adapter", required=True)
    p_verify.add_argument("--layer", required=True)
    p_verify.set_defaults(func=_cmd_lora_verify)

    p_run = sub.add_parser("run", parents=[common], help="run a pipeline over a dataset")
    p_run.add_argument("--variant", required=True, choices=["standard", "da", "prag"])
    p_run.add_argument("--dataset", required=True)
    p_run.add_argument("--dataset-kind", choices=sorted(_DATASET_LOADERS), default=None)
    p_run.add_argument("--index", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--top-k", type=int, default=None)
    p_run.add_argument("--cot", choices=["on", "off", "auto"], default="auto")
    p_run.add_argument("--template", default=None)
    p_run.add_argument("--adapter", default=None)
    p_run.add_argument("--sample", type=int, default=None)
    p_run.set_defaults(func=_cmd_run)

    p_eval = sub.add_parser("eval", parents=[common], help="score traces against gold answers")
    p_eval.add_argument("--traces", required=True)
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--dataset-kind", choices=sorted(_DATASET_LOADERS), default=None)
    p_eval.add_argument("--report", default=None)
    p_eval.set_defaults(func=_cmd_eval)

    p_cmp = sub.add_parser("compare", parents=[common], help="diff two metric reports")
    p_cmp.add_argument("--a", required=True)
    p_cmp.add_argument("--b", required=True)
    p_cmp.add_argument("--json", action="store_true")
    p_cmp.set_defaults(func=_cmd_compare)
    return parser


def dispatch(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors; map usage to 1
        return 0 if exc.code == 0 else 1
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    cfg: dict = {}
    config_dir = Path.cwd()
    try:
        if getattr(args, "config", None):
            cfg = _load_config_file(args.config)
            config_dir = Path(args.config).resolve().parent
        return args.func(args, cfg, config_dir)
    except (ValidationError, LoadError, ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
