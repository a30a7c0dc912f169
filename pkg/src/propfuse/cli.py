"""Command-line driver for the full lifecycle.

    propfuse train            ingest IDX files, train one engine per flow,
                              store everything in a knowledgebase
    propfuse evaluate         fuse flow votes over a test set and report
                              accuracy, explainable-only vs combined
    propfuse explain          print the explainability matrix and the
                              rationale sentences for one sample
    propfuse compare-metrics  accuracy grid over every effectiveness
                              metric, explainable-only and combined

`explain` and `compare-metrics` accept --fixture with a JSON file of
externally supplied confusion counts and votes, bypassing training; see
the README for the schema.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import explain as explain_mod
from . import fusion, ingest, kb as kb_mod
from .errors import (
    CorruptKbError,
    DivergedLossError,
    KbIoError,
    MissingCountsError,
    NoVotesError,
    PropfuseError,
    SampleNotFoundError,
    UnsupportedVersionError,
)
from .inference import MlpEngine, TrainConfig, evaluate_flow
from .metrics import METRIC_IDS
from .transforms import (
    DEFAULT_PARAMS,
    EXPLAINABLE_PROPERTIES,
    MATRIX_LABELS,
    PropertyId,
    apply_transform,
    parse_property,
    transform_stack,
)

DEFAULT_TRAIN_N = 10000
DEFAULT_TEST_N = 2000
DEFAULT_SPLIT_FRACTION = 0.8

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CORRUPT_KB = 3
EXIT_DIVERGED = 4


# --- shared plumbing ---


def _parse_flow_list(text: str) -> List[PropertyId]:
    names = [part.strip() for part in text.split(",") if part.strip()]
    return [parse_property(name) for name in names]


def _flow_descriptors(
    properties: Sequence[PropertyId], include_unexplainable: bool
) -> List[fusion.FlowDescriptor]:
    props = list(properties)
    if include_unexplainable:
        props.append(PropertyId.IDENTITY)
    if not props:
        raise ValueError("flow selection is empty")
    if len(set(props)) != len(props):
        raise ValueError("duplicate property in flow selection")
    return [
        fusion.FlowDescriptor(
            flow_id=j,
            property=prop,
            x_weight=fusion.default_x_weight(prop),
            engine_ref=f"engine-{j:02d}-{prop.value}",
        )
        for j, prop in enumerate(props)
    ]


def _load_subset(images, labels, kind, n, seed, default_n) -> ingest.Dataset:
    dataset = ingest.load_dataset(images, labels, kind)
    if n is None:
        n = min(default_n, len(dataset))
    elif n > len(dataset):
        raise ValueError(f"sample limit {n} exceeds dataset size {len(dataset)}")
    return ingest.stratified_subset(dataset, n, seed)


@dataclass
class LoadedSystem:
    """A knowledgebase plus whatever the source supplied beyond it."""

    kb: kb_mod.KnowledgeBase
    engines: Dict[int, MlpEngine] = field(default_factory=dict)
    effectiveness_overrides: Dict[str, np.ndarray] = field(default_factory=dict)
    default_votes: Optional[fusion.VoteSet] = None
    replay: List[Tuple[int, fusion.VoteSet]] = field(default_factory=list)
    counts_split: str = "holdout"

    def effectiveness(self, metric_id: str) -> fusion.EffectivenessTable:
        table = kb_mod.effectiveness_table(self.kb, metric_id, self.counts_split)
        override = self.effectiveness_overrides.get(metric_id)
        if override is not None:
            values = np.where(np.isnan(override), table.values, override)
            table = fusion.EffectivenessTable(values=values, metric_id=metric_id)
        return table

    def display_scores(self, votes: fusion.VoteSet) -> Dict[int, float]:
        # Property lists read best ordered by how reliably each flow
        # recognizes the class it voted for, measured by recall.
        recall = self.effectiveness("recall")
        return {
            fid: recall.cell(fid, vote.class_id) for fid, vote in votes.items()
        }


def _load_kb_system(path, counts_split: str) -> LoadedSystem:
    knowledge = kb_mod.load(path)
    engines = {}
    for flow in knowledge.flows:
        if flow.engine_ref:
            engines[flow.flow_id] = MlpEngine.from_blob(knowledge.engines[flow.engine_ref])
    return LoadedSystem(kb=knowledge, engines=engines, counts_split=counts_split)


def _load_fixture_system(path) -> LoadedSystem:
    """Build an in-memory system from externally supplied counts and votes."""
    with open(path) as f:
        doc = json.load(f)
    class_names = tuple(doc["class_names"])
    class_index = {name: i for i, name in enumerate(class_names)}

    flows = []
    default_votes: fusion.VoteSet = {}
    j_count = len(doc["flows"])
    counts = np.zeros((j_count, len(class_names), 4))
    overrides: Dict[str, np.ndarray] = {}

    for j, spec_flow in enumerate(doc["flows"]):
        prop = parse_property(spec_flow["property"])
        x = spec_flow.get("x_weight", fusion.default_x_weight(prop))
        flows.append(
            fusion.FlowDescriptor(flow_id=j, property=prop, x_weight=x, engine_ref="")
        )
        if "vote" in spec_flow:
            default_votes[j] = fusion.FlowVote(class_id=class_index[spec_flow["vote"]])
        for name, cell in spec_flow.get("counts", {}).items():
            counts[j, class_index[name]] = [
                cell["tp"], cell["tn"], cell["fp"], cell["fn"],
            ]
        for metric_id, per_class in spec_flow.get("effectiveness", {}).items():
            overrides.setdefault(
                metric_id, np.full((j_count, len(class_names)), np.nan)
            )
            for name, value in per_class.items():
                overrides[metric_id][j, class_index[name]] = value

    replay = []
    for sample in doc.get("samples", []):
        votes = {
            j: fusion.FlowVote(class_id=class_index[v])
            for j, v in enumerate(sample["votes"])
        }
        replay.append((class_index[sample["label"]], votes))

    knowledge = kb_mod.KnowledgeBase(
        class_names=class_names,
        flows=tuple(flows),
        counts={"holdout": counts},
        dataset_fingerprint="fixture",
        config={"source": "fixture"},
    )
    return LoadedSystem(
        kb=knowledge,
        effectiveness_overrides=overrides,
        default_votes=default_votes or None,
        replay=replay,
    )


def _collect_votes(
    system: LoadedSystem, dataset: ingest.Dataset, probabilistic: bool
) -> List[fusion.VoteSet]:
    """Run every flow's transform + engine over the dataset."""
    per_flow = {}
    for flow in system.kb.flows:
        engine = system.engines.get(flow.flow_id)
        if engine is None:
            raise MissingCountsError(
                f"flow {flow.flow_id} has no trained engine; "
                "fixture systems only support vote replay"
            )
        transformed = transform_stack(flow.property, dataset.images)
        votes, scores = engine.predict_batch(transformed)
        per_flow[flow.flow_id] = (votes, scores if probabilistic else None)
    out = []
    for i in range(len(dataset)):
        vote_set = {}
        for flow_id, (votes, scores) in per_flow.items():
            vote_set[flow_id] = fusion.FlowVote(
                class_id=int(votes[i]),
                scores=scores[i] if scores is not None else None,
            )
        out.append(vote_set)
    return out


def _subset_votes(votes: fusion.VoteSet, flow_ids) -> fusion.VoteSet:
    return {fid: vote for fid, vote in votes.items() if fid in flow_ids}


def _fused_accuracy(
    vote_sets: Sequence[fusion.VoteSet],
    labels: Sequence[int],
    eff: fusion.EffectivenessTable,
    flows: Sequence[fusion.FlowDescriptor],
    probabilistic: bool,
    flow_ids=None,
) -> float:
    correct = 0
    for votes, label in zip(vote_sets, labels):
        if flow_ids is not None:
            votes = _subset_votes(votes, flow_ids)
        report = fusion.decide(votes, eff, flows, probabilistic)
        correct += report.winner.class_id == label
    return correct / len(vote_sets)


# --- train ---


def cmd_train(args) -> int:
    properties = (
        _parse_flow_list(args.flows) if args.flows else list(EXPLAINABLE_PROPERTIES)
    )
    flows = _flow_descriptors(properties, args.include_unexplainable)

    dataset = _load_subset(args.images, args.labels, args.dataset_kind,
                           args.train_n, args.seed, DEFAULT_TRAIN_N)
    fit, holdout = ingest.split(dataset, args.split_fraction, args.seed)
    print(f"training {len(flows)} flows on {len(fit)} samples "
          f"({len(holdout)} held out) from {args.images}")

    shape = (len(flows), dataset.class_count, 4)
    counts = {"train": np.zeros(shape), "holdout": np.zeros(shape)}
    engines = {}
    train_config = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.learning_rate, seed=args.seed,
    )

    for flow in flows:
        config = TrainConfig(**{**train_config.as_dict(), "seed": args.seed + flow.flow_id})
        engine = MlpEngine(
            class_count=dataset.class_count,
            config=config,
            probability_estimates=args.probabilistic,
        )
        fit_images = transform_stack(flow.property, fit.images)
        holdout_images = transform_stack(flow.property, holdout.images)
        engine.train(ingest.Dataset(fit_images, fit.labels, dataset.class_names))

        for split_name, images, labels in (
            ("train", fit_images, fit.labels),
            ("holdout", holdout_images, holdout.labels),
        ):
            per_class = evaluate_flow(
                engine, ingest.Dataset(images, labels, dataset.class_names)
            )
            for d, cell in enumerate(per_class):
                counts[split_name][flow.flow_id, d] = [cell.tp, cell.tn, cell.fp, cell.fn]

        engines[flow.engine_ref] = engine.to_blob()
        holdout_acc = (
            counts["holdout"][flow.flow_id, :, 0].sum() / max(len(holdout), 1)
        )
        print(f"  flow {flow.flow_id:2d} {MATRIX_LABELS[flow.property]:<12} "
              f"holdout accuracy {holdout_acc:6.1%}")

    config = {
        "transform_params": DEFAULT_PARAMS.as_dict(),
        "train_config": train_config.as_dict(),
        "split_fraction": args.split_fraction,
        "dataset_kind": args.dataset_kind,
        "probability_estimates": args.probabilistic,
        "auc_mode": "vote_indicator",
    }
    knowledge = kb_mod.KnowledgeBase(
        class_names=dataset.class_names,
        flows=tuple(flows),
        engines=engines,
        counts=counts,
        dataset_fingerprint=ingest.fingerprint(dataset),
        config=config,
    )
    kb_mod.save(knowledge, args.kb)
    print(f"knowledgebase written to {args.kb}")
    return EXIT_OK


# --- evaluate ---


def _flow_sets(knowledge: kb_mod.KnowledgeBase):
    all_ids = {f.flow_id for f in knowledge.flows}
    explainable = {
        f.flow_id for f in knowledge.flows if f.property is not PropertyId.IDENTITY
    }
    sets = {}
    if explainable:
        sets["E"] = explainable
    if explainable != all_ids:
        sets["E+U"] = all_ids
    return sets


def cmd_evaluate(args) -> int:
    system = _load_kb_system(args.kb, args.counts_split)
    dataset = _load_subset(args.images, args.labels, args.dataset_kind,
                           args.test_n, args.seed, DEFAULT_TEST_N)
    vote_sets = _collect_votes(system, dataset, args.probabilistic)
    eff = system.effectiveness(args.metric)
    sets = _flow_sets(system.kb)

    accuracies = {
        name: _fused_accuracy(vote_sets, dataset.labels, eff, system.kb.flows,
                              args.probabilistic, flow_ids=ids)
        for name, ids in sets.items()
    }
    print(f"metric {args.metric} on {len(dataset)} samples "
          f"(effectiveness from {args.counts_split} counts)")
    for name in ("E", "E+U"):
        if name in accuracies:
            print(f"  {name:<4} accuracy {accuracies[name]:8.4%}")
    if "E" in accuracies and "E+U" in accuracies:
        delta = accuracies["E+U"] - accuracies["E"]
        print(f"  E+U minus E: {delta:+.4%}")

    full_ids = sets.get("E+U", sets.get("E"))
    per_class_correct = np.zeros(dataset.class_count, dtype=int)
    per_class_support = np.zeros(dataset.class_count, dtype=int)
    records = []
    for i, (votes, label) in enumerate(zip(vote_sets, dataset.labels)):
        report = fusion.decide(
            _subset_votes(votes, full_ids), eff, system.kb.flows, args.probabilistic
        )
        per_class_support[label] += 1
        per_class_correct[label] += report.winner.class_id == label
        if args.out:
            records.append(explain_mod.render_records(report, dataset.class_names, i))

    print("per-class recall of the fused decision:")
    for d in range(dataset.class_count):
        if per_class_support[d]:
            print(f"  {dataset.class_names[d]:>4}: "
                  f"{per_class_correct[d] / per_class_support[d]:6.1%} "
                  f"({per_class_correct[d]}/{per_class_support[d]})")
    if args.out:
        with open(args.out, "w") as f:
            for record in records:
                f.write(json.dumps(record, sort_keys=True) + "\n")
        print(f"per-sample records written to {args.out}")
    return EXIT_OK


# --- explain ---


def _votes_for_sample(system, args) -> Tuple[fusion.VoteSet, Optional[int]]:
    if args.fixture:
        if system.default_votes is None:
            raise NoVotesError("fixture carries no default votes")
        return system.default_votes, None
    if args.images is None or args.sample_index is None:
        raise ValueError("explain needs --images/--labels/--sample-index "
                         "unless --fixture is given")
    dataset = ingest.load_dataset(args.images, args.labels, args.dataset_kind)
    if not 0 <= args.sample_index < len(dataset):
        raise SampleNotFoundError(
            f"sample index {args.sample_index} outside dataset of {len(dataset)}"
        )
    sample = dataset[args.sample_index]
    votes = {}
    for flow in system.kb.flows:
        engine = system.engines[flow.flow_id]
        transformed = apply_transform(flow.property, sample.pixels)
        prediction = engine.predict(transformed)
        votes[flow.flow_id] = fusion.FlowVote(
            class_id=prediction.class_vote,
            scores=None if prediction.discrete else prediction.scores,
        )
    return votes, sample.label


def _print_matrix(system, votes, eff, report):
    names = system.kb.class_names
    voted = sorted({v.class_id for v in votes.values()})
    flows = system.kb.flows
    x_by_flow = {f.flow_id: f.x_weight for f in flows}

    header = f"{'Flow':<6}{'Property':<14}{'Vote':<6}"
    header += "".join(f"{'E[' + names[d] + ']':>10}" for d in voted)
    header += "  |"
    header += "".join(f"{'Ex[' + names[d] + ']':>8}" for d in voted)
    print(header)
    for flow in flows:
        if flow.flow_id not in votes:
            continue
        vote = votes[flow.flow_id]
        row = f"F{flow.flow_id + 1:<5}{MATRIX_LABELS[flow.property]:<14}"
        row += f"{names[vote.class_id]:<6}"
        for d in voted:
            row += f"{eff.cell(flow.flow_id, d):>10.4f}" if d == vote.class_id else " " * 10
        row += "  |"
        for d in voted:
            row += f"{x_by_flow[flow.flow_id]:>8.1f}" if d == vote.class_id else " " * 8
        print(row)

    weights = [fusion.weight(d, votes, eff) for d in voted]
    ex_weights = []
    for d in voted:
        total = 0.0
        for fid, vote in votes.items():
            if vote.class_id == d:
                total += max(0.0, eff.cell(fid, d)) * x_by_flow[fid]
        ex_weights.append(total)
    row = f"{'Weights':<26}"
    row += "".join(f"{w:>10.4g}" for w in weights)
    row += "  |"
    row += "".join(f"{w:>8.4g}" for w in ex_weights)
    print(row)

    by_class = {d.class_id: d for d in report.ranked}
    row = f"{'Confidence/Explainability':<26}"
    row += "".join(f"{by_class[d].confidence:>10.1%}" for d in voted)
    row += "  |"
    row += "".join(f"{by_class[d].explainability:>8.1%}" for d in voted)
    print(row)


def cmd_explain(args) -> int:
    if args.fixture:
        system = _load_fixture_system(args.fixture)
    else:
        if not args.kb:
            raise ValueError("explain needs --kb or --fixture")
        system = _load_kb_system(args.kb, args.counts_split)

    votes, true_label = _votes_for_sample(system, args)
    eff = system.effectiveness(args.metric)
    report = fusion.decide(
        votes, eff, system.kb.flows,
        probabilistic=args.probabilistic,
        display_scores=system.display_scores(votes),
    )

    _print_matrix(system, votes, eff, report)
    print()
    names = system.kb.class_names
    if true_label is not None:
        print(f"true label: {names[true_label]}")
    for line in explain_mod.render(report, names):
        print(line)
    if args.out:
        record = explain_mod.render_records(
            report, names, args.sample_index if args.sample_index is not None else "fixture"
        )
        with open(args.out, "w") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")
    return EXIT_OK


# --- compare-metrics ---


def cmd_compare_metrics(args) -> int:
    if args.fixture:
        system = _load_fixture_system(args.fixture)
        if not system.replay:
            raise ValueError("fixture carries no replay samples")
        labeled_votes = system.replay
    else:
        if not args.kb:
            raise ValueError("compare-metrics needs --kb or --fixture")
        system = _load_kb_system(args.kb, args.counts_split)
        dataset = _load_subset(args.images, args.labels, args.dataset_kind,
                               args.test_n, args.seed, DEFAULT_TEST_N)
        vote_sets = _collect_votes(system, dataset, args.probabilistic)
        labeled_votes = list(zip(dataset.labels.tolist(), vote_sets))

    sets = _flow_sets(system.kb)
    if "E" not in sets:
        raise ValueError("comparison needs at least one explainable flow")
    metric_ids = [args.metric] if args.metric else list(METRIC_IDS)

    rows = []
    for metric_id in metric_ids:
        eff = system.effectiveness(metric_id)
        row = {"metric_id": metric_id}
        for name, ids in sets.items():
            votes_only = [votes for _, votes in labeled_votes]
            labels = [label for label, _ in labeled_votes]
            row[name] = _fused_accuracy(
                votes_only, labels, eff, system.kb.flows,
                args.probabilistic, flow_ids=ids,
            )
        rows.append(row)

    rows.sort(key=lambda r: (-r.get("E+U", r["E"]), -r["E"], METRIC_IDS.index(r["metric_id"])))
    has_eu = "E+U" in sets
    print(f"{'Effectiveness metric':<22}{'E':>10}" + (f"{'E+U':>10}" if has_eu else ""))
    for row in rows:
        line = f"{row['metric_id']:<22}{row['E']:>10.2%}"
        if has_eu:
            line += f"{row['E+U']:>10.2%}"
        print(line)

    if args.out:
        doc = {"samples": len(labeled_votes), "rows": rows}
        with open(args.out, "w") as f:
            json.dump(doc, f, sort_keys=True, indent=2)
        print(f"grid written to {args.out}")
    return EXIT_OK


# --- argument parsing and entry point ---


def _add_dataset_args(p, with_test_n=False):
    p.add_argument("--images", help="IDX image file")
    p.add_argument("--labels", help="IDX label file")
    p.add_argument("--dataset-kind", default="mnist",
                   choices=sorted(ingest.DATASET_CLASS_NAMES))
    if with_test_n:
        p.add_argument("--test-n", type=int, default=None,
                       help=f"stratified test subset (default min({DEFAULT_TEST_N}, all))")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="propfuse",
        description="explainable character recognition via property flows",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one engine per flow into a knowledgebase")
    _add_dataset_args(p)
    p.add_argument("--flows", help="comma-separated property names (default: all)")
    p.add_argument("--include-unexplainable", action="store_true",
                   help="add the identity flow trained on raw input")
    p.add_argument("--train-n", type=int, default=None,
                   help=f"stratified training subset (default min({DEFAULT_TRAIN_N}, all))")
    p.add_argument("--split-fraction", type=float, default=DEFAULT_SPLIT_FRACTION)
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    p.add_argument("--learning-rate", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--probabilistic", action="store_true",
                   help="expose probability estimates to fusion")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kb", required=True, help="output knowledgebase path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="fused accuracy over a test set")
    _add_dataset_args(p, with_test_n=True)
    p.add_argument("--kb", required=True)
    p.add_argument("--metric", default="epars", choices=METRIC_IDS)
    p.add_argument("--counts-split", default="holdout", choices=kb_mod.SPLITS)
    p.add_argument("--probabilistic", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write per-sample records (JSON lines)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="explainability matrix and rationale for one sample")
    _add_dataset_args(p)
    p.add_argument("--kb")
    p.add_argument("--fixture", help="JSON fixture with counts and votes")
    p.add_argument("--sample-index", type=int, default=None)
    p.add_argument("--metric", default="epars", choices=METRIC_IDS)
    p.add_argument("--counts-split", default="holdout", choices=kb_mod.SPLITS)
    p.add_argument("--probabilistic", action="store_true")
    p.add_argument("--out", help="write the structured record (JSON lines)")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("compare-metrics",
                       help="accuracy grid over all effectiveness metrics")
    _add_dataset_args(p, with_test_n=True)
    p.add_argument("--kb")
    p.add_argument("--fixture", help="JSON fixture with replay samples")
    p.add_argument("--metric", default=None, choices=METRIC_IDS,
                   help="restrict the grid to one metric")
    p.add_argument("--counts-split", default="holdout", choices=kb_mod.SPLITS)
    p.add_argument("--probabilistic", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the machine-readable grid (JSON)")
    p.set_defaults(func=cmd_compare_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivergedLossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CorruptKbError, UnsupportedVersionError, KbIoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CORRUPT_KB
    except (PropfuseError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
