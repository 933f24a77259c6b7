"""Command-line entry point: ``molchef <subcommand> ...``.

Exit codes: 0 success, 2 invalid input or usage, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import shlex
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import binomtest

from ..chem.descriptors import surrogate_qed
from ..chem.smiles import parse_smiles
from ..config import RunConfig, load_config, parse_config
from ..metrics import (
    NoValidRecords, frechet_embedding_distance, make_record, novelty, read_records_csv, render_report, uniqueness,
    validity, write_records_csv,
)
from ..reactions.oracle import ExternalOracle
from ..reactions.templates import predict_products
from ..search.optimize import local_optimize, random_walk
from ..search.retro import (
    RetroRegressor, format_r, main_product, retro_roundtrip_eval, retrosynthesize, train_retro_regressor,
)
from ..wae.model import MoleculeChef
from ..wae.train import reconstruction_accuracy, train
from .io import (
    build_vocab, load_weights, reachable, read_reactions, read_vocab, save_weights, write_vocab,
)
from .toy import gen_toy_dataset

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


class UsageError(ValueError):
    pass


# ------------------------------------------------------------------ helpers

def _config(args) -> RunConfig:
    config = load_config(args.config) if args.config else parse_config("")
    return config if args.seed is None else config.replace(seed=args.seed)


def _oracle(args):
    return ExternalOracle(shlex.split(args.oracle_cmd)) if getattr(args, "oracle_cmd", None) else predict_products


def _model(args, config: RunConfig) -> MoleculeChef:
    return MoleculeChef(read_vocab(args.vocab), config)


def _wae_store(args, model: MoleculeChef, config: RunConfig):
    expected = model.init_params(config.seed)
    return load_weights(args.weights, expected) if args.weights else expected


def training_targets(model: MoleculeChef, bags, oracle) -> list[float]:
    """Surrogate score of each bag's main product (0 when the oracle fails)."""
    out = []
    for bag in bags:
        result = oracle(model.vocab.bag_graphs(bag))
        out.append(0.0 if result.invalid or result.primary is None else surrogate_qed(parse_smiles(result.primary)))
    return out


def training_molecules(records) -> set[str]:
    return {s for r in records for s in r.reactants + r.products}


def _metrics_block(records, training: set[str] | None) -> dict[str, object]:
    values: dict[str, object] = {"n_samples": len(records), "n_empty": sum(r.empty for r in records),
                                 "validity": validity(records)}
    try:
        values["uniqueness"] = uniqueness(records)
        values["novelty"] = novelty(records, training) if training is not None else "NA"
    except NoValidRecords:
        values["uniqueness"] = values["novelty"] = "NA"
    values["single_product_fraction"] = (sum(len(r.valid_products) == 1 for r in records) / len(records))
    return values


def _emit(text: str, path: str | None) -> None:
    sys.stdout.write(text)
    if path:
        Path(path).write_text(text, encoding="utf-8")


# -------------------------------------------------------------- subcommands

def cmd_gen_toy(args) -> None:
    config = _config(args)
    corpus = gen_toy_dataset(config.seed, args.n_candidates, args.n_reactions, config.min_count)
    paths = corpus.write(args.out)
    for name, path in paths.items():
        print(f"{name}={path}")


def cmd_build_vocab(args) -> None:
    config = _config(args)
    records = read_reactions(args.reactions)
    min_count = config.min_count if args.min_count is None else args.min_count
    vocab = build_vocab(records, min_count)
    write_vocab(args.out, vocab)
    kept, _ = reachable(records, vocab, config.max_steps)
    print(f"vocabulary={len(vocab)} reactions={len(records)} usable_reactions={len(kept)}")


def cmd_train(args) -> None:
    config = _config(args)
    model = _model(args, config)
    _, bags = reachable(read_reactions(args.reactions), model.vocab, config.max_steps)
    if len(bags) < 2:
        raise UsageError("need at least two usable reactions to train")
    targets = training_targets(model, bags, _oracle(args))
    lines = []

    def report(entry):
        lines.append(entry.render())
        print(entry.render(), flush=True)

    store, _ = train(model, bags, targets, seed=config.seed, on_epoch=report)
    save_weights(store, args.out)
    print(f"reconstruction_accuracy={reconstruction_accuracy(model, bags, store):.6f}")
    if args.log:
        Path(args.log).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_sample(args) -> None:
    config = _config(args)
    model = _model(args, config)
    store = _wae_store(args, model, config).frozen()
    oracle = _oracle(args)
    rng = np.random.default_rng([config.seed, 4])
    z = rng.standard_normal((args.n, config.latent_dim))
    decoded = model.decode(z, store, mode="sample", rng=rng)
    records = []
    for zi, res in zip(z, decoded):
        if res.empty:
            records.append(make_record(zi, (), None))
        else:
            records.append(make_record(zi, model.vocab.bag_smiles(res.bag), oracle(model.vocab.bag_graphs(res.bag))))
    training = training_molecules(read_reactions(args.training)) if args.training else None
    values = _metrics_block(records, training)
    if args.reference:
        products = [p for r in records for p in r.valid_products]
        reference = sorted({p for r in read_reactions(args.reference) for p in r.products})
        values["frechet"] = (frechet_embedding_distance(products, reference, model.ggnn, store)
                             if products else "NA")
    if args.out:
        write_records_csv(args.out, records, training)
    _emit(render_report(values), args.report)


def cmd_eval(args) -> None:
    records = read_records_csv(args.records)
    if not records:
        raise UsageError("records file is empty")
    training = training_molecules(read_reactions(args.training)) if args.training else None
    _emit(render_report(_metrics_block(records, training)), args.report)


def sign_test_p(wins: int, losses: int) -> float:
    """One-sided sign test p-value that wins outnumber losses (ties dropped)."""
    n = wins + losses
    return 1.0 if n == 0 else float(binomtest(wins, n, 0.5, alternative="greater").pvalue)


def cmd_optimize(args) -> None:
    config = _config(args)
    model = _model(args, config)
    store = _wae_store(args, model, config)
    _, bags = reachable(read_reactions(args.reactions), model.vocab, config.max_steps)
    rng = np.random.default_rng([config.seed, 5])
    starts = [bags[i] for i in rng.choice(len(bags), size=min(args.starts, len(bags)), replace=False)]
    oracle = _oracle(args)
    rows, scores = [], []
    for i, bag in enumerate(starts):
        opt = local_optimize(model, store, bag, config.opt_step_size, config.opt_max_steps, config.opt_k, oracle)
        walk = random_walk(model, store, bag, config.walk_sigma, config.opt_max_steps, config.opt_k,
                           np.random.default_rng([config.seed, 6, i]), oracle)
        trio = (opt.start.score or 0.0, opt.best_score or 0.0, walk.best_score or 0.0)
        scores.append(trio)
        rows.append(f"{i},{opt.start.bag_smiles},{trio[0]:.6f},{trio[1]:.6f},{trio[2]:.6f}\n")
    if args.out:
        Path(args.out).write_text("start,start_bag,start_score,best_local,best_walk\n" + "".join(rows),
                                  encoding="utf-8")
    arr = np.array(scores).reshape(-1, 3)
    wins, losses = int((arr[:, 1] > arr[:, 2]).sum()), int((arr[:, 1] < arr[:, 2]).sum())
    _emit(render_report({"starts": len(rows), "mean_start": float(arr[:, 0].mean()),
                         "mean_best_local": float(arr[:, 1].mean()), "mean_best_walk": float(arr[:, 2].mean()),
                         "wins": wins, "losses": losses, "sign_test_p": sign_test_p(wins, losses)}), args.report)


def cmd_retro_train(args) -> None:
    config = _config(args)
    model = _model(args, config)
    store = _wae_store(args, model, config)
    records = read_reactions(args.reactions)
    regressor = RetroRegressor(config)
    retro_store, _, skipped = train_retro_regressor(
        regressor, model, store, [r.reactants for r in records], [main_product(r.products) for r in records],
        seed=config.seed, on_epoch=lambda e: print(e.render(), flush=True))
    save_weights(retro_store, args.out)
    print(f"skipped_unreachable={skipped}")


def _retro_parts(args, config: RunConfig):
    model = _model(args, config)
    store = _wae_store(args, model, config)
    regressor = RetroRegressor(config)
    retro_store = load_weights(args.retro_weights, regressor.init_params(config.seed))
    return model, store, regressor, retro_store


def cmd_retro(args) -> None:
    config = _config(args)
    model, store, regressor, retro_store = _retro_parts(args, config)
    if bool(args.product) == bool(args.products):
        raise UsageError("give exactly one of --product or --products")
    products = [args.product] if args.product else [
        l.strip() for l in Path(args.products).read_text(encoding="utf-8").splitlines() if l.strip()]
    for p in products:
        res = retrosynthesize(parse_smiles(p), regressor, retro_store, model, store)
        print(f"{p}\t{'EMPTY' if res.empty else '.'.join(model.vocab.bag_smiles(res.bag))}")


def cmd_roundtrip_eval(args) -> None:
    config = _config(args)
    model, store, regressor, retro_store = _retro_parts(args, config)
    oracle = _oracle(args)
    values: dict[str, object] = {}
    for name, path in (("reachable", args.reachable), ("unreachable", args.unreachable)):
        if not path:
            continue
        products = sorted({main_product(r.products) for r in read_reactions(path)})
        result = retro_roundtrip_eval(products, regressor, retro_store, model, store, oracle)
        if args.out_dir:
            Path(args.out_dir).mkdir(parents=True, exist_ok=True)
            result.write_csv(Path(args.out_dir) / f"roundtrip_{name}.csv")
        values[f"{name}_n"] = len(result.rows)
        values[f"{name}_failures"] = result.failures
        values[f"{name}_r"] = format_r(result.pearson_r)
    _emit(render_report(values), args.report)


def cmd_react(args) -> None:
    graphs = [parse_smiles(s) for s in args.bag.split(".")]
    result = _oracle(args)(graphs)
    if result.invalid:
        print(f"INVALID {result.error}")
    else:
        print(result.smiles())


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="molchef", description="reactant-bag generative model pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value configuration file (defaults if omitted)")
        p.add_argument("--seed", type=int, help="overrides the configured seed")
        p.set_defaults(func=func)
        return p

    def model_args(p, weights_required: bool = True) -> None:
        p.add_argument("--vocab", required=True)
        p.add_argument("--weights", required=weights_required, help="model weight file")

    def oracle_arg(p) -> None:
        p.add_argument("--oracle-cmd", help="external predictor command speaking the line protocol")

    p = command("gen-toy", cmd_gen_toy, "write a synthetic reaction corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-candidates", type=int, default=60)
    p.add_argument("--n-reactions", type=int, default=500)

    p = command("build-vocab", cmd_build_vocab, "reactant vocabulary from a reaction file")
    p.add_argument("--reactions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-count", type=int)

    p = command("train", cmd_train, "train the autoencoder and property head")
    p.add_argument("--reactions", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log")
    oracle_arg(p)

    p = command("sample", cmd_sample, "decode prior samples and report generation metrics")
    model_args(p, weights_required=False)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--out", help="per-record CSV")
    p.add_argument("--report")
    p.add_argument("--training", help="reaction file defining known molecules for novelty")
    p.add_argument("--reference", help="reaction file whose products anchor the Fréchet distance")
    oracle_arg(p)

    p = command("eval", cmd_eval, "metrics over a per-record CSV")
    p.add_argument("--records", required=True)
    p.add_argument("--training")
    p.add_argument("--report")

    p = command("optimize", cmd_optimize, "local optimization versus random walk")
    model_args(p)
    p.add_argument("--reactions", required=True, help="start bags are drawn from here")
    p.add_argument("--starts", type=int, default=50)
    p.add_argument("--out")
    p.add_argument("--report")
    oracle_arg(p)

    p = command("retro-train", cmd_retro_train, "train the product-to-latent regressor")
    model_args(p)
    p.add_argument("--reactions", required=True)
    p.add_argument("--out", required=True)

    p = command("retro", cmd_retro, "suggest reactants for products")
    model_args(p)
    p.add_argument("--retro-weights", required=True)
    p.add_argument("--product")
    p.add_argument("--products", help="file with one product SMILES per line")

    p = command("roundtrip-eval", cmd_roundtrip_eval, "retrosynthesis round-trip score correlation")
    model_args(p)
    p.add_argument("--retro-weights", required=True)
    p.add_argument("--reachable")
    p.add_argument("--unreachable")
    p.add_argument("--out-dir")
    p.add_argument("--report")
    oracle_arg(p)

    p = command("react", cmd_react, "run one reactant bag through the reaction engine")
    p.add_argument("--bag", required=True, help="dot-joined reactant SMILES")
    oracle_arg(p)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - surfaced as a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
