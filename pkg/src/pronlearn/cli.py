"""Command-line entry point: ``pronlearn <subcommand> ...``.

Exit status is 0 on success, 1 on usage or configuration errors and 2 when a
stage fails (unreadable input, training or decoding error).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import List, Optional, Sequence

from .config import ConfigError, load_config
from .core import FormatError, read_corpus, read_lexicon, write_corpus, write_lexicon, write_text
from .evaluation import compare_dictionaries, evaluate_lexicon
from .g2p import G2pError, apply_g2p, fine_tune, load_model, save_model, tagged, train_g2p
from .lexlearn import Topology, accept_threshold, format_harvest, learn_lexicon, save_emissions
from .phonelm import load_lm, perplexity, save_lm, train_lm
from .pipeline import StageError, render_table, run_iterations, run_pipeline, run_seed_sweep, tsv
from .recognizer import DecodeConfig, NoiseModel, decode_corpus
from .synthlang import SynthSpec, generate_language, split_lexicon, write_language

EXIT_USAGE = 1
EXIT_STAGE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _pair(text: str):
    tag, _, path = text.partition("=")
    if not tag or not path:
        raise argparse.ArgumentTypeError(f"expected TAG=PATH, got {text!r}")
    return tag, path


def _emit(args, obj, headers: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(obj, indent=2, sort_keys=True))
    elif getattr(args, "tsv", False):
        sys.stdout.write(tsv(headers, rows))
    else:
        sys.stdout.write(render_table(headers, rows))


def _add_format(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--json", action="store_true", help="machine-readable JSON output")
    g.add_argument("--tsv", action="store_true", help="TSV output")


# ---------------------------------------------------------------- subcommands


def cmd_synth_gen(args) -> int:
    spec = SynthSpec(n_graphemes=args.n_graphemes, n_phonemes=args.n_phonemes, n_digraph_rules=args.n_digraph_rules,
                     irregularity_rate=args.irregularity_rate, vocab_size=args.vocab_size,
                     zipf_exponent=args.zipf_exponent, sentence_length=tuple(args.sentence_length),
                     n_sentences=args.n_sentences, seed=args.seed, language_tag=args.tag)
    try:
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    lang = generate_language(spec)
    paths = write_language(lang, args.out)
    if args.seed_sizes:
        split = split_lexicon(lang.gold, lang.corpus, args.seed_sizes, args.test_fraction, args.seed)
        for size, lex in split.seeds.items():
            write_lexicon(lex, os.path.join(args.out, f"seed_{size}.lex"))
        write_lexicon(split.test, os.path.join(args.out, "test.lex"))
    print(f"wrote {len(lang.gold)} words, {len(lang.corpus.sentences)} sentences to {args.out}")
    for name in sorted(paths):
        print(f"  {name}\t{paths[name]}")
    return 0


def cmd_train_g2p(args) -> int:
    target = tagged(read_lexicon(args.lexicon), args.tag)
    if args.pretrain:
        pre = [e for tag, path in args.pretrain for e in tagged(read_lexicon(path), tag)]
        model = fine_tune(pre, target, args.lam, order=args.order, em_iters=args.em_iters, seed=args.seed)
    else:
        model = train_g2p(target, order=args.order, em_iters=args.em_iters, seed=args.seed)
    save_model(model, args.out)
    print(f"{len(model.graphones)} graphones, order {model.order} -> {args.out}")
    return 0


def _vocabulary(args) -> List[str]:
    if args.corpus:
        return read_corpus(args.corpus).vocabulary()
    with open(args.words, encoding="utf-8") as f:
        return [w.strip() for w in f if w.strip()]


def cmd_apply_g2p(args) -> int:
    lex, skipped = apply_g2p(load_model(args.model), args.tag, _vocabulary(args), args.beam)
    write_lexicon(lex, args.out)
    if args.skipped:
        write_text(args.skipped, "".join(w + "\n" for w in skipped))
    print(f"{len(lex)} words pronounced, {len(skipped)} skipped -> {args.out}")
    return 0


def cmd_train_lm(args) -> int:
    corpus = read_corpus(args.corpus)
    if args.lexicon:
        lex = read_lexicon(args.lexicon)
        seqs = [tuple(p for w in s.words for p in lex.pron(w))
                for s in corpus.sentences if all(w in lex for w in s.words)]
    else:
        if any(s.phones is None for s in corpus.sentences):
            raise UsageError("corpus has sentences without phones; pass --lexicon to build transcripts")
        seqs = [s.phones for s in corpus.sentences]
    lm = train_lm(seqs, args.order)
    save_lm(lm, args.out)
    print(f"order-{lm.order} LM on {len(seqs)} sentences, perplexity {perplexity(lm, seqs):.3f} -> {args.out}")
    return 0


def cmd_decode(args) -> int:
    corpus = read_corpus(args.corpus)
    if any(s.phones is None for s in corpus.sentences):
        raise StageError("decode", ValueError("every sentence needs gold phones"))
    inventory = sorted({p for s in corpus.sentences for p in s.phones})
    nm = NoiseModel(inventory, args.p_sub, args.p_ins, args.p_del, args.seed)
    out = decode_corpus(nm, DecodeConfig(load_lm(args.lm), args.n_candidates), corpus)
    write_corpus(out, args.out)
    print(f"decoded {len(out.sentences)} sentences -> {args.out}")
    return 0


def cmd_learn_lexicon(args) -> int:
    corpus = read_corpus(args.corpus)
    topo = Topology(*args.topology) if args.topology else None
    res, aligns, counts = learn_lexicon(corpus, args.max_iters, args.tol, topo)
    os.makedirs(args.out_dir, exist_ok=True)
    save_emissions(res.table, res.topology, os.path.join(args.out_dir, "emissions.txt"))
    write_text(os.path.join(args.out_dir, "harvest.tsv"), format_harvest(counts))
    lm = load_lm(args.lm) if args.lm else None
    rows = []
    for k in args.k:
        lex = accept_threshold(counts, k, lm)
        write_lexicon(lex, os.path.join(args.out_dir, f"learned_k{k}.lex"))
        rows.append([str(k), str(len(lex))])
    print(f"EM iterations {len(res.loglik)}, skipped {len(res.skipped)}, "
          f"unaligned {sum(a is None for a in aligns)} of {len(corpus.sentences)} sentences")
    sys.stdout.write(render_table(["k", "num_words"], rows))
    return 0


def cmd_eval(args) -> int:
    r = evaluate_lexicon(read_lexicon(args.hyp), read_lexicon(args.ref), args.missing)
    cols = ["per", "wer", "num_words", "total_ref_phones", "total_edits", "missing"]
    _emit(args, r.as_dict(), cols, [[f"{r.per:.6f}", f"{r.wer:.6f}", str(r.num_words), str(r.total_ref_phones),
                                     str(r.total_edits), str(r.missing)]])
    return 0


def cmd_compare(args) -> int:
    r = compare_dictionaries(read_lexicon(args.a), read_lexicon(args.b), read_lexicon(args.ref))
    cols = ["num_words", "better", "worse", "same"]
    row = [str(r.num_words)] + [f"{getattr(r, c)} ({r.pct(getattr(r, c)):.2f}%)" for c in cols[1:]]
    if args.tsv:
        row = [str(r.num_words)] + [str(getattr(r, c)) for c in cols[1:]]
    _emit(args, r.as_dict(), cols, [row])
    return 0


def _load_cfg(args):
    cfg = load_config(args.config)
    if args.run_dir:
        cfg.run_dir = os.path.abspath(args.run_dir)
    return cfg


def _print_reports(run_dir: str, names: Sequence[str]) -> None:
    for name in names:
        path = os.path.join(run_dir, "reports", name + ".txt")
        if os.path.exists(path):
            with open(path, encoding="utf-8") as f:
                print(f"== {name}")
                sys.stdout.write(f.read())
    print(f"manifest: {os.path.join(run_dir, 'manifest.json')}")


def cmd_pipeline(args) -> int:
    cfg = _load_cfg(args)
    run_pipeline(cfg)
    _print_reports(cfg.run_dir, ["table1", "table2"])
    return 0


def cmd_iterate(args) -> int:
    cfg = _load_cfg(args)
    if args.iterations is not None:
        cfg.experiment.iterations = args.iterations
    cfg.validate()
    run_iterations(cfg)
    _print_reports(cfg.run_dir, ["iterations"] if cfg.experiment.iterations > 1 else ["table1", "table2"])
    return 0


def cmd_sweep_seeds(args) -> int:
    cfg = _load_cfg(args)
    if args.sizes:
        cfg.data.seed_sizes = tuple(args.sizes)
    cfg.validate()
    run_seed_sweep(cfg)
    _print_reports(cfg.run_dir, ["seed_sweep"])
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pronlearn", description="Learn pronunciations from decoded phone streams to improve a G2P.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    s = sub.add_parser("synth-gen", help="generate a synthetic language")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-graphemes", type=int, default=20)
    s.add_argument("--n-phonemes", type=int, default=24)
    s.add_argument("--n-digraph-rules", type=int, default=5)
    s.add_argument("--irregularity-rate", type=float, default=0.05)
    s.add_argument("--vocab-size", type=int, default=2000)
    s.add_argument("--zipf-exponent", type=float, default=1.1)
    s.add_argument("--sentence-length", type=int, nargs=2, default=[3, 10], metavar=("MIN", "MAX"))
    s.add_argument("--n-sentences", type=int, default=20000)
    s.add_argument("--tag", default="syn", help="language tag written to the corpus header")
    s.add_argument("--seed-sizes", type=_int_list, help="also write nested seed_N.lex files and test.lex")
    s.add_argument("--test-fraction", type=float, default=0.2)
    s.set_defaults(func=cmd_synth_gen)

    s = sub.add_parser("train-g2p", help="train a graphone G2P model")
    s.add_argument("--lexicon", required=True)
    s.add_argument("--tag", required=True, help="language tag of the lexicon")
    s.add_argument("--out", required=True)
    s.add_argument("--order", type=int, default=3)
    s.add_argument("--em-iters", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--pretrain", type=_pair, action="append", metavar="TAG=PATH",
                   help="extra tagged lexicon; the target lexicon is then weighted by --lambda")
    s.add_argument("--lambda", dest="lam", type=float, default=5.0)
    s.set_defaults(func=cmd_train_g2p)

    s = sub.add_parser("apply-g2p", help="pronounce a vocabulary")
    s.add_argument("--model", required=True)
    s.add_argument("--tag", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--corpus", help="pronounce this corpus's vocabulary")
    g.add_argument("--words", help="file with one word per line")
    s.add_argument("--out", required=True)
    s.add_argument("--beam", type=int, default=8)
    s.add_argument("--skipped", help="write words with unknown graphemes here")
    s.set_defaults(func=cmd_apply_g2p)

    s = sub.add_parser("train-lm", help="train a phone n-gram LM")
    s.add_argument("--corpus", required=True)
    s.add_argument("--lexicon", help="build transcripts by dictionary lookup instead of corpus phones")
    s.add_argument("--order", type=int, default=5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_lm)

    s = sub.add_parser("decode", help="simulate LM-constrained phone recognition")
    s.add_argument("--corpus", required=True, help="corpus with gold phones")
    s.add_argument("--lm", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--p-sub", type=float, default=0.08)
    s.add_argument("--p-ins", type=float, default=0.02)
    s.add_argument("--p-del", type=float, default=0.02)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-candidates", type=int, default=4)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("learn-lexicon", help="align decoded phones to words and harvest pronunciations")
    s.add_argument("--corpus", required=True, help="decoded corpus")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--k", type=_int_list, default=[1, 2, 4, 6, 8], help="acceptance thresholds")
    s.add_argument("--lm", help="phone LM for breaking modal-count ties")
    s.add_argument("--max-iters", type=int, default=30)
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--topology", type=float, nargs=5, metavar=("LOOP", "ADV", "SKIP", "ENTER0", "ENTER1"))
    s.set_defaults(func=cmd_learn_lexicon)

    s = sub.add_parser("eval", help="PER/WER of a lexicon against a reference")
    s.add_argument("--hyp", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--missing", choices=["skip", "all_deleted"], default="skip")
    _add_format(s)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("compare", help="better/worse/same counts of lexicon A vs B against a reference")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--ref", required=True)
    _add_format(s)
    s.set_defaults(func=cmd_compare)

    for name, func, helptext in (("pipeline", cmd_pipeline, "run the full single-pass pipeline"),
                                 ("iterate", cmd_iterate, "iterative self-training at k=1"),
                                 ("sweep-seeds", cmd_sweep_seeds, "one pipeline per seed-lexicon size")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True, help="INI config file")
        s.add_argument("--run-dir", help="override [run] dir")
        if name == "iterate":
            s.add_argument("--iterations", type=int)
        if name == "sweep-seeds":
            s.add_argument("--sizes", type=_int_list)
        s.set_defaults(func=func)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"pronlearn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"pronlearn: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (FormatError, G2pError, OSError, ValueError) as exc:
        print(f"pronlearn: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
