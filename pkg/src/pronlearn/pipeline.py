"""Staged, resumable pronunciation-learning experiments.

Every stage writes its artifacts under the run directory and a stamp holding
a key derived from its parameters and the digests of its input files.  A stage
whose key and output digests still match is skipped, so rerunning an unchanged
config recomputes nothing.  Wall-clock timings go to ``run.log`` only, which
keeps ``manifest.json`` byte-identical across reruns.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import asdict
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import PipelineConfig, format_config
from .core import Corpus, Lexicon, read_corpus, read_lexicon, write_corpus, write_lexicon, write_text
from .evaluation import compare_dictionaries, evaluate_lexicon, relative_reduction
from .g2p import G2pModel, apply_g2p, fine_tune, load_model, save_model, tagged, train_g2p
from .lexlearn import (Topology, accept_threshold, align_corpus, em_train, format_harvest, harvest,
                       init_emissions, parse_harvest, pool_with_seed, save_emissions)
from .phonelm import PhoneLm, load_lm, save_lm, train_lm
from .recognizer import DecodeConfig, NoiseModel, decode_corpus
from .synthlang import format_rules, generate_language, split_lexicon

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class RunDir:
    """Run directory with content-hash stage stamps."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(os.path.join(root, ".stages"), exist_ok=True)
        self.stages: Dict[str, Dict[str, str]] = {}
        self.recomputed: List[str] = []
        self._cache: Dict[Tuple[str, str], object] = {}

    def path(self, rel: str) -> str:
        return os.path.join(self.root, rel)

    def _stamp_path(self, name: str) -> str:
        return os.path.join(self.root, ".stages", name.replace("/", "__") + ".json")

    def _digests(self, rels: Sequence[str]) -> Optional[Dict[str, str]]:
        out = {}
        for rel in rels:
            p = self.path(rel)
            if not os.path.exists(p):
                return None
            out[rel] = file_digest(p)
        return out

    def stage(self, name: str, params: Dict, inputs: Sequence[str], outputs: Sequence[str],
              fn: Callable[[], None]) -> None:
        """Run ``fn`` unless a stamp shows identical params, inputs and outputs."""
        in_digests = self._digests(inputs)
        if in_digests is None:
            raise StageError(name, FileNotFoundError(f"missing inputs for {name}"))
        key = hashlib.sha256(_dump_json({"stage": name, "params": params, "inputs": in_digests}).encode()).hexdigest()
        stamp_path = self._stamp_path(name)
        if os.path.exists(stamp_path):
            with open(stamp_path, encoding="utf-8") as f:
                stamp = json.load(f)
            if stamp.get("key") == key and self._digests(outputs) == stamp.get("outputs"):
                self.stages[name] = stamp["outputs"]
                self._log(f"{name}\tskipped")
                return
        for rel in outputs:
            os.makedirs(os.path.dirname(self.path(rel)), exist_ok=True)
        start = time.time()
        try:
            fn()
        except Exception as exc:
            raise StageError(name, exc) from exc
        out_digests = self._digests(outputs)
        if out_digests is None:
            raise StageError(name, RuntimeError("stage did not write all declared outputs"))
        write_text(stamp_path, _dump_json({"key": key, "outputs": out_digests}))
        self.stages[name] = out_digests
        self.recomputed.append(name)
        self._log(f"{name}\t{time.time() - start:.2f}s")

    def _log(self, msg: str) -> None:
        with open(self.path("run.log"), "a", encoding="utf-8") as f:
            f.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')}\t{msg}\n")

    def _load(self, rel: str, loader):
        key = (rel, file_digest(self.path(rel)))
        obj = self._cache.get(key)
        if obj is None:
            obj = self._cache[key] = loader(self.path(rel))
        return obj

    def lexicon(self, rel: str) -> Lexicon:
        return self._load(rel, read_lexicon)

    def corpus(self, rel: str) -> Corpus:
        return self._load(rel, read_corpus)

    def model(self, rel: str) -> G2pModel:
        return self._load(rel, load_model)

    def lm(self, rel: str) -> PhoneLm:
        return self._load(rel, load_lm)

    def json(self, rel: str):
        with open(self.path(rel), encoding="utf-8") as f:
            return json.load(f)

    def write_manifest(self, cfg: PipelineConfig, kind: str, metrics: Dict, status: str = "complete",
                       error: Optional[StageError] = None) -> Dict:
        manifest = {
            "kind": kind,
            "status": status,
            "config_hash": cfg.hash(),
            "stages": {name: self.stages[name] for name in sorted(self.stages)},
            "metrics": metrics,
        }
        if error is not None:
            manifest["failed_stage"] = error.stage
            manifest["error"] = str(error.cause)
        write_text(self.path(MANIFEST), _dump_json(manifest))
        return manifest


# ---------------------------------------------------------------- data


def _write_words(path: str, words: Sequence[str]) -> None:
    write_text(path, "".join(w + "\n" for w in words))


def _read_words(path: str) -> List[str]:
    with open(path, encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip() and not line.startswith("#")]


def _data_files(cfg: PipelineConfig) -> Dict[str, str]:
    files = {"train": "data/train.txt", "decode": "data/decode.txt"}
    if cfg.synth is not None or cfg.data.gold_lexicon:
        files["gold"] = "data/gold.lex"
    return files


def stage_data(rd: RunDir, cfg: PipelineConfig) -> Dict[str, str]:
    """Materialize train/decode corpora and the gold lexicon inside the run dir."""
    files = _data_files(cfg)
    d = cfg.data

    def run():
        if cfg.synth is not None:
            lang = generate_language(cfg.synth)
            write_corpus(lang.corpus, rd.path(files["train"]))
            write_corpus(lang.corpus, rd.path(files["decode"]))
            write_lexicon(lang.gold, rd.path(files["gold"]))
            write_text(rd.path("data/rules.txt"), format_rules(lang.rules))
            _write_words(rd.path("data/irregular.txt"), lang.irregular)
            return
        train = read_corpus(d.corpus)
        decode = read_corpus(d.decode_corpus) if d.decode_corpus else train
        if any(s.phones is None for s in decode.sentences):
            raise ValueError("the decode corpus needs gold sentence phones for the simulator")
        write_corpus(train, rd.path(files["train"]))
        write_corpus(decode, rd.path(files["decode"]))
        if "gold" in files:
            write_lexicon(read_lexicon(d.gold_lexicon), rd.path(files["gold"]))

    sources = [p for p in (d.corpus, d.decode_corpus, d.gold_lexicon) if p and cfg.synth is None]
    params = {
        "synth": asdict(cfg.synth) if cfg.synth else None,
        "sources": {p: file_digest(p) for p in sources if os.path.exists(p)},
    }
    if any(not os.path.exists(p) for p in sources):
        missing = [p for p in sources if not os.path.exists(p)]
        raise StageError("data", FileNotFoundError(f"missing input files: {missing}"))
    outputs = list(files.values()) + (["data/rules.txt", "data/irregular.txt"] if cfg.synth else [])
    rd.stage("data", params, [], outputs, run)
    return files


def stage_split(rd: RunDir, cfg: PipelineConfig, files: Dict[str, str], sizes: Sequence[int]) -> Dict[int, str]:
    """Seed lexicons (nested by frequency) and the held-out test lexicon."""
    d = cfg.data
    if d.seed_lexicon is not None:
        out = {0: "data/seed.lex"}
        params = {"seed": file_digest(d.seed_lexicon), "test": file_digest(d.test_lexicon)}

        def run():
            write_lexicon(read_lexicon(d.seed_lexicon), rd.path("data/seed.lex"))
            write_lexicon(read_lexicon(d.test_lexicon), rd.path("data/test.lex"))

        rd.stage("split", params, [], ["data/seed.lex", "data/test.lex"], run)
        return out
    sizes = sorted(set(sizes))
    out = {s: f"data/seed_{s}.lex" for s in sizes}
    name = "split_" + "_".join(str(s) for s in sizes)
    test_rel = f"data/test_{'_'.join(str(s) for s in sizes)}.lex"
    out[-1] = test_rel

    def run():
        split = split_lexicon(rd.lexicon(files["gold"]), rd.corpus(files["train"]), sizes,
                              d.test_fraction, d.split_seed)
        for s, lex in split.seeds.items():
            write_lexicon(lex, rd.path(out[s]))
        write_lexicon(split.test, rd.path(test_rel))

    params = {"sizes": sizes, "test_fraction": d.test_fraction, "split_seed": d.split_seed}
    rd.stage(name, params, [files["gold"], files["train"]], [out[s] for s in sizes] + [test_rel], run)
    return out


def _seed_and_test(cfg: PipelineConfig, split: Dict[int, str], size: Optional[int]) -> Tuple[str, str]:
    if cfg.data.seed_lexicon is not None:
        return "data/seed.lex", "data/test.lex"
    return split[size], split[-1]


# ---------------------------------------------------------------- learning cycle


class _Context:
    """Per-run constants shared by all cycles."""

    def __init__(self, rd: RunDir, cfg: PipelineConfig, files: Dict[str, str]):
        self.rd = rd
        self.cfg = cfg
        self.files = files
        self.tag = rd.corpus(files["train"]).language_tag
        self.exclude = _read_words(cfg.g2p.exclude) if cfg.g2p.exclude else []

    def pretrain_entries(self, held_out: Sequence[str]):
        """Pretraining entries minus every word of the target language's data."""
        if not self.cfg.g2p.pretrain:
            return []
        blocked = set(held_out) | set(self.exclude)
        for rel in (self.files["train"], self.files["decode"]):
            blocked |= set(self.rd.corpus(rel).vocabulary())
        entries = []
        for tag, path in self.cfg.g2p.pretrain:
            entries += tagged(read_lexicon(path).without(blocked), tag)
        return entries

    def g2p_params(self) -> Dict:
        g = self.cfg.g2p
        return {"order": g.order, "em_iters": g.em_iters, "seed": g.seed, "lam": g.lam,
                "pretrain": {t: file_digest(p) for t, p in g.pretrain}}

    def train(self, lex: Lexicon, held_out: Sequence[str]) -> G2pModel:
        g = self.cfg.g2p
        target = tagged(lex, self.tag)
        pre = self.pretrain_entries(held_out)
        if pre:
            return fine_tune(pre, target, g.lam, order=g.order, em_iters=g.em_iters, seed=g.seed)
        return train_g2p(target, order=g.order, em_iters=g.em_iters, seed=g.seed)


def stage_train_g2p(ctx: _Context, name: str, lex_rel: str, held_rels: Sequence[str], out_rel: str) -> str:
    rd = ctx.rd

    def run():
        held = [w for rel in held_rels for w in rd.lexicon(rel).words()]
        save_model(ctx.train(rd.lexicon(lex_rel), held), rd.path(out_rel))

    params = {"g2p": ctx.g2p_params(), "exclude": ctx.exclude}
    rd.stage(name, params, [lex_rel, *held_rels, ctx.files["train"], ctx.files["decode"]], [out_rel], run)
    return out_rel


def _g2p_transcripts(corpus: Corpus, lex: Lexicon) -> List[Tuple[str, ...]]:
    """Sentence phone strings from dictionary lookups; sentences with unknown words are dropped."""
    out = []
    for s in corpus.sentences:
        if all(w in lex for w in s.words):
            out.append(tuple(p for w in s.words for p in lex.pron(w)))
    return out


def learning_cycle(ctx: _Context, prefix: str, model_rel: str, seed_rel: str, held_rels: Sequence[str],
                   ks: Sequence[int]) -> Dict[int, str]:
    """Annotate, decode, align, harvest and retrain; returns k -> retrained model path."""
    rd, cfg, files = ctx.rd, ctx.cfg, ctx.files
    dict_rel = f"{prefix}/g2p_dict.lex"
    skipped_rel = f"{prefix}/g2p_skipped.txt"

    def run_apply():
        lex, skipped = apply_g2p(rd.model(model_rel), ctx.tag, rd.corpus(files["train"]).vocabulary(), cfg.g2p.beam)
        write_lexicon(lex, rd.path(dict_rel))
        _write_words(rd.path(skipped_rel), skipped)

    rd.stage(f"{prefix}/apply_g2p", {"beam": cfg.g2p.beam}, [model_rel, files["train"]],
             [dict_rel, skipped_rel], run_apply)

    lm_rel = f"{prefix}/phone.lm"

    def run_lm():
        sents = _g2p_transcripts(rd.corpus(files["train"]), rd.lexicon(dict_rel))
        save_lm(train_lm(sents, cfg.lm.order), rd.path(lm_rel))

    rd.stage(f"{prefix}/train_lm", {"order": cfg.lm.order}, [dict_rel, files["train"]], [lm_rel], run_lm)

    decoded_rel = f"{prefix}/decoded.txt"
    n = cfg.noise

    def run_decode():
        gold = rd.corpus(files["decode"])
        inventory = sorted({p for s in gold.sentences for p in s.phones})
        nm = NoiseModel(inventory, n.p_sub, n.p_ins, n.p_del, n.seed)
        write_corpus(decode_corpus(nm, DecodeConfig(rd.lm(lm_rel), n.n_candidates), gold), rd.path(decoded_rel))

    rd.stage(f"{prefix}/decode", asdict(n), [lm_rel, files["decode"]], [decoded_rel], run_decode)

    em_rel = f"{prefix}/emissions.txt"
    harvest_rel = f"{prefix}/harvest.tsv"
    report_rel = f"{prefix}/lexlearn.json"
    t = cfg.lexlearn

    def run_lexlearn():
        decoded = rd.corpus(decoded_rel)
        gs = sorted({g for s in decoded.sentences for w in s.words for g in w})
        ps = sorted({p for s in decoded.sentences for p in s.phones})
        topo = Topology(t.a_loop, t.a_adv, t.a_skip, t.enter0, t.enter1)
        res = em_train(decoded, init_emissions(gs, ps), topo, t.max_iters, t.tol)
        aligns = align_corpus(decoded, res.table, res.topology)
        save_emissions(res.table, res.topology, rd.path(em_rel))
        write_text(rd.path(harvest_rel), format_harvest(harvest(decoded, aligns)))
        report = {
            "sentences": len(decoded.sentences),
            "em_skipped": len(res.skipped),
            "unaligned": sum(a is None for a in aligns),
            "em_iterations": len(res.loglik),
            "loglik": res.loglik,
        }
        write_text(rd.path(report_rel), _dump_json(report))

    params = {k: v for k, v in asdict(t).items() if k != "lm_tiebreak"}
    rd.stage(f"{prefix}/lexlearn", params, [decoded_rel], [em_rel, harvest_rel, report_rel], run_lexlearn)

    retrained = {}
    for k in ks:
        learned_rel = f"{prefix}/learned_k{k}.lex"
        pooled_rel = f"{prefix}/pooled_k{k}.lex"

        def run_threshold(k=k, learned_rel=learned_rel, pooled_rel=pooled_rel):
            with open(rd.path(harvest_rel), encoding="utf-8") as f:
                counts = parse_harvest(f.read(), rd.path(harvest_rel))
            lm = rd.lm(lm_rel) if t.lm_tiebreak else None
            learned = accept_threshold(counts, k, lm)
            write_lexicon(learned, rd.path(learned_rel))
            held = {w for rel in held_rels for w in rd.lexicon(rel).words()} | set(ctx.exclude)
            write_lexicon(pool_with_seed(learned.without(held), rd.lexicon(seed_rel)), rd.path(pooled_rel))

        rd.stage(f"{prefix}/threshold_k{k}", {"k": k, "lm_tiebreak": t.lm_tiebreak, "exclude": ctx.exclude},
                 [harvest_rel, lm_rel, seed_rel, *held_rels], [learned_rel, pooled_rel], run_threshold)
        retrained[k] = stage_train_g2p(ctx, f"{prefix}/retrain_k{k}", pooled_rel, held_rels,
                                       f"{prefix}/g2p_k{k}.model")
    return retrained


# ---------------------------------------------------------------- evaluation and reports


def _test_eval(ctx: _Context, model_rel: str, test_rel: str) -> Dict:
    test = ctx.rd.lexicon(test_rel)
    hyp, _ = apply_g2p(ctx.rd.model(model_rel), ctx.tag, test.words(), ctx.cfg.g2p.beam)
    r = evaluate_lexicon(hyp, test, "all_deleted")
    return {"per": r.per, "wer": r.wer, "num_words": r.num_words, "missing": r.missing}


def _table1_row(rd: RunDir, k: int, learned_rel: str, dict_rel: str, gold_rel: Optional[str]) -> Dict:
    learned = rd.lexicon(learned_rel)
    row: Dict = {"k": k, "num_words": len(learned)}
    if gold_rel is None or not len(learned):
        return row
    gold = rd.lexicon(gold_rel)
    g2p_dict = rd.lexicon(dict_rel)
    words = [w for w in learned.words() if w in gold and w in g2p_dict]
    if not words:
        return row
    ref = gold.subset(words)
    row["per_learned"] = evaluate_lexicon(learned.subset(words), ref).per
    row["per_g2p"] = evaluate_lexicon(g2p_dict.subset(words), ref).per
    cmp = compare_dictionaries(learned, g2p_dict, ref)
    row.update(compared=cmp.num_words, **{k2: v for k2, v in cmp.as_dict().items() if k2 != "num_words"})
    return row


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return "" if v is None else str(v)


def _pct(v) -> str:
    return "" if v is None else f"{100 * v:.2f}%"


def render_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def tsv(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    return "\t".join(headers) + "\n" + "".join("\t".join(r) + "\n" for r in rows)


def write_report(rd: RunDir, stem: str, headers: Sequence[str], tsv_rows, text_rows) -> List[str]:
    os.makedirs(rd.path("reports"), exist_ok=True)
    write_text(rd.path(f"reports/{stem}.tsv"), tsv(headers, tsv_rows))
    write_text(rd.path(f"reports/{stem}.txt"), render_table(headers, text_rows))
    return [f"reports/{stem}.tsv", f"reports/{stem}.txt"]


T1_COLS = ["k", "num_words", "per_learned", "per_g2p", "better", "worse", "same"]
T2_COLS = ["system", "k", "per", "wer", "num_words", "rel_reduction"]


def _table1_rows(table1: Sequence[Dict]):
    raw, text = [], []
    for r in table1:
        raw.append([_fmt(r.get(c)) for c in T1_COLS])
        cells = [str(r["k"]), str(r["num_words"]), _pct(r.get("per_learned")), _pct(r.get("per_g2p"))]
        for c in ("better", "worse", "same"):
            cells.append(f"{r[c]} ({r[c + '_pct']:.2f}%)" if c in r else "")
        text.append(cells)
    return raw, text


def _table2_rows(rows: Sequence[Dict]):
    raw, text = [], []
    for r in rows:
        raw.append([r["system"], _fmt(r.get("k")), _fmt(r["per"]), _fmt(r["wer"]), str(r["num_words"]),
                    _fmt(r.get("rel_reduction"))])
        text.append([r["system"], _fmt(r.get("k")), _pct(r["per"]), _pct(r["wer"]), str(r["num_words"]),
                     _pct(r.get("rel_reduction"))])
    return raw, text


# ---------------------------------------------------------------- drivers


def _prepare(cfg: PipelineConfig, kind: str) -> Tuple[RunDir, _Context]:
    cfg.validate()
    rd = RunDir(cfg.run_dir)
    write_text(rd.path("config.ini"), format_config(cfg))
    try:
        files = stage_data(rd, cfg)
    except StageError as exc:
        rd.write_manifest(cfg, kind, {}, status="failed", error=exc)
        raise
    return rd, _Context(rd, cfg, files)


def _guard(rd: RunDir, cfg: PipelineConfig, kind: str, body: Callable[[], Dict]) -> Dict:
    try:
        return rd.write_manifest(cfg, kind, body())
    except StageError as exc:
        rd.write_manifest(cfg, kind, {}, status="failed", error=exc)
        raise


def _single_pass(ctx: _Context, prefix: str, seed_rel: str, test_rel: str, ks: Sequence[int]) -> Dict:
    """Baseline G2P, one learning cycle and all evaluations for one seed lexicon."""
    rd = ctx.rd
    base_rel = stage_train_g2p(ctx, f"{prefix}/train_g2p", seed_rel, [test_rel], f"{prefix}/g2p_baseline.model")
    retrained = learning_cycle(ctx, prefix, base_rel, seed_rel, [test_rel], ks)
    metrics_rel = f"{prefix}/metrics.json"
    stem1, stem2 = ("table1", "table2") if prefix == "pipeline" else (f"{prefix}_table1", f"{prefix}_table2")

    def run_eval():
        gold_rel = ctx.files.get("gold")
        base = _test_eval(ctx, base_rel, test_rel)
        rows = [dict(system="baseline", k=None, rel_reduction=None, **base)]
        table1 = []
        for k in ks:
            m = _test_eval(ctx, retrained[k], test_rel)
            rows.append(dict(system="learned", k=k, rel_reduction=relative_reduction(base["per"], m["per"]), **m))
            table1.append(_table1_row(rd, k, f"{prefix}/learned_k{k}.lex", f"{prefix}/g2p_dict.lex", gold_rel))
        report = rd.json(f"{prefix}/lexlearn.json")
        metrics = {
            "seed_words": len(rd.lexicon(seed_rel)),
            "test_words": len(rd.lexicon(test_rel)),
            "baseline": base,
            "learned": {str(r["k"]): {c: r[c] for c in ("per", "wer", "num_words", "missing", "rel_reduction")}
                        for r in rows[1:]},
            "table1": table1,
            "lexlearn": {c: report[c] for c in ("sentences", "em_skipped", "unaligned", "em_iterations")},
        }
        write_text(rd.path(metrics_rel), _dump_json(metrics))
        write_report(rd, stem1, T1_COLS, *_table1_rows(table1))
        write_report(rd, stem2, T2_COLS, *_table2_rows(rows))

    inputs = [base_rel, test_rel, f"{prefix}/g2p_dict.lex", f"{prefix}/lexlearn.json"]
    inputs += [retrained[k] for k in ks] + [f"{prefix}/learned_k{k}.lex" for k in ks]
    if "gold" in ctx.files:
        inputs.append(ctx.files["gold"])
    outputs = [metrics_rel] + [f"reports/{s}.{e}" for s in (stem1, stem2) for e in ("tsv", "txt")]
    rd.stage(f"{prefix}/evaluate", {"ks": list(ks), "beam": ctx.cfg.g2p.beam}, inputs, outputs, run_eval)
    return rd.json(metrics_rel)


def run_pipeline(cfg: PipelineConfig) -> Dict:
    """Baseline G2P, one learning pass for every k, retrained G2Ps and reports."""
    rd, ctx = _prepare(cfg, "pipeline")

    def body():
        split = stage_split(rd, cfg, ctx.files, [cfg.data.seed_size])
        seed_rel, test_rel = _seed_and_test(cfg, split, cfg.data.seed_size)
        return _single_pass(ctx, "pipeline", seed_rel, test_rel, cfg.experiment.k)

    return _guard(rd, cfg, "pipeline", body)


def _split_validation(rd: RunDir, cfg: PipelineConfig, seed_rel: str) -> Tuple[str, str]:
    e = cfg.experiment
    train_rel, valid_rel = "data/seed_train.lex", "data/valid.lex"

    def run():
        seed = rd.lexicon(seed_rel)
        words = seed.words()
        n_valid = max(e.validation_min, int(round(e.validation_fraction * len(words))))
        if n_valid >= len(words):
            raise ValueError(f"seed lexicon of {len(words)} words is too small for {n_valid} validation words")
        rng = np.random.default_rng([cfg.data.split_seed, 104729])
        valid = {words[int(i)] for i in rng.choice(len(words), size=n_valid, replace=False)}
        write_lexicon(seed.without(valid), rd.path(train_rel))
        write_lexicon(seed.subset(valid), rd.path(valid_rel))

    params = {"fraction": e.validation_fraction, "min": e.validation_min, "split_seed": cfg.data.split_seed}
    rd.stage("split_validation", params, [seed_rel], [train_rel, valid_rel], run)
    return train_rel, valid_rel


def run_iterations(cfg: PipelineConfig) -> Dict:
    """Self-training at k=1; each round re-annotates with the validation-selected best G2P.

    ``rel_reduction`` of an iteration is relative to the previous iteration's
    PER; ``rel_reduction_vs_baseline`` is relative to the baseline.
    """
    if cfg.experiment.iterations == 1:
        return run_pipeline(cfg)
    rd, ctx = _prepare(cfg, "iterations")
    k = 1

    def body():
        split = stage_split(rd, cfg, ctx.files, [cfg.data.seed_size])
        seed_rel, test_rel = _seed_and_test(cfg, split, cfg.data.seed_size)
        train_rel, valid_rel = _split_validation(rd, cfg, seed_rel)
        held = [test_rel, valid_rel]
        best_rel = stage_train_g2p(ctx, "iter0/train_g2p", train_rel, held, "iter0/g2p.model")
        base = _test_eval(ctx, best_rel, test_rel)
        best_valid = _test_eval(ctx, best_rel, valid_rel)["per"]
        rows = [dict(system="baseline", k=None, rel_reduction=None, **base)]
        iters = []
        prev_per = base["per"]
        for i in range(1, cfg.experiment.iterations + 1):
            cand_rel = learning_cycle(ctx, f"iter{i}", best_rel, train_rel, held, [k])[k]
            cand_valid = _test_eval(ctx, cand_rel, valid_rel)["per"]
            if cand_valid < best_valid:
                best_rel, best_valid = cand_rel, cand_valid
            m = _test_eval(ctx, best_rel, test_rel)
            row = dict(iteration=i, selected=os.path.dirname(best_rel), valid_per=best_valid,
                       candidate_valid_per=cand_valid, rel_reduction=relative_reduction(prev_per, m["per"]),
                       rel_reduction_vs_baseline=relative_reduction(base["per"], m["per"]), **m)
            iters.append(row)
            rows.append(dict(system=f"iter{i}", k=k, rel_reduction=row["rel_reduction"], **m))
            prev_per = m["per"]
        write_report(rd, "iterations", T2_COLS, *_table2_rows(rows))
        return {"baseline": dict(valid_per=_test_eval(ctx, "iter0/g2p.model", valid_rel)["per"], **base),
                "iterations": iters}

    return _guard(rd, cfg, "iterations", body)


def run_seed_sweep(cfg: PipelineConfig) -> Dict:
    """One full pass per seed size over nested seed sets sharing one test set."""
    if cfg.data.seed_lexicon is not None:
        raise StageError("sweep", ValueError("seed sweeps split data.gold_lexicon; drop data.seed_lexicon"))
    rd, ctx = _prepare(cfg, "seed_sweep")
    sizes = sorted(set(cfg.data.seed_sizes))
    ks = cfg.experiment.k

    def body():
        split = stage_split(rd, cfg, ctx.files, sizes)
        rows = []
        for size in sizes:
            m = _single_pass(ctx, f"seed{size}", split[size], split[-1], ks)
            learned = m["learned"][str(ks[0])]
            rows.append({"seed_size": size, "baseline_per": m["baseline"]["per"], "k": ks[0],
                         "learned_per": learned["per"], "delta": m["baseline"]["per"] - learned["per"],
                         "rel_reduction": learned["rel_reduction"]})
        cols = ["seed_size", "k", "baseline_per", "learned_per", "delta", "rel_reduction"]
        write_report(rd, "seed_sweep", cols, [[_fmt(r[c]) for c in cols] for r in rows],
                     [[str(r["seed_size"]), str(r["k"]), _pct(r["baseline_per"]), _pct(r["learned_per"]),
                       _pct(r["delta"]), _pct(r["rel_reduction"])] for r in rows])
        return {"sizes": rows}

    return _guard(rd, cfg, "seed_sweep", body)
