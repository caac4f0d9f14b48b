"""Pipeline configuration: an INI file with one section per stage.

See ``configs/example.ini`` for the full grammar with defaults.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Tuple

from .synthlang import SynthSpec


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    corpus: Optional[str] = None
    decode_corpus: Optional[str] = None
    gold_lexicon: Optional[str] = None
    seed_lexicon: Optional[str] = None
    test_lexicon: Optional[str] = None
    seed_size: int = 500
    seed_sizes: Tuple[int, ...] = (50, 500, 2000)
    test_fraction: float = 0.2
    split_seed: int = 0


@dataclass
class G2pConfig:
    order: int = 3
    em_iters: int = 10
    beam: int = 8
    seed: int = 0
    lam: float = 5.0
    pretrain: Tuple[Tuple[str, str], ...] = ()
    exclude: Optional[str] = None


@dataclass
class LmConfig:
    order: int = 5


@dataclass
class NoiseConfig:
    p_sub: float = 0.08
    p_ins: float = 0.02
    p_del: float = 0.02
    seed: int = 0
    n_candidates: int = 4


@dataclass
class LexlearnConfig:
    a_loop: float = 0.10
    a_adv: float = 0.80
    a_skip: float = 0.10
    enter0: float = 0.9
    enter1: float = 0.1
    max_iters: int = 30
    tol: float = 1e-4
    lm_tiebreak: bool = True


@dataclass
class ExperimentConfig:
    k: Tuple[int, ...] = (1, 2, 4, 6, 8)
    iterations: int = 1
    validation_fraction: float = 0.1
    validation_min: int = 10


@dataclass
class PipelineConfig:
    run_dir: str = "run"
    data: DataConfig = field(default_factory=DataConfig)
    synth: Optional[SynthSpec] = None
    g2p: G2pConfig = field(default_factory=G2pConfig)
    lm: LmConfig = field(default_factory=LmConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    lexlearn: LexlearnConfig = field(default_factory=LexlearnConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def validate(self) -> None:
        ks = self.experiment.k
        if not ks or any(k < 1 for k in ks) or any(a >= b for a, b in zip(ks, ks[1:])):
            raise ConfigError("experiment.k must be non-empty, >= 1 and strictly increasing")
        if self.experiment.iterations < 1:
            raise ConfigError("experiment.iterations must be >= 1")
        if not 0 < self.experiment.validation_fraction < 1:
            raise ConfigError("experiment.validation_fraction must be in (0, 1)")
        if self.data.seed_size < 1 or any(s < 1 for s in self.data.seed_sizes):
            raise ConfigError("seed sizes must be >= 1")
        if not 0 < self.data.test_fraction < 1:
            raise ConfigError("data.test_fraction must be in (0, 1)")
        if not 1 <= self.g2p.order <= 5:
            raise ConfigError("g2p.order must be in [1, 5]")
        if self.g2p.lam < 1:
            raise ConfigError("g2p.lambda must be >= 1")
        if self.g2p.beam < 1:
            raise ConfigError("g2p.beam must be >= 1")
        if not 1 <= self.lm.order <= 7:
            raise ConfigError("lm.order must be in [1, 7]")
        n = self.noise
        if not all(0 <= p <= 1 for p in (n.p_sub, n.p_ins, n.p_del)) or n.p_sub + n.p_del > 1:
            raise ConfigError("noise rates must be in [0, 1] with p_sub + p_del <= 1")
        if n.n_candidates < 1:
            raise ConfigError("noise.n_candidates must be >= 1")
        t = self.lexlearn
        if min(t.a_loop, t.a_adv, t.a_skip, t.enter0, t.enter1) < 0:
            raise ConfigError("topology parameters must be non-negative")
        if abs(t.a_loop + t.a_adv + t.a_skip - 1) > 1e-9 or abs(t.enter0 + t.enter1 - 1) > 1e-9:
            raise ConfigError("a_loop + a_adv + a_skip and enter0 + enter1 must each sum to 1")
        if self.synth is None and self.data.corpus is None:
            raise ConfigError("either a [synth] section or data.corpus is required")
        if self.synth is not None:
            try:
                self.synth.validate()
            except ValueError as exc:
                raise ConfigError(f"synth: {exc}") from None
        if (self.data.seed_lexicon is None) != (self.data.test_lexicon is None):
            raise ConfigError("data.seed_lexicon and data.test_lexicon must be given together")
        if self.synth is None and self.data.seed_lexicon is None and self.data.gold_lexicon is None:
            raise ConfigError("data.gold_lexicon is needed to split seed and test sets")

    def semantic_dict(self) -> Dict:
        """Every field that affects results (the run directory does not)."""
        d = asdict(self)
        d.pop("run_dir")
        return d

    def hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_SECTIONS = {
    "data": DataConfig,
    "g2p": G2pConfig,
    "lm": LmConfig,
    "noise": NoiseConfig,
    "lexlearn": LexlearnConfig,
    "experiment": ExperimentConfig,
    "synth": SynthSpec,
}
# INI key -> dataclass field, where they differ
_RENAMES = {("g2p", "lambda"): "lam"}


def _convert(section: str, name: str, default, typ: str, raw: str, base: str):
    try:
        if typ.startswith("Tuple[Tuple"):
            pairs = []
            for item in raw.replace(",", " ").split():
                tag, _, path = item.partition("=")
                if not tag or not path:
                    raise ValueError(f"expected tag=path, got {item!r}")
                pairs.append((tag, _resolve(path, base)))
            return tuple(pairs)
        if typ.startswith("Tuple"):
            return tuple(int(x) for x in raw.replace(",", " ").split())
        if typ.startswith("Optional[str]"):
            return _resolve(raw, base) if raw else None
        if typ == "bool":
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(f"not a boolean: {raw!r}")
            return low in ("true", "yes", "1", "on")
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"[{section}] {name}: {exc}") from None


def _resolve(path: str, base: str) -> str:
    path = os.path.expanduser(path)
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base, path))


def _build(cls, section: str, items: Dict[str, str], base: str):
    kwargs = {}
    known = {f.name: f for f in fields(cls) if f.init}
    for key, raw in items.items():
        name = _RENAMES.get((section, key), key)
        if name not in known:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        f = known[name]
        typ = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
        kwargs[name] = _convert(section, key, f.default, typ, raw.strip(), base)
    return cls(**kwargs)


def parse_config(text: str, base_dir: str = ".") -> PipelineConfig:
    """Parse INI text; relative paths resolve against ``base_dir``."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    cfg = PipelineConfig()
    for section in cp.sections():
        items = dict(cp.items(section))
        if section == "run":
            for key in items:
                if key != "dir":
                    raise ConfigError(f"unknown key {key!r} in [run]")
            if "dir" in items:
                cfg.run_dir = _resolve(items["dir"].strip(), base_dir)
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        if section == "synth":
            lengths = {}
            for key in ("sentence_length", "word_length"):
                if key in items:
                    vals = tuple(int(x) for x in items.pop(key).replace(",", " ").split())
                    if len(vals) != 2:
                        raise ConfigError(f"[synth] {key} needs two integers")
                    lengths[key] = vals
            spec = _build(SynthSpec, section, items, base_dir)
            for key, vals in lengths.items():
                setattr(spec, key, vals)
            cfg.synth = spec
        else:
            setattr(cfg, section, _build(_SECTIONS[section], section, items, base_dir))
    cfg.validate()
    return cfg


def load_config(path: str | os.PathLike) -> PipelineConfig:
    with open(path, encoding="utf-8") as f:
        text = f.read()
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def format_config(cfg: PipelineConfig) -> str:
    """Canonical INI rendering; ``parse_config(format_config(c))`` equals ``c``."""
    out: List[str] = ["[run]", f"dir = {cfg.run_dir}", ""]
    sections = [(name, getattr(cfg, name)) for name in ("data", "g2p", "lm", "noise", "lexlearn", "experiment")]
    if cfg.synth is not None:
        sections.append(("synth", cfg.synth))
    inverse = {(s, v): k for (s, k), v in _RENAMES.items()}
    for name, obj in sections:
        out.append(f"[{name}]")
        for f in fields(obj):
            val = getattr(obj, f.name)
            if val is None:
                continue
            key = inverse.get((name, f.name), f.name)
            if isinstance(val, tuple):
                if val and isinstance(val[0], tuple):
                    text = " ".join(f"{a}={b}" for a, b in val)
                else:
                    text = " ".join(str(x) for x in val)
            elif isinstance(val, bool):
                text = "true" if val else "false"
            else:
                text = repr(val) if isinstance(val, float) else str(val)
            out.append(f"{key} = {text}")
        out.append("")
    return "\n".join(out)
