"""Learn word pronunciations from decoded phone streams and use them to retrain a G2P."""
from .core import Corpus, LexEntry, Lexicon, Sentence, read_corpus, read_lexicon, write_corpus, write_lexicon
from .evaluation import compare_dictionaries, edit_distance, evaluate_lexicon
from .g2p import apply_g2p, fine_tune, predict, train_g2p
from .lexlearn import accept_threshold, em_train, harvest, init_emissions, pool_with_seed, viterbi_align
from .phonelm import train_lm
from .recognizer import NoiseModel, decode_corpus
from .synthlang import SynthSpec, generate_language, split_seed

__version__ = "0.1.0"
