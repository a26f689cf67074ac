"""Global variables for anyhop.

This module contains the constants shared across the anyhop package: marker
tokens, model limits, file names inside index and model directories, and the
environment variables the package reads.

Constants
---------
CLS_TOKEN : str
    Sequence-start marker placed before the question in every encoded pair
SEP_TOKEN : str
    Separator marker between question and document, and between clue spans
SENTENCE_END_TOKENS : frozenset
    Tokens after which the next token counts as a sentence start
MAX_ANSWER_LENGTH : int
    Upper bound (exclusive) on the token length of a reader answer span
MAX_CLUE_LENGTH : int
    Upper bound (exclusive) on the token length of a clue span
LEAKY_RELU_SLOPE : float
    Negative slope of the graph attention scores
LAYER_NORM_EPS : float
    Variance epsilon used by every layer normalization
NOISY_CANDIDATE_POOL : int
    Number of TF-IDF candidates noisy training documents are drawn from
PARAMS_FORMAT_VERSION : int
    Version tag written into every parameter file
INDEX_FORMAT_VERSION : int
    Version tag written into every index file
SRC_DIR : str
    Absolute path to the package source directory
"""

from pathlib import Path


CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
SENTENCE_END_TOKENS = frozenset({".", "!", "?"})

MAX_ANSWER_LENGTH = 30
MAX_CLUE_LENGTH = 10
LEAKY_RELU_SLOPE = 0.2
LAYER_NORM_EPS = 1e-5

# Training data construction
RERANKER_SAMPLE_SIZE = 6
RERANKER_GOLD_PER_SAMPLE = 2
READER_SAMPLE_SIZE = 4
NOISY_CANDIDATE_POOL = 50
UPDATER_QUESTION_FRACTION = 0.3

# Persistence
PARAMS_FORMAT_VERSION = 1
INDEX_FORMAT_VERSION = 1
CORPUS_FILE = "corpus.jsonl"
INDEX_FILE = "index.npz"
QA_FILE = "qa.jsonl"
MODEL_FILES = {
    "reranker": "reranker.npz",
    "reader": "reader.npz",
    "updater": "updater.npz",
}

# Environment variables
CONFIG_DIR_ENV = "ANYHOP_CONFIG_DIR"
MODELS_DIR_ENV = "ANYHOP_MODELS_DIR"

SRC_DIR = str(Path(__file__).parent.parent)
