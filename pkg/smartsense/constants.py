"""Constants used across the smartsense package."""

# Temporal context vocabulary: day of week (Monday = 0) and 3-hour ranges
N_DOW = 7
N_HOUR_BINS = 8
HOURS_PER_BIN = 3

DEFAULT_WINDOW_LENGTH = 10

# Cut points of the 7:1:2 train/validation/test split, in tenths of the set
SPLIT_TENTHS = (7, 8)
SPLIT_NAMES = ("train", "val", "test")

# Cutoffs reported by every evaluation
METRIC_KS = (1, 3, 5)
REPORT_COLUMNS = ("model", "map1", "map3", "map5", "hr1", "hr3", "hr5")
METRICS_LOG_COLUMNS = ("epoch", "train_loss", "val_map1", "seconds")

# Action encoder slot order inside the stacked 4 x d matrix
ACTION_SLOTS = ("device", "control", "dow", "hour")

LAYER_NORM_EPS = 1e-5
INIT_RANGE = 0.05

# File names inside prepared-dataset and checkpoint directories
DATASET_DB_NAME = "dataset.db"
DATASET_STATS_NAME = "dataset_stats.csv"
CHECKPOINT_NAME = "best.ckpt"
METRICS_LOG_NAME = "metrics.csv"
TRAIN_REPORT_NAME = "train_report.json"

CHECKPOINT_MAGIC = b"SMSN"
CHECKPOINT_FORMAT_VERSION = 1

# Ablation names accepted by --ablate
ABLATIONS = ("act", "seq", "reg", "all")

# Environment variable prefix for the configuration layer
ENV_PREFIX = "SMARTSENSE_"
