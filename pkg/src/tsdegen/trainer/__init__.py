from .checkpoint import Checkpoint, load_checkpoint, load_model, save_checkpoint
from .metrics import MetricSet, compute_metrics, directional_accuracy
from .train import History, TrainConfig, evaluate, predict_split, split_mse, train
