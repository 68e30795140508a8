from .loss import one_hot, cross_entropy
from .optimizer import OptConfig, AdamState, init_adam, adam_step
from .run import train, train_step, TrainResult
from .metrics import EvalReport, evaluate, kappa_from_confusion, predict_dataset
from .checkpoint import save_checkpoint, load_checkpoint, load_model
