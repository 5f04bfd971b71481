from .effectors import Effector, EffectorSet, IKInput, effector_features, shape_conditioning
from .model import IKModel, load_model, save_model
from .data import TrainingExample, augment_beta, make_training_example
from .loss import ik_loss
from .training import TrainConfig, train
from .evaluate import evaluate, mpjpe_by_effector_count

__all__ = [
    "Effector", "EffectorSet", "IKInput", "effector_features", "shape_conditioning",
    "IKModel", "load_model", "save_model",
    "TrainingExample", "augment_beta", "make_training_example",
    "ik_loss",
    "TrainConfig", "train",
    "evaluate", "mpjpe_by_effector_count",
]
