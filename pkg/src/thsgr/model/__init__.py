from .thsgr import ModelConfig, ThsgrModel
