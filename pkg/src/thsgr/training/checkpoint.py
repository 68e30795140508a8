import os
import numpy as onp
import yaml

from thsgr.model import ModelConfig, ThsgrModel
from thsgr.utils.errors import DataError

CONFIG_KEY = 'config:model'


def save_checkpoint(model: ThsgrModel, path: str) -> None:
    """
    Parameters, BN running statistics and the model config in one .npz file.
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    state = model.state_dict()
    config = model.config.to_dict()
    config['hsi_widths'] = list(config['hsi_widths'])
    state[CONFIG_KEY] = onp.array(yaml.safe_dump(config))
    with open(path, 'wb') as f:
        onp.savez(f, **state)


def load_checkpoint(model: ThsgrModel, path: str) -> ThsgrModel:
    if not os.path.exists(path):
        raise DataError(f'checkpoint {path} does not exist')
    with onp.load(path) as data:
        model.load_state_dict({k: data[k] for k in data.files if k != CONFIG_KEY})
    return model


def load_model(path: str) -> ThsgrModel:
    """
    Rebuilds the model from the config stored in the checkpoint.
    """
    if not os.path.exists(path):
        raise DataError(f'checkpoint {path} does not exist')
    with onp.load(path) as data:
        config = yaml.safe_load(str(data[CONFIG_KEY]))
    return load_checkpoint(ThsgrModel(ModelConfig.from_dict(config)), path)
