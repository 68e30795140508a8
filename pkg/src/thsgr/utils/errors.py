"""
Exception hierarchy shared by all subpackages.
"""

from typing import Sequence


class ThsgrError(Exception):
    pass


class DimensionError(ThsgrError, ValueError):
    def __init__(self, op: str, *shapes: Sequence[int], detail: str = '') -> None:
        shape_str = ' vs '.join(str(tuple(s)) for s in shapes)
        msg = f'{op}: incompatible shapes {shape_str}'
        if detail:
            msg += f' ({detail})'
        super().__init__(msg)


class ParameterError(ThsgrError, ValueError):
    pass


class UsageError(ThsgrError, RuntimeError):
    pass


class NonFiniteError(ThsgrError, FloatingPointError):
    def __init__(self, op: str, tensor_name: str | None, shape: Sequence[int]) -> None:
        self.op = op
        self.tensor_name = tensor_name
        name = tensor_name if tensor_name is not None else '<unnamed>'
        super().__init__(
            f'non-finite value produced by {op} (tensor {name}, shape {tuple(shape)})'
        )


class ConfigError(ThsgrError, ValueError):
    def __init__(self, field: str, message: str) -> None:
        self.field = field
        self.message = message
        super().__init__(f'config field "{field}": {message}')


class DataError(ThsgrError, ValueError):
    pass


class RasterFormatError(ThsgrError, ValueError):
    def __init__(self, path: str, field: str, message: str) -> None:
        self.path = path
        self.field = field
        super().__init__(f'{path}: header field "{field}": {message}')
