"""
Structured exceptions for the texture attack engine
"""

from typing import Any, Dict


class FashionAdvError(Exception):
    """Base error carrying structured context fields"""

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self) -> Dict[str, Any]:
        """Render the error for logs and CLI output"""
        payload = {'error': type(self).__name__, 'message': self.message}
        for key, value in self.context.items():
            payload[key] = value if isinstance(value, (int, float, str, bool, type(None))) else str(value)
        return payload

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ', '.join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} ({details})"


class ShapeError(FashionAdvError):
    """Operator received incompatible shapes"""


class NonFiniteError(FashionAdvError):
    """An operator produced NaN or Inf"""


class GradCheckError(FashionAdvError):
    """Finite-difference check could not be evaluated"""


class StorageError(FashionAdvError):
    """Tensor container could not be read or written"""


class ImageIOError(FashionAdvError):
    """Image or mask file could not be read or written"""


class MaskValueError(ImageIOError):
    """Mask contains values other than 0 and 255"""


class CodecError(FashionAdvError):
    """JPEG codec failed"""


class SceneGenerationError(FashionAdvError):
    """Synthetic scene could not be generated"""


class TransformError(FashionAdvError):
    """Invalid perturbation parameters"""


class ConfigError(FashionAdvError):
    """Run configuration is invalid"""


class DatasetError(FashionAdvError):
    """Dataset is missing or malformed"""


class AttackDivergedError(FashionAdvError):
    """Optimization produced a non-finite loss"""
