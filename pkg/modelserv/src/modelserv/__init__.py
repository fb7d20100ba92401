"""Model service: tiny fine-tunable translation and classification models
served over a JSON HTTP protocol."""

__version__ = "0.1.0"

from .service import create_app

__all__ = ["create_app", "__version__"]
