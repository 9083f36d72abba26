from .app import create_app
from .state import ReviewState

__all__ = ["create_app", "ReviewState"]
