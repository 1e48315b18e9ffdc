"""Pydantic data models."""

from .config import *
from .images import *
from .reports import *
from .scene import *
