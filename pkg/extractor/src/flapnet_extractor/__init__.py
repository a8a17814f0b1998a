"""Video to hand-landmark JSON-lines extraction."""

__version__ = "0.1.0"

from .engines import BrightBlobEngine, HandDetection, MediaPipeHandsEngine, make_engine
from .extract import ExtractionError, ExtractionJob, ExtractionSummary, batch_extract, extract
