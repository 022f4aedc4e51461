"""embedtool: offline data-prep companion for the market/news fusion engine.

Annotates article sentiment, extracts encoder embeddings into the `#dim=`
file format, and produces normalized up/down prediction files from an LLM
endpoint. Communicates with the engine only through its documented file
formats.
"""

from .encoders import embed_articles, make_encoder
from .llm import build_prompt, normalize_reply, run_llm_baseline
from .records import ArticleRecord, load_articles
from .sentiment import annotate_sentiment

__version__ = "0.1.0"
