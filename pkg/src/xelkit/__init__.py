"""Cross-lingual entity linking toolkit.

Builds mention->entity resources from wiki dumps, generates English
Wikipedia candidates for foreign-language mentions through search and
geo providers plus a probabilistic mention table, ranks candidates with
a zero-shot multiplicity-times-context score, and evaluates recall,
accuracy, and coverage.
"""

from .candidates import Candidate, GenConfig, Source, generate
from .evaluate import EvalReport, LinkResult, MentionRecord
from .normalize import RuleSet, load_rules, normalize
from .ranking import BuiltinEmbedder, ContextBundle, rank_and_select
from .wikidump import PrTable, TitleMap, build_prtm, build_title_map, parse_dump

__version__ = "0.1.0"

__all__ = [
    "Candidate",
    "GenConfig",
    "Source",
    "generate",
    "EvalReport",
    "LinkResult",
    "MentionRecord",
    "RuleSet",
    "load_rules",
    "normalize",
    "BuiltinEmbedder",
    "ContextBundle",
    "rank_and_select",
    "PrTable",
    "TitleMap",
    "build_prtm",
    "build_title_map",
    "parse_dump",
    "__version__",
]
