"""Deterministic tweet-cleaning pipeline.

Five steps applied in a fixed order: drop emojis, drop stray punctuation,
replace URLs and HTML tags with placeholders, replace usernames, collapse
whitespace. The full pipeline is idempotent.
"""
from __future__ import annotations

import functools
import re
import string
from dataclasses import dataclass

from .errors import ConfigError

# Unicode blocks treated as emoji: dingbats, regional indicators (flags),
# misc symbols & pictographs, emoticons, transport & map, supplemental symbols.
DEFAULT_EMOJI_RANGES = (
    (0x2700, 0x27BF),
    (0x1F1E6, 0x1F1FF),
    (0x1F300, 0x1F5FF),
    (0x1F600, 0x1F64F),
    (0x1F680, 0x1F6FF),
    (0x1F900, 0x1F9FF),
)

DEFAULT_STRAY_PUNCT = frozenset(string.punctuation)

_WORD_CHAR = re.compile(r"\w")
_URL = re.compile(r"(?:https?://|www\.)\S+")
# identifier-only tags (<br>, </b>, <br/>): attribute spans are excluded so
# later pipeline steps can never manufacture a fresh match (idempotence)
_HTML_TAG = re.compile(r"</?[A-Za-z][A-Za-z0-9]*(?:\s*/)?>")
_USERNAME = re.compile(r"(?<!\w)@\w{1,15}(?!\w)")


@dataclass(frozen=True)
class PreprocessConfig:
    url_placeholder: str = "HTTPURL"
    html_placeholder: str = "HTMLTAG"
    user_placeholder: str = "@USER"
    emoji_ranges: tuple[tuple[int, int], ...] = DEFAULT_EMOJI_RANGES
    stray_punct: frozenset[str] = DEFAULT_STRAY_PUNCT

    def __post_init__(self) -> None:
        for name in ("url_placeholder", "html_placeholder", "user_placeholder"):
            value = getattr(self, name)
            if not value or any(ch.isspace() for ch in value):
                raise ConfigError(f"{name} must be non-empty and whitespace-free")
        ranges = tuple((int(lo), int(hi)) for lo, hi in self.emoji_ranges)
        object.__setattr__(self, "emoji_ranges", ranges)
        prev_hi = -1
        for lo, hi in ranges:
            if lo > hi or lo <= prev_hi:
                raise ConfigError("emoji_ranges must be disjoint sorted intervals")
            prev_hi = hi
        object.__setattr__(self, "stray_punct", frozenset(self.stray_punct))


@functools.lru_cache(maxsize=8)
def _emoji_regex(ranges: tuple[tuple[int, int], ...]) -> re.Pattern:
    cls = "".join(f"{chr(lo)}-{chr(hi)}" for lo, hi in ranges)
    return re.compile(f"[{cls}]")


def remove_emojis(text: str, cfg: PreprocessConfig) -> str:
    """Delete every codepoint inside the configured emoji ranges."""
    return _emoji_regex(cfg.emoji_ranges).sub("", text)


def strip_stray_punctuation(text: str, cfg: PreprocessConfig) -> str:
    """Drop maximal punctuation runs not touching a word character.

    A run attached to a word character on at least one side is kept, so
    contractions, trailing periods, and URL innards survive.
    """
    out: list[str] = []
    i, n = 0, len(text)
    while i < n:
        if text[i] not in cfg.stray_punct:
            out.append(text[i])
            i += 1
            continue
        j = i
        while j < n and text[j] in cfg.stray_punct:
            j += 1
        before = text[i - 1] if i > 0 else ""
        after = text[j] if j < n else ""
        if (before and _WORD_CHAR.match(before)) or (after and _WORD_CHAR.match(after)):
            out.append(text[i:j])
        i = j
    return "".join(out)


def replace_urls_and_html(text: str, cfg: PreprocessConfig) -> str:
    """Swap URLs (http/https scheme or www. prefix) and <tag>s for placeholders."""
    text = _URL.sub(lambda m: cfg.url_placeholder, text)
    return _HTML_TAG.sub(lambda m: cfg.html_placeholder, text)


def replace_usernames(text: str, cfg: PreprocessConfig) -> str:
    """Swap @handle tokens (1-15 word chars) for the placeholder."""
    return _USERNAME.sub(lambda m: cfg.user_placeholder, text)


def normalize_whitespace(text: str) -> str:
    """Collapse whitespace runs to single spaces and trim the ends."""
    return " ".join(text.split())


def preprocess(text: str, cfg: PreprocessConfig | None = None) -> str:
    """Run the five cleaning steps in order."""
    cfg = cfg or PreprocessConfig()
    text = remove_emojis(text, cfg)
    text = strip_stray_punctuation(text, cfg)
    text = replace_urls_and_html(text, cfg)
    text = replace_usernames(text, cfg)
    return normalize_whitespace(text)
