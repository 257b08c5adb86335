"""Method records -> normalized word-API tuples.

A method record is a raw comment plus the fully-qualified API calls found in
the method body (``package.Class#method``, constructors as ``#new``).  The
record is turned into a tuple of normalized first-sentence words and the
allowlisted API calls, or dropped.
"""

from __future__ import annotations

import functools
import logging
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Iterator, NamedTuple

from apiembed.porter import stem as porter_stem

log = logging.getLogger(__name__)

TUPLE_SEPARATOR = " || "

TASK_TAGS = ("TODO", "FIXME", "HACK", "REVISIT", "DOCUMENTME", "XXX")
DEFAULT_NOTE_PREFIXES = ("note", "test")

_HTML_TAG = re.compile(r"<.*?>")
_WHITESPACE = re.compile(r"\s+")
_ALNUM_RUN = re.compile(r"[^\W_]+")
# lower->Upper, acronym->Word ("XMLParser"), letter<->digit
_CAMEL_BOUNDARY = re.compile(
    r"(?<=[a-z])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])|(?<=[A-Za-z])(?=[0-9])|(?<=[0-9])(?=[A-Za-z])"
)


class MalformedRecord(ValueError):
    pass


@dataclass(frozen=True)
class MethodRecord:
    comment_text: str
    api_calls: tuple[str, ...]


@dataclass(frozen=True)
class WordApiTuple:
    words: tuple[str, ...]
    apis: tuple[str, ...]

    def tokens(self) -> tuple[str, ...]:
        return self.words + self.apis


class FilterResult(NamedTuple):
    keep: bool
    reason: str | None = None


def is_api(token: str) -> bool:
    return "#" in token


def _read_lines(name: str) -> list[str]:
    text = resources.files("apiembed.data").joinpath(name).read_text(encoding="utf-8")
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def load_stop_words(path=None) -> frozenset[str]:
    """Load a stop-word list, one word per line (bundled default when ``path`` is None).

    Contractions are also registered by their alphanumeric pieces, since the
    tokenizer splits ``don't`` into ``don`` and ``t``.
    """
    if path is None:
        entries = _read_lines("stopwords.txt")
    else:
        with open(path, encoding="utf-8") as fh:
            entries = [ln.strip() for ln in fh if ln.strip()]
    words = set()
    for entry in entries:
        entry = entry.lower()
        words.add(entry)
        words.update(p for p in _ALNUM_RUN.findall(entry) if len(p) > 1)
    return frozenset(words)


def load_allowlist(path=None) -> tuple[str, ...]:
    if path is None:
        return tuple(_read_lines("javase_packages.txt"))
    with open(path, encoding="utf-8") as fh:
        return tuple(ln.strip() for ln in fh if ln.strip())


def strip_html(text: str) -> str:
    return _HTML_TAG.sub("", text)


def first_sentence(text: str) -> str:
    text = _WHITESPACE.sub(" ", text).strip()
    return text.split(". ", 1)[0]


def split_identifier(token: str) -> list[str]:
    """``nextInt`` -> ``['next', 'Int']``; ``utf8`` -> ``['utf', '8']``."""
    return [p for p in _CAMEL_BOUNDARY.split(token) if p]


def tokenize(text: str, stop_words: frozenset[str] | None = None, stem: bool = True) -> list[str]:
    """Tokenize, camel-split, lowercase, drop stop words/numbers/single letters, stem."""
    if stop_words is None:
        stop_words = default_stop_words()
    out = []
    for raw in _ALNUM_RUN.findall(text):
        for part in split_identifier(raw):
            word = part.lower()
            if _droppable(word, stop_words):
                continue
            if stem:
                word = porter_stem(word)
                # a stem can itself be a stop word ("others" -> "other")
                if _droppable(word, stop_words):
                    continue
            out.append(word)
    return out


def _droppable(word, stop_words):
    return len(word) < 2 or word.isdigit() or word in stop_words


def normalize_comment(
    comment_text: str, stop_words: frozenset[str] | None = None, stem: bool = True
) -> list[str]:
    """Normalize the first sentence of a method comment into word tokens."""
    return tokenize(first_sentence(strip_html(comment_text)), stop_words, stem)


def raw_first_sentence(comment_text: str) -> str:
    return first_sentence(strip_html(comment_text)).lstrip("/* \t")


def filter_tuple(
    words: list[str],
    raw_sentence: str,
    note_prefixes: Iterable[str] = DEFAULT_NOTE_PREFIXES,
) -> FilterResult:
    """Decide whether a comment is a usable API summary."""
    sentence = raw_sentence.strip()
    upper = sentence.upper()
    if any(upper.startswith(tag) for tag in TASK_TAGS):
        return FilterResult(False, "task-annotation")
    m = _ALNUM_RUN.search(sentence)
    if m and m.start() == 0:
        first = m.group(0).lower()
        if any(first.startswith(p.lower()) for p in note_prefixes):
            return FilterResult(False, "explanatory")
    if len(words) < 2:
        return FilterResult(False, "too-short")
    return FilterResult(True)


def check_api(api: str) -> None:
    if api.count("#") != 1 or api.startswith("#") or api.endswith("#"):
        raise MalformedRecord(f"malformed API identifier {api!r}")


def api_allowed(api: str, allowlist: Iterable[str]) -> bool:
    qualified = api.split("#", 1)[0]
    return any(qualified.startswith(prefix + ".") for prefix in allowlist)


def build_tuple(
    record: MethodRecord,
    allowlist: tuple[str, ...],
    stop_words: frozenset[str] | None = None,
    note_prefixes: Iterable[str] = DEFAULT_NOTE_PREFIXES,
) -> WordApiTuple | None:
    for api in record.api_calls:
        check_api(api)
    apis = tuple(a for a in record.api_calls if api_allowed(a, allowlist))
    if not apis:
        return None
    words = normalize_comment(record.comment_text, stop_words)
    if not filter_tuple(words, raw_first_sentence(record.comment_text), note_prefixes).keep:
        return None
    return WordApiTuple(tuple(words), apis)


def build_tuples(
    records: Iterable[MethodRecord],
    allowlist: tuple[str, ...] | None = None,
    stop_words: frozenset[str] | None = None,
    note_prefixes: Iterable[str] = DEFAULT_NOTE_PREFIXES,
) -> Iterator[WordApiTuple]:
    """Yield one tuple per surviving record; malformed records are logged and skipped."""
    if allowlist is None:
        allowlist = load_allowlist()
    if not allowlist:
        raise ValueError("allowlist must not be empty")
    if stop_words is None:
        stop_words = default_stop_words()
    note_prefixes = tuple(note_prefixes)
    for i, record in enumerate(records):
        try:
            tup = build_tuple(record, allowlist, stop_words, note_prefixes)
        except MalformedRecord as exc:
            log.warning("record %d rejected: %s", i + 1, exc)
            continue
        if tup is not None:
            yield tup


@functools.cache
def default_stop_words() -> frozenset[str]:
    return load_stop_words()


# -- file formats ------------------------------------------------------------

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPE = re.compile(r"\\(.)")


def escape_field(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def unescape_field(text: str) -> str:
    table = {"t": "\t", "n": "\n", "r": "\r", "\\": "\\"}
    return _UNESCAPE.sub(lambda m: table.get(m.group(1), m.group(0)), text)


def parse_record_line(line: str) -> MethodRecord:
    line = line.rstrip("\n")
    if "\t" not in line:
        raise MalformedRecord("expected <comment>TAB<api calls>")
    comment, apis = line.split("\t", 1)
    return MethodRecord(unescape_field(comment), tuple(apis.split()))


def read_records(path) -> Iterator[MethodRecord]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.rstrip("\r\n"):
                continue
            try:
                yield parse_record_line(line)
            except MalformedRecord as exc:
                log.warning("%s:%d: %s", path, lineno, exc)


def format_record(record: MethodRecord) -> str:
    return f"{escape_field(record.comment_text)}\t{' '.join(record.api_calls)}"


def write_records(records: Iterable[MethodRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(format_record(r) + "\n")


def format_tuple(tup: WordApiTuple) -> str:
    return f"{' '.join(tup.words)}{TUPLE_SEPARATOR}{' '.join(tup.apis)}"


def parse_tuple_line(line: str) -> WordApiTuple:
    words, sep, apis = line.rstrip("\n").partition(TUPLE_SEPARATOR)
    if not sep:
        raise ValueError(f"missing {TUPLE_SEPARATOR.strip()!r} separator")
    return WordApiTuple(tuple(words.split()), tuple(apis.split()))


def write_tuples(tuples: Iterable[WordApiTuple], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in tuples:
            fh.write(format_tuple(t) + "\n")
            n += 1
    return n


def read_tuples(path) -> list[WordApiTuple]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(parse_tuple_line(line))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out
