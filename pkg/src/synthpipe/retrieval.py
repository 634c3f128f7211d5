"""Passage corpus ingestion, BM25 inverted index, and keyword extraction.

Tokenization is lowercase Unicode word segmentation with no stemming or
stopword removal, so rankings are reproducible across machines.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import pickle
import re
from collections import Counter
from dataclasses import dataclass, field

from . import gateway
from .prompts import render_prompt, format_demos

log = logging.getLogger(__name__)

BM25_K1 = 1.2
BM25_B = 0.75

INDEX_CACHE_VERSION = 1

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)

PASSAGE_SOURCES = ("wikipedia", "wikihow", "stackexchange", "custom")


class CorpusError(ValueError):
    pass


class KeywordError(RuntimeError):
    pass


def tokenize(text):
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Passage:
    id: str
    source: str
    text: str
    token_count: int


@dataclass
class KeywordSet:
    keywords: list[str]


@dataclass
class CorpusIndex:
    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    doc_count: int
    avg_doc_length: float
    document_frequencies: dict[str, int]
    passages: dict[str, Passage] = field(default_factory=dict)


def ingest(paths):
    """Build a CorpusIndex from line-delimited passage files.

    Each record needs id and text; source defaults to "custom". Malformed
    records are reported and skipped; duplicate ids and empty corpora are
    hard errors.
    """
    passages = {}
    for path in paths:
        try:
            fh = open(path, encoding="utf-8")
        except OSError as exc:
            raise CorpusError(f"cannot read corpus file {path}: {exc}")
        with fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    pid = str(rec["id"])
                    text = rec["text"]
                except (ValueError, KeyError, TypeError) as exc:
                    log.error("%s record %d is malformed, skipping: %s",
                              path, lineno, exc)
                    continue
                if not text or not text.strip():
                    log.error("%s record %d has empty text, skipping",
                              path, lineno)
                    continue
                if pid in passages:
                    raise CorpusError(f"duplicate passage id {pid!r}")
                source = rec.get("source", "custom")
                if source not in PASSAGE_SOURCES:
                    source = "custom"
                tokens = tokenize(text)
                passages[pid] = Passage(id=pid, source=source, text=text,
                                        token_count=len(tokens))
    if not passages:
        raise CorpusError("corpus is empty; retrieval is impossible")

    postings = {}
    doc_lengths = {}
    document_frequencies = {}
    for pid, passage in passages.items():
        tokens = tokenize(passage.text)
        doc_lengths[pid] = len(tokens)
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((pid, tf))
            document_frequencies[term] = document_frequencies.get(term, 0) + 1
    doc_count = len(passages)
    avg_doc_length = sum(doc_lengths.values()) / doc_count
    return CorpusIndex(postings=postings, doc_lengths=doc_lengths,
                       doc_count=doc_count, avg_doc_length=avg_doc_length,
                       document_frequencies=document_frequencies,
                       passages=passages)


def idf(df, doc_count):
    # Shifted by one inside the log so rare-term weights stay positive.
    return math.log(1.0 + (doc_count - df + 0.5) / (df + 0.5))


def score_query(keywords, index):
    """BM25 scores for every document sharing a term with the query."""
    query_terms = tokenize(" ".join(keywords.keywords))
    scores = {}
    for term in query_terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        term_idf = idf(index.document_frequencies[term], index.doc_count)
        for pid, tf in plist:
            dl = index.doc_lengths[pid]
            denom = tf + BM25_K1 * (
                1 - BM25_B + BM25_B * dl / index.avg_doc_length)
            scores[pid] = scores.get(pid, 0.0) + \
                term_idf * tf * (BM25_K1 + 1) / denom
    return scores


def retrieve(keywords, index, top_k):
    """BM25 ranking of all keywords joined as one query.

    Only documents containing at least one query term score; ties break by
    ascending passage id.
    """
    if index.doc_count == 0:
        raise CorpusError("index is empty")
    scores = score_query(keywords, index)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [index.passages[pid] for pid, _ in ranked[:top_k]]


def extract_keywords(task, instructor, temperature, max_tokens=None):
    """One instructor call that names the task's domain keywords."""
    context = {"description": task.description_instruction}
    if task.demos:
        context["demos"] = format_demos(task.demos)
    prompt = render_prompt("keyword", context)
    result = gateway.complete(
        gateway.CompletionRequest(request_index=0, prompt=prompt,
                                  temperature=temperature,
                                  max_tokens=max_tokens),
        instructor)
    reply = result.completions[0]
    keywords = [k.strip() for part in reply.split("\n")
                for k in part.split(",")]
    keywords = [k for k in keywords if k]
    if not keywords:
        raise KeywordError("instructor returned no keywords")
    return KeywordSet(keywords=keywords)


def corpus_content_hash(paths):
    h = hashlib.sha256()
    for path in sorted(paths):
        with open(path, "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()


def save_index(index, path, corpus_hash):
    with open(path, "wb") as fh:
        pickle.dump({"version": INDEX_CACHE_VERSION,
                     "corpus_hash": corpus_hash,
                     "index": index}, fh)


def load_index(path, corpus_hash):
    """Return the cached index, or None when stale or unreadable."""
    try:
        with open(path, "rb") as fh:
            blob = pickle.load(fh)
    except (OSError, pickle.UnpicklingError, EOFError):
        return None
    if blob.get("version") != INDEX_CACHE_VERSION:
        return None
    if blob.get("corpus_hash") != corpus_hash:
        return None
    return blob["index"]
