"""Article records: the raw text corpus the tool annotates and embeds.

Input CSV format: header `date,article_id,title,tag,content`, ISO-8601
dates, UTF-8. Content must be non-empty.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass

_HEADER = ("date", "article_id", "title", "tag", "content")


@dataclass(frozen=True)
class ArticleRecord:
    date: dt.date
    article_id: str
    title: str
    tag: str
    content: str

    def __post_init__(self):
        if not self.content.strip():
            raise ValueError(f"article {self.article_id}: empty content")

    @property
    def text(self) -> str:
        return f"{self.title}. {self.content}" if self.title else self.content


def load_articles(path) -> list[ArticleRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != _HEADER:
            raise ValueError(f"{path}: header must be {','.join(_HEADER)!r}")
        records = []
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ValueError(f"{path}: line {lineno}: expected 5 fields, got {len(row)}")
            date_s, article_id, title, tag, content = row
            try:
                date = dt.date.fromisoformat(date_s.strip())
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: bad date {date_s!r}") from None
            key = (date, article_id)
            if key in seen:
                raise ValueError(f"{path}: line {lineno}: duplicate (date, article_id) {key}")
            seen.add(key)
            try:
                records.append(ArticleRecord(date, article_id, title, tag, content))
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return records
