"""Pydantic request/response models for the review service."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field

IssueType = Literal["offtopic", "duplicates", "labelerrors"]
Verdict = Literal["confirmed", "rejected"]
Key = Union[int, tuple[int, int]]


class RankingInfo(BaseModel):
    issue_type: IssueType
    total_candidates: int
    listed: int
    truncated: bool


class PageEntry(BaseModel):
    rank: int
    key: Key
    score: float
    media: list[Optional[str]]
    verdict: Optional[str] = None


class Page(BaseModel):
    issue_type: IssueType
    offset: int
    limit: int
    total: int
    entries: list[PageEntry]


class ConfirmationIn(BaseModel):
    issue_type: IssueType
    key: Key
    verdict: Verdict
    annotator: str = Field(min_length=1)
    timestamp_ms: Optional[int] = None


class ConfirmationAck(BaseModel):
    ok: bool
    record: dict


class WindowPoint(BaseModel):
    start_rank: int
    reviewed: int
    confirmed: int
    fraction: Optional[float] = None


class Stats(BaseModel):
    issue_type: IssueType
    reviewed: int
    confirmed: int
    max_reviewed_rank: int
    windows: list[WindowPoint]
    precision: Optional[float] = None
    fe: Optional[float] = None
    p_value: Optional[float] = None
    head_outcomes: int
    baseline_outcomes: int
    baseline_keys: list[Key]


class ThresholdPoint(BaseModel):
    issue_type: IssueType
    rank: int
    reviewed: int
    confirmed: int
    precision: Optional[float] = None
    fe: Optional[float] = None
