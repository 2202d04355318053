"""Pydantic request/response models for the teleoperation HTTP API."""

from __future__ import annotations

from pydantic import BaseModel, Field


class SceneInfo(BaseModel):
    name: str
    path: str
    cameras: list[str]
    objects: list[str]
    robots: list[str]


class TaskInfo(BaseModel):
    name: str
    max_steps: int
    cameras: list[str]


class CreateSessionRequest(BaseModel):
    scene: str
    task: str
    seed: int = 0
    cameras: list[str] = Field(default_factory=list)  # empty = task cameras


class SessionInfo(BaseModel):
    id: str
    scene: str
    task: str
    seed: int
    step_index: int
    state: str
    cameras: list[str]
    recording: bool
    mode: str


class DatasetList(BaseModel):
    session: str
    datasets: list[str]


class ErrorDetail(BaseModel):
    message: str
