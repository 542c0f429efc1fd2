"""
Shared fixtures: network builders and small series settings.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from lib.analysis.channel import INF, FadingParams
from lib.analysis.specfun import SeriesConfig
from lib.auto_run.scenario import NetworkConfig
from lib.config import DefaultConfig


def make_network(
    relays: int = 2,
    receivers: int = 2,
    eavesdroppers: int = 2,
    antennas_rx: int = 2,
    antennas_eve: int = 2,
    sp: FadingParams = None,
    pq: FadingParams = None,
    pw: FadingParams = None,
) -> NetworkConfig:
    pq = pq or FadingParams(1.0, 1.0, INF, 10.0)
    return NetworkConfig(
        relays=relays,
        receivers=receivers,
        eavesdroppers=eavesdroppers,
        antennas_rx=antennas_rx,
        antennas_eve=antennas_eve,
        hop_sp=sp or pq,
        hop_pq=pq,
        hop_pw=pw or FadingParams(1.0, 1.0, INF, 0.1),
    )


@pytest.fixture
def network():
    return make_network


@pytest.fixture
def symmetric_network():
    hop = FadingParams(1.0, 1.0, 2.0, 3.0)
    return make_network(relays=2, receivers=1, eavesdroppers=1, sp=hop, pq=hop, pw=hop)


@pytest.fixture
def trunc():
    return SeriesConfig()


@pytest.fixture
def write_config(tmp_path):
    def write(document: dict, name: str = "scenario.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return write


@pytest.fixture(autouse=True)
def log_to_tmp(tmp_path, monkeypatch):
    monkeypatch.setattr(DefaultConfig, "LOG_FILE", str(tmp_path / "engine.log"))
