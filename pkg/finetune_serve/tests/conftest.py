"""Shared fixtures: a patterned example set, one trained artifact, and a
helper that runs a serving app on an ephemeral port."""

from __future__ import annotations

import json
import random
import threading
import time
from contextlib import contextmanager
from pathlib import Path

import pytest
import uvicorn

from todserve.model import GenerationEngine, load_artifact
from todserve.training import TrainingResult, desk_preset, train

_CITIES = ["austin", "boston", "chicago", "denver", "seattle", "portland",
           "miami", "atlanta"]
_CUISINES = ["italian", "mexican", "thai", "indian", "french", "greek"]
_NAMES = ["lotus cafe", "blue door", "casa verde", "north star", "old mill"]


def patterned_lines(count: int, seed: int = 7) -> list[str]:
    """A learnable synthetic example set: API-call and response targets
    built from small closed vocabularies, in the example-set JSONL shape."""
    rng = random.Random(seed)
    lines = []
    for index in range(count):
        if index % 2 == 0:
            city, cuisine = rng.choice(_CITIES), rng.choice(_CUISINES)
            prompt = f"[user] I want {cuisine} food in {city} [generate] api"
            target = ("ApiCall(method='FindRestaurants', parameters="
                      f"{{'city': '{city}', 'cuisine': '{cuisine}'}})")
        else:
            name, city = rng.choice(_NAMES), rng.choice(_CITIES)
            prompt = f"[results] name={name} city={city} [generate] response"
            target = f"I found {name} in {city}."
        lines.append(json.dumps({"example_id": f"ex/{index:03d}",
                                 "prompt": prompt, "target_text": target}))
    return lines


@pytest.fixture(scope="session")
def example_file(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("examples") / "examples.jsonl"
    path.write_text("\n".join(patterned_lines(200)) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def trained(example_file, tmp_path_factory) -> TrainingResult:
    out = tmp_path_factory.mktemp("artifact") / "run"
    return train(example_file, out, desk_preset())


@pytest.fixture(scope="session")
def engine(trained) -> GenerationEngine:
    return load_artifact(trained.artifact_dir)


@contextmanager
def running_app(app):
    """Serve a FastAPI app on an ephemeral port; yields the base URL."""
    config = uvicorn.Config(app, host="127.0.0.1", port=0,
                            log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        deadline = time.monotonic() + 30
        while not server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("test server did not start")
            if not thread.is_alive():
                raise RuntimeError("test server thread died during startup")
            time.sleep(0.01)
        port = server.servers[0].sockets[0].getsockname()[1]
        yield f"http://127.0.0.1:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=10)


@pytest.fixture
def run_app():
    return running_app
