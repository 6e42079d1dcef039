"""End-to-end: serve the trained toy model and benchmark it over live HTTP."""

import socket
import subprocess
import sys
import threading
import time

import pytest
import requests
import uvicorn

from conftest import TOY_CORPUS


@pytest.fixture(scope="module")
def live_url(toy_run):
    from landre.serve import create_app, load_served_model

    model, tokenizer, name = load_served_model(toy_run.adapter_dir)
    app = create_app(model, tokenizer, name)
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 30
    while not server.started:
        if time.monotonic() > deadline:
            pytest.fail("server did not start within 30s")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}/v1"
    server.should_exit = True
    thread.join(timeout=10)


def test_live_wire_contract(live_url, toy_examples):
    example = toy_examples[0]
    response = requests.post(
        f"{live_url}/chat/completions",
        json={
            "model": "toy",
            "messages": [{"role": "user", "content": example.input_text}],
            "temperature": 0.0,
            "max_tokens": 64,
        },
        timeout=60,
    )
    assert response.status_code == 200
    assert response.json()["choices"][0]["message"]["content"] == example.output_text


def _benchmark(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "drebench.cli", *args],
        cwd=cwd,
        capture_output=True,
        text=True,
        timeout=300,
    )


def test_served_model_scores_perfectly_under_the_benchmark(live_url, tmp_path):
    run = _benchmark(
        [
            "run",
            "--corpus", str(TOY_CORPUS),
            "--split-name", "toy",
            "--strategy", "landre",
            "--endpoint", live_url,
            "--run-id", "toy-live",
            "--runs-dir", "runs",
        ],
        tmp_path,
    )
    assert run.returncode == 0, run.stderr
    score = _benchmark(["score", "--run", "toy-live", "--runs-dir", "runs"], tmp_path)
    assert score.returncode == 0, score.stderr
    assert "f1: 1.0000" in score.stdout
    assert "precision: 1.0000" in score.stdout
    assert "recall: 1.0000" in score.stdout
