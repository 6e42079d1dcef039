"""Chat-completion HTTP server for a trained adapter.

Exposes ``POST /v1/chat/completions`` with the request/response shape used by
OpenAI-style chat APIs, so any client speaking that protocol can query the
model.  Generation is always greedy, making responses deterministic.
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

import torch
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from transformers import AutoModelForCausalLM, AutoTokenizer

from .errors import ServingError
from .lora import load_adapter, read_adapter_config

DEFAULT_MAX_NEW_TOKENS = 64


def load_served_model(adapter_dir: str | Path):
    """(model, tokenizer, name) for a saved adapter directory."""
    adapter_dir = Path(adapter_dir)
    config = read_adapter_config(adapter_dir)
    base = config["base_model"]
    try:
        model = AutoModelForCausalLM.from_pretrained(base)
    except (OSError, ValueError) as exc:
        raise ServingError(f"cannot load base model {base!r}: {exc}") from exc
    tokenizer_dir = adapter_dir / "tokenizer"
    tokenizer = AutoTokenizer.from_pretrained(
        tokenizer_dir if tokenizer_dir.is_dir() else base
    )
    if tokenizer.pad_token_id is None:
        tokenizer.pad_token = tokenizer.eos_token
    load_adapter(model, adapter_dir)
    model.eval()
    return model, tokenizer, f"landre:{Path(base).name}"


def greedy_generate(model, tokenizer, prompt: str, max_new_tokens: int) -> tuple[str, int, int]:
    """Greedy continuation of ``prompt``; returns (text, prompt_tokens, completion_tokens)."""
    encoded = tokenizer(prompt, return_tensors="pt")
    with torch.no_grad():
        output = model.generate(
            input_ids=encoded["input_ids"],
            attention_mask=encoded["attention_mask"],
            max_new_tokens=max_new_tokens,
            do_sample=False,
            pad_token_id=tokenizer.pad_token_id,
            eos_token_id=tokenizer.eos_token_id,
        )
    prompt_length = encoded["input_ids"].shape[1]
    completion_ids = output[0][prompt_length:]
    text = tokenizer.decode(completion_ids, skip_special_tokens=True)
    return text.strip(), prompt_length, int(completion_ids.shape[0])


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"message": message, "type": "invalid_request_error"}},
    )


def create_app(model, tokenizer, model_name: str) -> FastAPI:
    app = FastAPI()
    lock = threading.Lock()
    counter = {"n": 0}

    @app.post("/v1/chat/completions")
    async def chat_completions(request: Request):
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError):
            return _error(400, "request body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "request body must be a JSON object")
        messages = body.get("messages")
        if not isinstance(messages, list) or not messages:
            return _error(400, "'messages' must be a non-empty list")
        for message in messages:
            if (
                not isinstance(message, dict)
                or not isinstance(message.get("role"), str)
                or not isinstance(message.get("content"), str)
            ):
                return _error(400, "each message needs string 'role' and 'content'")
        max_tokens = body.get("max_tokens", DEFAULT_MAX_NEW_TOKENS)
        if not isinstance(max_tokens, int) or max_tokens < 1:
            return _error(400, "'max_tokens' must be a positive integer")

        prompt = "\n".join(m["content"] for m in messages)
        with lock:
            text, prompt_tokens, completion_tokens = greedy_generate(
                model, tokenizer, prompt, max_tokens
            )
        counter["n"] += 1
        return {
            "id": f"chatcmpl-{counter['n']}",
            "object": "chat.completion",
            "created": int(time.time()),
            "model": body.get("model") or model_name,
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": text},
                    "finish_reason": "stop",
                }
            ],
            "usage": {
                "prompt_tokens": prompt_tokens,
                "completion_tokens": completion_tokens,
                "total_tokens": prompt_tokens + completion_tokens,
            },
        }

    return app


def serve(adapter_dir: str | Path, host: str = "127.0.0.1", port: int = 8000) -> None:
    """Load the adapter and serve it until interrupted."""
    import uvicorn

    model, tokenizer, name = load_served_model(adapter_dir)
    app = create_app(model, tokenizer, name)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except OSError as exc:
        raise ServingError(f"cannot bind {host}:{port}: {exc}") from exc
