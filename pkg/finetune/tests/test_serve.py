"""HTTP interface: response shape, determinism, and request validation."""

import pytest
from fastapi.testclient import TestClient

ROUTE = "/v1/chat/completions"


@pytest.fixture(scope="module")
def client(toy_run):
    from landre.serve import create_app, load_served_model

    model, tokenizer, name = load_served_model(toy_run.adapter_dir)
    return TestClient(create_app(model, tokenizer, name))


def _chat(client, content, **extra):
    payload = {"messages": [{"role": "user", "content": content}], **extra}
    return client.post(ROUTE, json=payload)


def test_completion_has_the_standard_shape(client, toy_examples):
    example = toy_examples[0]
    response = _chat(client, example.input_text, model="probe", max_tokens=16)
    assert response.status_code == 200
    body = response.json()
    assert body["object"] == "chat.completion"
    assert body["model"] == "probe"
    assert body["id"].startswith("chatcmpl-")
    choice = body["choices"][0]
    assert choice["message"]["role"] == "assistant"
    assert choice["message"]["content"] == example.output_text
    assert choice["finish_reason"] == "stop"
    usage = body["usage"]
    assert usage["prompt_tokens"] > 0
    assert usage["completion_tokens"] > 0
    assert usage["total_tokens"] == usage["prompt_tokens"] + usage["completion_tokens"]


def test_served_model_answers_every_training_example(client, toy_examples):
    for example in toy_examples:
        body = _chat(client, example.input_text, max_tokens=16).json()
        assert body["choices"][0]["message"]["content"] == example.output_text


def test_generation_is_deterministic(client, toy_examples):
    prompt = toy_examples[3].input_text
    first = _chat(client, prompt).json()["choices"][0]["message"]["content"]
    second = _chat(client, prompt).json()["choices"][0]["message"]["content"]
    assert first == second


def test_model_name_falls_back_to_the_served_adapter(client):
    body = _chat(client, "| hello |").json()
    assert body["model"].startswith("landre:")


def test_messages_are_joined_in_order(client, toy_examples):
    payload = {
        "messages": [
            {"role": "system", "content": ""},
            {"role": "user", "content": toy_examples[0].input_text},
        ]
    }
    response = client.post(ROUTE, json=payload)
    assert response.status_code == 200
    assert isinstance(response.json()["choices"][0]["message"]["content"], str)


def test_max_tokens_bounds_the_completion(client, toy_examples):
    body = _chat(client, toy_examples[0].input_text, max_tokens=2).json()
    assert body["usage"]["completion_tokens"] <= 2


def _assert_invalid(response, fragment):
    assert response.status_code == 400
    error = response.json()["error"]
    assert error["type"] == "invalid_request_error"
    assert fragment in error["message"]


def test_rejects_a_non_json_body(client):
    response = client.post(ROUTE, content=b"{not json", headers={"Content-Type": "application/json"})
    _assert_invalid(response, "not valid JSON")


def test_rejects_a_non_object_body(client):
    response = client.post(ROUTE, json=["nope"])
    _assert_invalid(response, "JSON object")


def test_rejects_missing_or_empty_messages(client):
    _assert_invalid(client.post(ROUTE, json={}), "messages")
    _assert_invalid(client.post(ROUTE, json={"messages": []}), "messages")
    _assert_invalid(client.post(ROUTE, json={"messages": "hi"}), "messages")


def test_rejects_malformed_message_items(client):
    _assert_invalid(
        client.post(ROUTE, json={"messages": [{"role": "user"}]}), "content"
    )
    _assert_invalid(
        client.post(ROUTE, json={"messages": [{"role": 1, "content": "x"}]}), "role"
    )


def test_rejects_a_bad_max_tokens(client):
    _assert_invalid(_chat(client, "x", max_tokens=0), "max_tokens")
    _assert_invalid(_chat(client, "x", max_tokens="64"), "max_tokens")
