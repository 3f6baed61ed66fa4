"""Prompt assembly determinism and the LLM client adapter."""

import httpx
import pytest

from cytorag import (
    CaseMetadata,
    DEFAULT_TEMPLATE,
    LlmClientConfig,
    PromptTemplate,
    RetrievedExample,
    assemble_prompt,
    examples_from_neighbors,
    llm_interpret,
    top_k,
)
from cytorag.errors import (
    EmptyContextError,
    EndpointError,
    EndpointUnreachableError,
    LlmTimeoutError,
    TemplateError,
)
from cytorag.llm import HttpLlmClient, StubLlmClient
from cytorag.prompting import load_template, load_template_dir, resolve_template


def metadata(**overrides):
    base = dict(
        cytology_diagnosis="atypical follicular cells",
        surgical_diagnosis="papillary thyroid carcinoma",
        bethesda="III",
        malignancy="malignant",
        interpretation="crowded follicular groups",
        stain="diff-quik",
        magnification=40,
    )
    base.update(overrides)
    return CaseMetadata(**base)


def example(rank, similarity=0.9, diagnosis="papillary thyroid carcinoma"):
    return RetrievedExample(
        rank=rank,
        similarity=similarity,
        cytology_diagnosis=diagnosis,
        bethesda="VI",
        interpretation=f"example {rank} interpretation",
    )


class TestAssemblePrompt:
    def test_five_examples_five_blocks(self):
        examples = [example(i, similarity=1.0 - i / 10) for i in range(1, 6)]
        bundle = assemble_prompt("q1", metadata(), examples)
        assert bundle.example_count == 5
        assert bundle.rendered_text.count("Example ") == 5
        positions = [bundle.rendered_text.index(f"Example {i} ") for i in range(1, 6)]
        assert positions == sorted(positions)

    def test_zero_examples_rejected(self):
        with pytest.raises(EmptyContextError):
            assemble_prompt("q1", metadata(), [])

    def test_byte_determinism(self):
        examples = [example(1), example(2)]
        first = assemble_prompt("q1", metadata(), examples)
        second = assemble_prompt("q1", metadata(), examples)
        assert first.rendered_text == second.rendered_text
        assert first.template_hash == second.template_hash

    def test_similarity_four_decimals(self):
        bundle = assemble_prompt("q1", metadata(), [example(1, similarity=0.97463184)])
        assert "similarity 0.9746" in bundle.rendered_text

    def test_permuting_neighbors_changes_bytes(self):
        a = example(1, diagnosis="graves disease")
        b = example(2, diagnosis="follicular adenoma")
        swapped_a = RetrievedExample(1, b.similarity, b.cytology_diagnosis, b.bethesda, b.interpretation)
        swapped_b = RetrievedExample(2, a.similarity, a.cytology_diagnosis, a.bethesda, a.interpretation)
        original = assemble_prompt("q1", metadata(), [a, b])
        permuted = assemble_prompt("q1", metadata(), [swapped_a, swapped_b])
        assert original.rendered_text != permuted.rendered_text

    def test_prompt_grows_with_examples(self):
        sizes = [
            len(assemble_prompt("q1", metadata(), [example(i) for i in range(1, n + 1)]).rendered_text)
            for n in (1, 2, 3, 4, 5)
        ]
        assert sizes == sorted(set(sizes))

    def test_unknown_placeholder_rejected_at_construction(self):
        with pytest.raises(TemplateError):
            PromptTemplate(
                preamble="",
                example_block="{rank} {nonsense}\n",
                query_block="",
                instruction="",
            )

    def test_examples_from_neighbors(self, small_store):
        snapshot = small_store.snapshot()
        neighbors = top_k(snapshot.case("a").embeddings["uni"], 2, snapshot)
        examples = examples_from_neighbors(neighbors, snapshot)
        assert [e.rank for e in examples] == [1, 2]
        assert examples[0].cytology_diagnosis.startswith("cytology of ")


class TestTemplateFiles:
    TEMPLATE_TEXT = (
        "[preamble]\n"
        "Intro line.\n"
        "[example]\n"
        "#{rank} sim={similarity} dx={diagnosis} cat={bethesda} note={interpretation}\n"
        "[query]\n"
        "case {case_id} stain {stain} at {magnification}x\n"
        "[instruction]\n"
        "Answer.\n"
    )

    def test_load_and_render(self, tmp_path):
        path = tmp_path / "compact.txt"
        path.write_text(self.TEMPLATE_TEXT)
        template = load_template(path)
        bundle = assemble_prompt("q9", metadata(), [example(1)], template)
        assert "#1 sim=0.9000" in bundle.rendered_text
        assert "case q9 stain diff-quik at 40x" in bundle.rendered_text

    def test_missing_section(self, tmp_path):
        path = tmp_path / "broken.txt"
        path.write_text("[preamble]\nhi\n[example]\n{rank}\n")
        with pytest.raises(TemplateError):
            load_template(path)

    def test_bad_placeholder_in_file(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text(self.TEMPLATE_TEXT.replace("{rank}", "{rankk}"))
        with pytest.raises(TemplateError):
            load_template(path)

    def test_template_dir_includes_default(self, tmp_path):
        (tmp_path / "compact.txt").write_text(self.TEMPLATE_TEXT)
        templates = load_template_dir(tmp_path)
        assert set(templates) == {"default", "compact"}
        assert resolve_template(templates, None) is DEFAULT_TEMPLATE

    def test_hash_tracks_content(self, tmp_path):
        (tmp_path / "one.txt").write_text(self.TEMPLATE_TEXT)
        (tmp_path / "two.txt").write_text(self.TEMPLATE_TEXT.replace("Intro", "Other"))
        templates = load_template_dir(tmp_path)
        assert templates["one"].content_hash != templates["two"].content_hash


def bundle_for_llm():
    return assemble_prompt("q1", metadata(), [example(1), example(2)])


class TestStubClient:
    def test_contains_template_hash_and_is_deterministic(self):
        bundle = bundle_for_llm()
        first = StubLlmClient().interpret(bundle)
        second = llm_interpret(bundle, LlmClientConfig(stub=True))
        assert bundle.template_hash in first.text
        assert first.text == second.text
        assert first.status == 200


class TestHttpClient:
    def make_client(self, handler, **config_overrides):
        config = LlmClientConfig(
            endpoint="http://llm.test/v1/chat",
            model="test-model",
            stub=False,
            timeout_s=1.0,
            max_retries=config_overrides.pop("max_retries", 0),
            backoff_base_s=0.001,
            **config_overrides,
        )
        return HttpLlmClient(config, transport=httpx.MockTransport(handler))

    def test_success_passes_text_through(self):
        def handler(request):
            return httpx.Response(
                200, json={"choices": [{"message": {"content": "benign, category II"}}]}
            )

        client = self.make_client(handler)
        response = client.interpret(bundle_for_llm())
        assert response.text == "benign, category II"
        assert response.attempts == 1

    def test_server_error_without_retries(self):
        def handler(request):
            return httpx.Response(500, text="boom")

        client = self.make_client(handler, max_retries=0)
        with pytest.raises(EndpointError) as err:
            client.interpret(bundle_for_llm())
        assert err.value.details["status"] == 500
        assert err.value.details["attempts"] == 1

    def test_server_error_retried_then_succeeds(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] < 3:
                return httpx.Response(503, text="busy")
            return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

        client = self.make_client(handler, max_retries=2)
        response = client.interpret(bundle_for_llm())
        assert response.attempts == 3
        assert calls["n"] == 3

    def test_client_error_is_not_retried(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(404, text="no such model")

        client = self.make_client(handler, max_retries=3)
        with pytest.raises(EndpointError):
            client.interpret(bundle_for_llm())
        assert calls["n"] == 1

    def test_timeout_after_exactly_retries_plus_one(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            raise httpx.ReadTimeout("slow")

        client = self.make_client(handler, max_retries=2)
        with pytest.raises(LlmTimeoutError) as err:
            client.interpret(bundle_for_llm())
        assert calls["n"] == 3
        assert err.value.details["attempts"] == 3

    def test_unreachable_endpoint(self):
        def handler(request):
            raise httpx.ConnectError("refused")

        client = self.make_client(handler, max_retries=1)
        with pytest.raises(EndpointUnreachableError):
            client.interpret(bundle_for_llm())

    def test_request_body_shape(self):
        import json

        seen = {}

        def handler(request):
            seen["body"] = json.loads(request.read().decode("utf-8"))
            return httpx.Response(200, json={"choices": [{"message": {"content": "x"}}]})

        client = self.make_client(handler)
        bundle = bundle_for_llm()
        client.interpret(bundle)
        assert seen["body"]["model"] == "test-model"
        assert seen["body"]["temperature"] == 0.0
        assert seen["body"]["messages"] == [{"role": "user", "content": bundle.rendered_text}]
