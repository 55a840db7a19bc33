"""Causal-LM generation: answers with token log-probs, samples, prompt hidden states.

The generator works with any Hugging Face causal LM plus any tokenizer object
exposing ``encode``/``decode`` and optional ``eos_token_id``. Token log-probs
are the model's raw (temperature 1) log-probabilities of the tokens actually
generated, so they are always <= 0. Hidden states are taken at the last
prompt token, before generation begins, for every layer the model reports
(index 0 is the embedding output).
"""

from __future__ import annotations

import hashlib

import torch


def derived_seed(seed: int, *parts: str) -> int:
    digest = hashlib.sha256(":".join([str(seed), *parts]).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & 0x7FFF_FFFF_FFFF_FFFF


class ByteTokenizer:
    """UTF-8 byte-level tokenizer with BOS/EOS; no files, no downloads.

    Token ids 0..255 are raw bytes; 256 is BOS, 257 is EOS.
    """

    vocab_size = 258
    bos_token_id = 256
    eos_token_id = 257

    def encode(self, text: str) -> list[int]:
        return [self.bos_token_id, *text.encode("utf-8")]

    def decode(self, ids) -> str:
        data = bytes(i for i in ids if i < 256)
        return data.decode("utf-8", errors="replace")


class CausalGenerator:
    """Deterministic sampling front-end for a causal LM."""

    def __init__(self, model, tokenizer, max_new_tokens: int = 32):
        self.model = model.eval()
        self.tokenizer = tokenizer
        self.max_new_tokens = max_new_tokens
        self.eos_token_id = getattr(tokenizer, "eos_token_id", None)

    @torch.no_grad()
    def _generate(self, prompt: str, temperature: float, seed: int) -> tuple[str, list[float]]:
        ids = torch.tensor([self.tokenizer.encode(prompt)], dtype=torch.long)
        generator = torch.Generator(device="cpu").manual_seed(seed)
        produced: list[int] = []
        logprobs: list[float] = []
        past = None
        step_input = ids
        for step in range(self.max_new_tokens):
            out = self.model(step_input, past_key_values=past, use_cache=True)
            past = out.past_key_values
            logits = out.logits[0, -1].double()
            raw_logprobs = torch.log_softmax(logits, dim=-1)
            if step == 0 and self.eos_token_id is not None:
                logits = logits.clone()
                logits[self.eos_token_id] = float("-inf")  # at least one real token
            if temperature <= 0.0:
                token = int(torch.argmax(logits))
            else:
                probs = torch.softmax(logits / temperature, dim=-1)
                token = int(torch.multinomial(probs, 1, generator=generator))
            if self.eos_token_id is not None and token == self.eos_token_id:
                break
            produced.append(token)
            logprobs.append(min(float(raw_logprobs[token]), 0.0))
            step_input = torch.tensor([[token]], dtype=torch.long)
        return self.tokenizer.decode(produced), logprobs

    def answer(self, prompt: str, seed: int, temperature: float = 0.1) -> tuple[str, list[float]]:
        """Low-temperature answer plus its token log-probs."""
        return self._generate(prompt, temperature, derived_seed(seed, prompt, "answer"))

    def samples(self, prompt: str, k: int, seed: int, temperature: float = 1.0) -> list[str]:
        """K independent higher-temperature completions."""
        return [
            self._generate(prompt, temperature, derived_seed(seed, prompt, f"sample-{i}"))[0]
            for i in range(k)
        ]

    @torch.no_grad()
    def prompt_hidden_states(self, prompt: str) -> dict[int, list[float]]:
        """Per-layer representation at the last prompt token."""
        ids = torch.tensor([self.tokenizer.encode(prompt)], dtype=torch.long)
        out = self.model(ids, output_hidden_states=True)
        return {
            layer: state[0, -1].double().tolist()
            for layer, state in enumerate(out.hidden_states)
        }
