#!/usr/bin/env python3
"""Encoder worker for `psd embed --model worker:<name>`.

Loads a Hugging Face encoder and answers line-delimited JSON requests on
stdin. The first line written is a handshake:

    {"model_id", "num_layers", "hidden_dim", "max_tokens", "fingerprint"}

Requests:

    {"op": "encode", "id", "tokens", "head": [start, end], "max_tokens"}
        -> {"ok": true, "rows": H+1, "cols": d} + rows*cols little-endian f32
    {"op": "fingerprint"} -> {"ok": true, "fingerprint": "..."}

Errors are answered with {"ok": false, "error": "..."}.
"""

import argparse
import hashlib
import json
import sys

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer
from transformers.utils import logging as hf_logging


def fingerprint(model):
    h = hashlib.sha256()
    h.update(b"psd-hf-encoder-v1\n")
    h.update(model.config.to_json_string(use_diff=False).encode())
    for name, tensor in sorted(model.state_dict().items()):
        if name.startswith("pooler."):  # unused, and randomly filled when absent
            continue
        h.update(name.encode())
        h.update(tensor.detach().to(torch.float32).cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def centered_window(total, head_begin, head_end, budget):
    head_len = head_end - head_begin
    if head_len > budget:
        raise ValueError(f"head needs {head_len} pieces but the window holds {budget}")
    if total <= budget:
        return 0, total
    spare = budget - head_len
    left = spare // 2
    right = spare - left
    if head_begin < left:
        right += left - head_begin
        left = head_begin
    if total - head_end < right:
        left += right - (total - head_end)
        right = total - head_end
    return head_begin - left, head_end + right


class Worker:
    def __init__(self, name):
        torch.set_grad_enabled(False)
        hf_logging.set_verbosity_error()
        hf_logging.disable_progress_bar()
        self.tokenizer = AutoTokenizer.from_pretrained(name)
        self.model = AutoModel.from_pretrained(name, dtype=torch.float32)
        self.model.eval()
        cfg = self.model.config
        limit = getattr(cfg, "max_position_embeddings", 512)
        if getattr(cfg, "model_type", "") in ("roberta", "xlm-roberta", "camembert"):
            limit -= 2
        tok_limit = self.tokenizer.model_max_length
        if isinstance(tok_limit, int) and 0 < tok_limit < 1_000_000:
            limit = min(limit, tok_limit)
        self.max_tokens = limit
        self.prefix = self.tokenizer.cls_token_id
        if self.prefix is None:
            self.prefix = self.tokenizer.bos_token_id
        self.suffix = self.tokenizer.sep_token_id
        if self.suffix is None:
            self.suffix = self.tokenizer.eos_token_id
        self.info = {
            "model_id": name,
            "num_layers": cfg.num_hidden_layers if hasattr(cfg, "num_hidden_layers") else cfg.n_layers,
            "hidden_dim": cfg.hidden_size if hasattr(cfg, "hidden_size") else cfg.dim,
            "max_tokens": self.max_tokens,
            "fingerprint": fingerprint(self.model),
        }

    def pieces(self, tokens):
        enc = self.tokenizer(tokens, is_split_into_words=True, add_special_tokens=False)
        ids = enc["input_ids"]
        words = enc.word_ids()
        return ids, words

    def encode(self, tokens, head, max_tokens):
        start, end = head
        if not (0 <= start <= end < len(tokens)):
            raise ValueError("invalid head span")
        ids, words = self.pieces(tokens)
        positions = [i for i, w in enumerate(words) if w is not None and start <= w <= end]
        if not positions:
            raise ValueError("head tokens map to zero subword pieces")
        head_begin, head_end = positions[0], positions[-1] + 1
        budget = min(max_tokens or self.max_tokens, self.max_tokens) - 2
        lo, hi = centered_window(len(ids), head_begin, head_end, budget)
        window = [self.prefix] + ids[lo:hi] + [self.suffix]
        out = self.model(
            input_ids=torch.tensor([window]),
            attention_mask=torch.ones(1, len(window), dtype=torch.long),
            output_hidden_states=True,
        )
        states = torch.stack(out.hidden_states)[:, 0]  # (H+1, seq, d)
        rows = [p - lo + 1 for p in positions]
        pooled = states[:, rows, :].mean(dim=1)
        return pooled.to(torch.float32).numpy()


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--model", required=True, help="model id or local directory")
    args = parser.parse_args()

    out = sys.stdout.buffer
    sys.stdout = sys.stderr  # library chatter must not corrupt the protocol
    worker = Worker(args.model)

    def reply(obj, payload=b""):
        out.write(json.dumps(obj).encode() + b"\n")
        out.write(payload)
        out.flush()

    reply(worker.info)
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
            if req.get("op") == "fingerprint":
                reply({"ok": True, "fingerprint": fingerprint(worker.model)})
            elif req.get("op") == "encode":
                m = worker.encode(req["tokens"], req["head"], req.get("max_tokens", 0))
                m = np.ascontiguousarray(m, dtype="<f4")
                reply({"ok": True, "rows": m.shape[0], "cols": m.shape[1]}, m.tobytes())
            else:
                reply({"ok": False, "error": f"unknown op {req.get('op')!r}"})
        except Exception as exc:  # reported to the caller, never fatal
            reply({"ok": False, "error": str(exc)})


if __name__ == "__main__":
    main()
