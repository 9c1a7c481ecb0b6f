#!/usr/bin/env python3
"""Exports a BERT or DistilBERT checkpoint for `psd embed --model native:<dir>`.

Writes config.json, vocab.txt and weights.bin (PSDW format) into the output
directory.

    python3 tools/export_encoder.py bert-base-uncased enc/bert-base
"""

import argparse
import json
import os
import struct

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer


def bert_tensors(sd, layers, prefix=""):
    p = prefix
    t = {
        "embeddings.word": sd[p + "embeddings.word_embeddings.weight"],
        "embeddings.position": sd[p + "embeddings.position_embeddings.weight"],
        "embeddings.token_type": sd[p + "embeddings.token_type_embeddings.weight"],
        "embeddings.norm.gamma": sd[p + "embeddings.LayerNorm.weight"],
        "embeddings.norm.beta": sd[p + "embeddings.LayerNorm.bias"],
    }
    for i in range(layers):
        src = f"{p}encoder.layer.{i}."
        dst = f"layer.{i}."
        pairs = {
            "attention.query": "attention.self.query",
            "attention.key": "attention.self.key",
            "attention.value": "attention.self.value",
            "attention.output": "attention.output.dense",
            "ffn.in": "intermediate.dense",
            "ffn.out": "output.dense",
        }
        for ours, theirs in pairs.items():
            t[dst + ours + ".weight"] = sd[src + theirs + ".weight"]
            t[dst + ours + ".bias"] = sd[src + theirs + ".bias"]
        for ours, theirs in {"attention.norm": "attention.output.LayerNorm",
                             "ffn.norm": "output.LayerNorm"}.items():
            t[dst + ours + ".gamma"] = sd[src + theirs + ".weight"]
            t[dst + ours + ".beta"] = sd[src + theirs + ".bias"]
    return t


def distilbert_tensors(sd, layers, dim):
    t = {
        "embeddings.word": sd["embeddings.word_embeddings.weight"],
        "embeddings.position": sd["embeddings.position_embeddings.weight"],
        "embeddings.token_type": torch.zeros(1, dim),
        "embeddings.norm.gamma": sd["embeddings.LayerNorm.weight"],
        "embeddings.norm.beta": sd["embeddings.LayerNorm.bias"],
    }
    for i in range(layers):
        src = f"transformer.layer.{i}."
        dst = f"layer.{i}."
        pairs = {
            "attention.query": "attention.q_lin",
            "attention.key": "attention.k_lin",
            "attention.value": "attention.v_lin",
            "attention.output": "attention.out_lin",
            "ffn.in": "ffn.lin1",
            "ffn.out": "ffn.lin2",
        }
        for ours, theirs in pairs.items():
            t[dst + ours + ".weight"] = sd[src + theirs + ".weight"]
            t[dst + ours + ".bias"] = sd[src + theirs + ".bias"]
        for ours, theirs in {"attention.norm": "sa_layer_norm",
                             "ffn.norm": "output_layer_norm"}.items():
            t[dst + ours + ".gamma"] = sd[src + theirs + ".weight"]
            t[dst + ours + ".beta"] = sd[src + theirs + ".bias"]
    return t


def write_weights(path, tensors):
    table, blobs, offset = [], [], 0
    for name, tensor in tensors.items():
        a = tensor.detach().to(torch.float32).cpu().numpy()
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        a = np.ascontiguousarray(a, dtype="<f4")
        table.append({"name": name, "shape": list(a.shape), "offset": offset})
        blobs.append(a.tobytes())
        offset += a.nbytes
    header = json.dumps({"tensors": table}).encode()
    with open(path, "wb") as f:
        f.write(b"PSDW")
        f.write(struct.pack("<IQ", 1, len(header)))
        f.write(header)
        for b in blobs:
            f.write(b)


def export(name, out_dir, model_id=None):
    model = AutoModel.from_pretrained(name, dtype=torch.float32)
    tokenizer = AutoTokenizer.from_pretrained(name)
    cfg = model.config
    sd = model.state_dict()
    if cfg.model_type == "bert":
        layers, dim = cfg.num_hidden_layers, cfg.hidden_size
        config = {
            "vocab_size": cfg.vocab_size,
            "hidden_size": dim,
            "num_layers": layers,
            "num_heads": cfg.num_attention_heads,
            "intermediate_size": cfg.intermediate_size,
            "max_positions": cfg.max_position_embeddings,
            "type_vocab_size": cfg.type_vocab_size,
            "layer_norm_eps": cfg.layer_norm_eps,
            "activation": cfg.hidden_act,
        }
        tensors = bert_tensors(sd, layers)
    elif cfg.model_type == "distilbert":
        layers, dim = cfg.n_layers, cfg.dim
        config = {
            "vocab_size": cfg.vocab_size,
            "hidden_size": dim,
            "num_layers": layers,
            "num_heads": cfg.n_heads,
            "intermediate_size": cfg.hidden_dim,
            "max_positions": cfg.max_position_embeddings,
            "type_vocab_size": 1,
            "layer_norm_eps": 1e-12,
            "activation": cfg.activation,
        }
        tensors = distilbert_tensors(sd, layers, dim)
    else:
        raise SystemExit(f"unsupported model type {cfg.model_type!r}; use worker:{name}")

    config["model_id"] = model_id or name
    config["lowercase"] = bool(getattr(tokenizer, "do_lower_case", False))
    vocab = sorted(tokenizer.get_vocab().items(), key=lambda kv: kv[1])
    if [i for _, i in vocab] != list(range(len(vocab))):
        raise SystemExit("tokenizer vocabulary ids are not contiguous")

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w") as f:
        json.dump(config, f, indent=2)
        f.write("\n")
    with open(os.path.join(out_dir, "vocab.txt"), "w", encoding="utf-8") as f:
        for piece, _ in vocab:
            f.write(piece + "\n")
    write_weights(os.path.join(out_dir, "weights.bin"), tensors)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("model", help="model id or local directory")
    parser.add_argument("out", help="output directory")
    parser.add_argument("--model-id", help="name recorded in config.json")
    args = parser.parse_args()
    export(args.model, args.out, args.model_id)


if __name__ == "__main__":
    main()
