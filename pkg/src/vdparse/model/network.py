"""Encoder-decoder forward passes, Luong-style attention, exact reverse-mode gradients.

Shapes: feature rows (p, D); encoder memory (p, H); decoder run (n, H) under
teacher forcing. Attention scores use score(h_d, h_e) =
    general: h_d^T Wa h_e      dot: h_d^T h_e      concat: va^T tanh(Wa [h_d; h_e])
and the attentional output h~ = tanh(Wc [context; h_d]) feeds the vocabulary
softmax. Dropout (inverted scaling) is applied only to non-recurrent
connections: each recurrent layer's input and the pre-softmax activation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from .params import ModelParams
from .vocab import Vocab


class LengthExceeded(ValueError):
    pass


def softmax_rows(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax_rows(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray:
    """Inverted-dropout mask: zeros with probability rate, else 1/(1-rate)."""
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _contig(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a)


@dataclass
class EncodeResult:
    outputs: np.ndarray          # (p, H) deepest layer output, the attention memory
    final_h: np.ndarray          # (H,) passed to the decoder as its initial state
    final_c: np.ndarray | None   # (H,) LSTM only
    cache: dict


@dataclass
class DecodeResult:
    step_logp: np.ndarray            # (n,) log p(target_t | h_t)
    log_probs: np.ndarray            # (n, V)
    attention: np.ndarray | None     # (n, p) one row per decoder step
    cache: dict

    @property
    def sequence_logp(self) -> float:
        """Total sequence log-probability: the sum of the per-step terms."""
        return float(self.step_logp.sum())


def encode(features: np.ndarray, params: ModelParams, train: bool = False,
           rng: np.random.Generator | None = None) -> EncodeResult:
    """Project frame features D->H and run the stacked (bi)recurrent encoder."""
    cfg = params.config
    t = params.tensors
    X = _contig(np.asarray(features, dtype=np.float64))
    p = X.shape[0]
    if p > cfg.max_encode_len:
        raise LengthExceeded(f"{p} frames exceeds max encoder length {cfg.max_encode_len}")
    if X.shape[1] != cfg.feature_dim:
        raise ValueError(f"feature dim {X.shape[1]} != configured {cfg.feature_dim}")
    H = cfg.hidden_units
    lstm = cfg.rnn_type == "LSTM"
    rate = cfg.dropout_rate if train else 0.0
    if rate > 0 and rng is None:
        raise ValueError("training with dropout requires an rng")
    zeros_h = np.zeros(H)

    X0 = X @ t["enc.proj.W"].T + t["enc.proj.b"]
    layer_caches: list[dict] = []
    inp = X0
    final_h = final_c = None
    for layer in range(cfg.encoder_layers):
        mask = dropout_mask(rng, inp.shape, rate) if rate > 0 else None
        dropped = inp * mask if mask is not None else inp
        lc: dict = {"mask": mask}
        if cfg.bidirectional:
            rev = _contig(dropped[::-1])
            for direction, src in (("fwd", dropped), ("bwd", rev)):
                prefix = f"enc.l{layer}.{direction}"
                xp = src @ t[f"{prefix}.W"].T + t[f"{prefix}.b"]
                if lstm:
                    h_seq, c_seq, gates, tanh_c = kernels.lstm_forward(
                        xp, zeros_h, zeros_h, t[f"{prefix}.U"])
                    lc[direction] = {"src": src, "h_seq": h_seq, "c_seq": c_seq,
                                     "gates": gates, "tanh_c": tanh_c}
                else:
                    h_seq, gates, uh_n = kernels.gru_forward(xp, zeros_h, t[f"{prefix}.U"])
                    lc[direction] = {"src": src, "h_seq": h_seq, "gates": gates, "uh_n": uh_n}
            cat = np.concatenate([lc["fwd"]["h_seq"], lc["bwd"]["h_seq"][::-1]], axis=1)
            out = cat @ t[f"enc.l{layer}.proj.W"].T + t[f"enc.l{layer}.proj.b"]
            lc["cat"] = cat
            final_h = out[-1]
            final_c = lc["fwd"]["c_seq"][-1] if lstm else None
        else:
            prefix = f"enc.l{layer}"
            xp = dropped @ t[f"{prefix}.W"].T + t[f"{prefix}.b"]
            if lstm:
                h_seq, c_seq, gates, tanh_c = kernels.lstm_forward(
                    xp, zeros_h, zeros_h, t[f"{prefix}.U"])
                lc["uni"] = {"src": dropped, "h_seq": h_seq, "c_seq": c_seq,
                             "gates": gates, "tanh_c": tanh_c}
                final_c = c_seq[-1]
            else:
                h_seq, gates, uh_n = kernels.gru_forward(xp, zeros_h, t[f"{prefix}.U"])
                lc["uni"] = {"src": dropped, "h_seq": h_seq, "gates": gates, "uh_n": uh_n}
                final_c = None
            out = h_seq
            final_h = out[-1]
        layer_caches.append(lc)
        inp = out
    cache = {"X": X, "layers": layer_caches}
    return EncodeResult(outputs=inp, final_h=final_h, final_c=final_c, cache=cache)


def _encode_backward(d_outputs, d_final_h, d_final_c, params: ModelParams,
                     cache: dict, grads: dict) -> None:
    cfg = params.config
    t = params.tensors
    H = cfg.hidden_units
    lstm = cfg.rnn_type == "LSTM"
    zeros_h = np.zeros(H)
    d_out = d_outputs.copy()
    d_out[-1] += d_final_h
    for layer in range(cfg.encoder_layers - 1, -1, -1):
        lc = cache["layers"][layer]
        deepest = layer == cfg.encoder_layers - 1
        dc_extra = d_final_c if (deepest and lstm and d_final_c is not None) else zeros_h
        if cfg.bidirectional:
            prefix = f"enc.l{layer}"
            grads[f"{prefix}.proj.W"] += d_out.T @ lc["cat"]
            grads[f"{prefix}.proj.b"] += d_out.sum(axis=0)
            dcat = d_out @ t[f"{prefix}.proj.W"]
            d_dir = {"fwd": _contig(dcat[:, :H]), "bwd": _contig(dcat[:, H:][::-1])}
            d_inp = None
            for direction in ("fwd", "bwd"):
                dp = f"{prefix}.{direction}"
                dl = lc[direction]
                dc_last = dc_extra if direction == "fwd" else zeros_h
                if lstm:
                    dxp, dU, _, _ = kernels.lstm_backward(
                        d_dir[direction], dc_last, t[f"{dp}.U"], zeros_h, zeros_h,
                        dl["h_seq"], dl["c_seq"], dl["gates"], dl["tanh_c"])
                else:
                    dxp, dU, _ = kernels.gru_backward(
                        d_dir[direction], t[f"{dp}.U"], zeros_h,
                        dl["h_seq"], dl["gates"], dl["uh_n"])
                grads[f"{dp}.U"] += dU
                grads[f"{dp}.W"] += dxp.T @ dl["src"]
                grads[f"{dp}.b"] += dxp.sum(axis=0)
                contrib = dxp @ t[f"{dp}.W"]
                if direction == "bwd":
                    contrib = contrib[::-1]
                d_inp = contrib if d_inp is None else d_inp + contrib
        else:
            prefix = f"enc.l{layer}"
            dl = lc["uni"]
            if lstm:
                dxp, dU, _, _ = kernels.lstm_backward(
                    _contig(d_out), dc_extra, t[f"{prefix}.U"], zeros_h, zeros_h,
                    dl["h_seq"], dl["c_seq"], dl["gates"], dl["tanh_c"])
            else:
                dxp, dU, _ = kernels.gru_backward(
                    _contig(d_out), t[f"{prefix}.U"], zeros_h,
                    dl["h_seq"], dl["gates"], dl["uh_n"])
            grads[f"{prefix}.U"] += dU
            grads[f"{prefix}.W"] += dxp.T @ dl["src"]
            grads[f"{prefix}.b"] += dxp.sum(axis=0)
            d_inp = dxp @ t[f"{prefix}.W"]
        if lc["mask"] is not None:
            d_inp = d_inp * lc["mask"]
        d_out = d_inp
    grads["enc.proj.W"] += d_out.T @ cache["X"]
    grads["enc.proj.b"] += d_out.sum(axis=0)


def _attention_scores(h_rows: np.ndarray, memory: np.ndarray, kind: str,
                      t: dict) -> tuple[np.ndarray, dict]:
    """Score every decoder row against every memory row; returns (scores, cache)."""
    H = memory.shape[1]
    if kind == "general":
        proj = memory @ t["attn.Wa"].T            # row j = Wa @ e_j
        return h_rows @ proj.T, {"proj": proj}
    if kind == "dot":
        return h_rows @ memory.T, {}
    if kind == "concat":
        wa_h = t["attn.Wa"][:, :H]
        wa_e = t["attn.Wa"][:, H:]
        a1 = h_rows @ wa_h.T
        a2 = memory @ wa_e.T
        tn = np.tanh(a1[:, None, :] + a2[None, :, :])  # (n, p, A)
        return tn @ t["attn.va"], {"tn": tn}
    raise ValueError(f"unknown attention kind {kind!r}")


def _attention_scores_backward(dscores, h_rows, memory, kind, t, att_cache, grads):
    """Returns (d_h_rows, d_memory) contributions from the score computation."""
    H = memory.shape[1]
    if kind == "general":
        proj = att_cache["proj"]
        dh = dscores @ proj
        dproj = dscores.T @ h_rows
        grads["attn.Wa"] += dproj.T @ memory
        dmem = dproj @ t["attn.Wa"]
        return dh, dmem
    if kind == "dot":
        return dscores @ memory, dscores.T @ h_rows
    tn = att_cache["tn"]
    grads["attn.va"] += np.tensordot(dscores, tn, axes=([0, 1], [0, 1]))
    dz = dscores[:, :, None] * t["attn.va"][None, None, :] * (1.0 - tn * tn)
    da1 = dz.sum(axis=1)
    da2 = dz.sum(axis=0)
    wa_h = t["attn.Wa"][:, :H]
    wa_e = t["attn.Wa"][:, H:]
    grads["attn.Wa"][:, :H] += da1.T @ h_rows
    grads["attn.Wa"][:, H:] += da2.T @ memory
    return da1 @ wa_h, da2 @ wa_e


def attend(h_d: np.ndarray, memory: np.ndarray, kind: str,
           params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Single-step attention: returns (context vector, attention row over frames)."""
    scores, _ = _attention_scores(h_d[None, :], memory, kind, params.tensors)
    alpha = softmax_rows(scores)
    context = alpha @ memory
    return context[0], alpha[0]


def decode_forward(enc: EncodeResult, gold_ids, params: ModelParams,
                   train: bool = False,
                   rng: np.random.Generator | None = None) -> DecodeResult:
    """Teacher-forced decoder pass over a gold sequence `<s> ... </s>`."""
    cfg = params.config
    t = params.tensors
    vocab = params.vocab
    ids = np.asarray(gold_ids, dtype=np.int64)
    if ids.ndim != 1 or len(ids) < 2 or ids[0] != vocab.bos_id or ids[-1] != vocab.eos_id:
        raise ValueError("gold token ids must begin with <s> and end with </s>")
    inputs = ids[:-1]
    targets = ids[1:]
    n = len(inputs)
    lstm = cfg.rnn_type == "LSTM"
    rate = cfg.dropout_rate if train else 0.0
    if rate > 0 and rng is None:
        raise ValueError("training with dropout requires an rng")

    emb = t["dec.embed.E"][inputs]
    emb_mask = dropout_mask(rng, emb.shape, rate) if rate > 0 else None
    emb_d = emb * emb_mask if emb_mask is not None else emb
    xp = emb_d @ t["dec.cell.W"].T + t["dec.cell.b"]
    h0 = _contig(enc.final_h)
    if lstm:
        c0 = _contig(enc.final_c)
        h_seq, c_seq, gates, tanh_c = kernels.lstm_forward(xp, h0, c0, t["dec.cell.U"])
        rnn_cache = {"h_seq": h_seq, "c_seq": c_seq, "gates": gates, "tanh_c": tanh_c}
    else:
        c0 = None
        h_seq, gates, uh_n = kernels.gru_forward(xp, h0, t["dec.cell.U"])
        rnn_cache = {"h_seq": h_seq, "gates": gates, "uh_n": uh_n}

    if cfg.attention != "none":
        scores, att_cache = _attention_scores(h_seq, enc.outputs, cfg.attention, t)
        alpha = softmax_rows(scores)
        context = alpha @ enc.outputs
        comb = np.concatenate([context, h_seq], axis=1)
        htilde = np.tanh(comb @ t["attn.Wc"].T)
        pre = htilde
    else:
        alpha = None
        att_cache = {}
        comb = htilde = None
        pre = h_seq
    pre_mask = dropout_mask(rng, pre.shape, rate) if rate > 0 else None
    pre_d = pre * pre_mask if pre_mask is not None else pre
    logits = pre_d @ t["out.W"].T + t["out.b"]
    log_probs = log_softmax_rows(logits)
    step_logp = log_probs[np.arange(n), targets]
    cache = {
        "inputs": inputs, "targets": targets,
        "emb_d": emb_d, "emb_mask": emb_mask,
        "h0": h0, "c0": c0, "rnn": rnn_cache,
        "alpha": alpha, "att_cache": att_cache,
        "comb": comb, "htilde": htilde,
        "pre_d": pre_d, "pre_mask": pre_mask,
    }
    return DecodeResult(step_logp=step_logp, log_probs=log_probs, attention=alpha, cache=cache)


def backward(enc: EncodeResult, dec: DecodeResult, params: ModelParams,
             target_weights: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of sum_t -w_t log p(target_t) w.r.t. every tensor."""
    cfg = params.config
    t = params.tensors
    H = cfg.hidden_units
    lstm = cfg.rnn_type == "LSTM"
    c = dec.cache
    n = len(c["targets"])
    grads = params.zeros_like()

    probs = np.exp(dec.log_probs)
    dlogits = probs * target_weights[:, None]
    dlogits[np.arange(n), c["targets"]] -= target_weights
    grads["out.W"] += dlogits.T @ c["pre_d"]
    grads["out.b"] += dlogits.sum(axis=0)
    dpre = dlogits @ t["out.W"]
    if c["pre_mask"] is not None:
        dpre = dpre * c["pre_mask"]

    rnn = c["rnn"]
    h_seq = rnn["h_seq"]
    if cfg.attention != "none":
        dz = dpre * (1.0 - c["htilde"] * c["htilde"])
        grads["attn.Wc"] += dz.T @ c["comb"]
        dcomb = dz @ t["attn.Wc"]
        dcontext = dcomb[:, :H]
        dh_seq = dcomb[:, H:].copy()
        alpha = c["alpha"]
        dalpha = dcontext @ enc.outputs.T
        d_memory = alpha.T @ dcontext
        dscores = alpha * (dalpha - (dalpha * alpha).sum(axis=1, keepdims=True))
        dh_extra, dmem_extra = _attention_scores_backward(
            dscores, h_seq, enc.outputs, cfg.attention, t, c["att_cache"], grads)
        dh_seq += dh_extra
        d_memory = d_memory + dmem_extra
    else:
        dh_seq = dpre.copy()
        d_memory = np.zeros_like(enc.outputs)

    if lstm:
        dxp, dU, dh0, dc0 = kernels.lstm_backward(
            _contig(dh_seq), np.zeros(H), t["dec.cell.U"], c["h0"], c["c0"],
            h_seq, rnn["c_seq"], rnn["gates"], rnn["tanh_c"])
    else:
        dxp, dU, dh0 = kernels.gru_backward(
            _contig(dh_seq), t["dec.cell.U"], c["h0"],
            h_seq, rnn["gates"], rnn["uh_n"])
        dc0 = None
    grads["dec.cell.U"] += dU
    grads["dec.cell.W"] += dxp.T @ c["emb_d"]
    grads["dec.cell.b"] += dxp.sum(axis=0)
    demb = dxp @ t["dec.cell.W"]
    if c["emb_mask"] is not None:
        demb = demb * c["emb_mask"]
    np.add.at(grads["dec.embed.E"], c["inputs"], demb)

    _encode_backward(d_memory, dh0, dc0, params, enc.cache, grads)
    return grads


def loss_and_grads(params: ModelParams, features: np.ndarray, gold_ids,
                   train: bool = True,
                   rng: np.random.Generator | None = None):
    """One example's negative log-likelihood sum, token count, and gradients."""
    enc = encode(features, params, train=train, rng=rng)
    dec = decode_forward(enc, gold_ids, params, train=train, rng=rng)
    targets = dec.cache["targets"]
    weights = (targets != params.vocab.pad_id).astype(np.float64)
    loss_sum = float(-(dec.step_logp * weights).sum())
    grads = backward(enc, dec, params, weights)
    return loss_sum, float(weights.sum()), grads


def greedy_decode(enc: EncodeResult, params: ModelParams,
                  max_len: int | None = None) -> tuple[list[int], np.ndarray | None]:
    """Argmax decoding until </s> or the length cap; ties break to the lowest id.

    Returns emitted token ids (reserved tokens excluded) and, for attention
    models, one attention row per emitted token.
    """
    cfg = params.config
    t = params.tensors
    vocab = params.vocab
    lstm = cfg.rnn_type == "LSTM"
    limit = cfg.max_decode_len if max_len is None else max_len
    h = _contig(enc.final_h)
    cell = _contig(enc.final_c) if lstm else None
    tok = vocab.bos_id
    out_ids: list[int] = []
    attn_rows: list[np.ndarray] = []
    for _ in range(limit):
        emb = t["dec.embed.E"][tok]
        xp = (t["dec.cell.W"] @ emb + t["dec.cell.b"])[None, :]
        if lstm:
            h_seq, c_seq, _, _ = kernels.lstm_forward(xp, h, cell, t["dec.cell.U"])
            h, cell = h_seq[0], c_seq[0]
        else:
            h_seq, _, _ = kernels.gru_forward(xp, h, t["dec.cell.U"])
            h = h_seq[0]
        if cfg.attention != "none":
            context, arow = attend(h, enc.outputs, cfg.attention, params)
            pre = np.tanh(t["attn.Wc"] @ np.concatenate([context, h]))
        else:
            arow = None
            pre = h
        logits = t["out.W"] @ pre + t["out.b"]
        nxt = int(np.argmax(logits))
        if nxt == vocab.eos_id:
            break
        out_ids.append(nxt)
        if arow is not None:
            attn_rows.append(arow)
        tok = nxt
    if cfg.attention == "none":
        attn = None
    elif attn_rows:
        attn = np.stack(attn_rows)
    else:
        attn = np.zeros((0, enc.outputs.shape[0]))
    return out_ids, attn


def predict_tokens(params: ModelParams, features: np.ndarray,
                   max_len: int | None = None) -> tuple[list[str], np.ndarray | None]:
    """Features -> decoded token strings (plus attention map when available)."""
    enc = encode(features, params, train=False)
    ids, attn = greedy_decode(enc, params, max_len=max_len)
    return params.vocab.decode(ids), attn
