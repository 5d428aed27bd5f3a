"""Multimodal unknown-word detector: gaze encoder, cross-attention token
decoder, contextual text encoder, knowledge embeddings and classifier head."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import tensor as T
from .knowledge import N_TF_BINS, NER_TAGS, POS_TAGS
from .tensor import Parameter, Tensor

NEG_INF = -1e9
EMBED_WIDTH = 8  # width of each categorical knowledge embedding


@dataclass
class ModelConfig:
    d_model: int = 64
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    n_text_layers: int = 2
    n_heads: int = 4
    max_gaze_len: int = 180
    max_tokens: int = 64
    n_r: int = 64
    alpha: float = 0.9
    gamma: float = 2.0
    vocab_size: int = 0
    use_gaze: bool = True
    use_text: bool = True
    use_knowledge: bool = True
    gaze_stride: int = 1      # feed every k-th gaze sample to the encoder
    seed: int = 0

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} not divisible by "
                             f"{self.n_heads} heads")
        if self.max_gaze_len > 180:
            raise ValueError("max_gaze_len must be <= 180 (3 s at 60 Hz)")
        if self.max_tokens > 64:
            raise ValueError("max_tokens must be <= 64")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not (self.use_gaze or self.use_text or self.use_knowledge):
            raise ValueError("at least one modality must be enabled")
        if self.gaze_stride < 1:
            raise ValueError(f"gaze_stride must be >= 1, got {self.gaze_stride}")

    @property
    def n_k(self) -> int:
        return 3 * EMBED_WIDTH + 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class WindowBatch:
    """Padded, masked model inputs for a batch of labeled samples."""

    gaze: np.ndarray          # [B, L, 4] smoothed x,y then raw x,y
    gaze_mask: np.ndarray     # [B, L] 1 = real sample
    token_ids: np.ndarray     # [B, T]
    token_pos: np.ndarray     # [B, T, 2] box centers, screen units
    token_dist: np.ndarray    # [B, T] normalized d(g, w)
    token_dur: np.ndarray     # [B, T] normalized t(g, w)
    know_tf_bin: np.ndarray   # [B, T]
    know_pos: np.ndarray      # [B, T]
    know_ner: np.ndarray      # [B, T]
    know_log_tf: np.ndarray   # [B, T]
    token_mask: np.ndarray    # [B, T] 1 = real token
    label_mask: np.ndarray    # [B, T] 1 = token of the candidate word
    labels: np.ndarray        # [B, T]

    def __len__(self) -> int:
        return self.gaze.shape[0]


def _trunc_normal(rng: np.random.Generator, shape, sigma=0.02) -> np.ndarray:
    x = rng.normal(0.0, sigma, size=shape)
    return np.clip(x, -2 * sigma, 2 * sigma)


def sinusoidal_encoding(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    i = np.arange(dim // 2)[None, :]
    angles = pos / (10000.0 ** (2 * i / dim))
    enc = np.zeros((length, dim))
    enc[:, 0::2] = np.sin(angles)
    enc[:, 1::2] = np.cos(angles)
    return enc


class _Block:
    """One pre-LN transformer block: self-attention, optional cross-attention,
    and a GELU feed-forward, all with residual connections."""

    def __init__(self, model: "DetectorModel", prefix: str, group: str,
                 d: int, n_heads: int, cross: bool):
        self.d = d
        self.h = n_heads
        self.cross = cross
        p = model._param
        self.ln1_g = p(f"{prefix}.ln1.gain", np.ones(d), group)
        self.ln1_b = p(f"{prefix}.ln1.bias", np.zeros(d), group)
        self.wq = p(f"{prefix}.attn.wq", None, group, (d, d))
        self.wk = p(f"{prefix}.attn.wk", None, group, (d, d))
        self.wv = p(f"{prefix}.attn.wv", None, group, (d, d))
        self.wo = p(f"{prefix}.attn.wo", None, group, (d, d))
        if cross:
            self.lnx_g = p(f"{prefix}.lnx.gain", np.ones(d), group)
            self.lnx_b = p(f"{prefix}.lnx.bias", np.zeros(d), group)
            self.xwq = p(f"{prefix}.xattn.wq", None, group, (d, d))
            self.xwk = p(f"{prefix}.xattn.wk", None, group, (d, d))
            self.xwv = p(f"{prefix}.xattn.wv", None, group, (d, d))
            self.xwo = p(f"{prefix}.xattn.wo", None, group, (d, d))
        self.ln2_g = p(f"{prefix}.ln2.gain", np.ones(d), group)
        self.ln2_b = p(f"{prefix}.ln2.bias", np.zeros(d), group)
        self.ff1 = p(f"{prefix}.ff.w1", None, group, (d, 4 * d))
        self.ff1_b = p(f"{prefix}.ff.b1", np.zeros(4 * d), group)
        self.ff2 = p(f"{prefix}.ff.w2", None, group, (4 * d, d))
        self.ff2_b = p(f"{prefix}.ff.b2", np.zeros(d), group)

    def _heads(self, x: Tensor) -> Tensor:
        b, L = x.shape[0], x.shape[1]
        return T.transpose(T.reshape(x, (b, L, self.h, self.d // self.h)),
                           (0, 2, 1, 3))

    def _merge(self, x: Tensor) -> Tensor:
        b, h, L, dh = x.shape
        return T.reshape(T.transpose(x, (0, 2, 1, 3)), (b, L, h * dh))

    def _mha(self, q_in: Tensor, kv_in: Tensor, wq, wk, wv, wo,
             key_mask: np.ndarray) -> Tensor:
        q = self._heads(T.matmul(q_in, wq))
        k = self._heads(T.matmul(kv_in, wk))
        v = self._heads(T.matmul(kv_in, wv))
        # additive mask over keys, broadcast over heads and queries
        add = np.where(key_mask[:, None, None, :] > 0, 0.0, NEG_INF)
        out = T.attention(q, k, v, mask=add)
        return T.matmul(self._merge(out), wo)

    def __call__(self, x: Tensor, self_mask: np.ndarray,
                 memory: Tensor | None = None,
                 memory_mask: np.ndarray | None = None) -> Tensor:
        n = T.layer_norm(x, self.ln1_g, self.ln1_b)
        x = T.add(x, self._mha(n, n, self.wq, self.wk, self.wv, self.wo,
                               self_mask))
        if self.cross:
            n = T.layer_norm(x, self.lnx_g, self.lnx_b)
            x = T.add(x, self._mha(n, memory, self.xwq, self.xwk, self.xwv,
                                   self.xwo, memory_mask))
        n = T.layer_norm(x, self.ln2_g, self.ln2_b)
        ff = T.add(T.matmul(n, self.ff1), self.ff1_b)
        ff = T.add(T.matmul(T.gelu(ff), self.ff2), self.ff2_b)
        return T.add(x, ff)


class DetectorModel:
    """The full detector; ablation flags in the config structurally remove
    whole components (and their parameters)."""

    def __init__(self, config: ModelConfig,
                 params: dict[str, Parameter] | None = None):
        if config.vocab_size <= 0 and config.use_text:
            raise ValueError("config.vocab_size must be set")
        self.config = config
        self._loaded = params
        self._rng = np.random.default_rng(config.seed)
        self.params: dict[str, Parameter] = {}
        self._build()
        self._loaded = None

    # -------------------------------------------------------- construction

    def _param(self, name: str, init, group: str,
               shape: tuple | None = None) -> Parameter:
        if self._loaded is not None:
            if name not in self._loaded:
                raise KeyError(f"checkpoint missing parameter {name!r}")
            p = self._loaded[name]
        else:
            data = _trunc_normal(self._rng, shape) if init is None else init
            p = Parameter(data, name=name, group=group)
        self.params[name] = p
        return p

    def _build(self):
        cfg = self.config
        d = cfg.d_model
        if cfg.use_gaze:
            self.gaze_proj = self._param("gaze.in.w", None, "encoder_decoder",
                                         (4, d))
            self.gaze_proj_b = self._param("gaze.in.b", np.zeros(d),
                                           "encoder_decoder")
            self.enc_blocks = [
                _Block(self, f"enc.{i}", "encoder_decoder", d, cfg.n_heads,
                       cross=False)
                for i in range(cfg.n_enc_layers)]
            self.enc_ln_g = self._param("enc.ln.gain", np.ones(d),
                                        "encoder_decoder")
            self.enc_ln_b = self._param("enc.ln.bias", np.zeros(d),
                                        "encoder_decoder")
            self.tok_proj = self._param("dec.in.w", None, "encoder_decoder",
                                        (4, d))
            self.tok_proj_b = self._param("dec.in.b", np.zeros(d),
                                          "encoder_decoder")
            self.dec_blocks = [
                _Block(self, f"dec.{i}", "encoder_decoder", d, cfg.n_heads,
                       cross=True)
                for i in range(cfg.n_dec_layers)]
            self.dec_ln_g = self._param("dec.ln.gain", np.ones(d),
                                        "encoder_decoder")
            self.dec_ln_b = self._param("dec.ln.bias", np.zeros(d),
                                        "encoder_decoder")
            self._time_enc = sinusoidal_encoding(cfg.max_gaze_len, d)
        if cfg.use_text:
            self.tok_embed = self._param("text.embed", None, "backbone",
                                         (cfg.vocab_size, cfg.n_r))
            self.pos_embed = self._param("text.pos", None, "backbone",
                                         (cfg.max_tokens, cfg.n_r))
            self.text_blocks = [
                _Block(self, f"text.{i}", "backbone", cfg.n_r, cfg.n_heads,
                       cross=False)
                for i in range(cfg.n_text_layers)]
            self.text_ln_g = self._param("text.ln.gain", np.ones(cfg.n_r),
                                         "backbone")
            self.text_ln_b = self._param("text.ln.bias", np.zeros(cfg.n_r),
                                         "backbone")
        if cfg.use_knowledge:
            self.tf_embed = self._param("know.tf", None, "backbone",
                                        (N_TF_BINS, EMBED_WIDTH))
            self.pos_tag_embed = self._param("know.pos", None, "backbone",
                                             (len(POS_TAGS), EMBED_WIDTH))
            self.ner_embed = self._param("know.ner", None, "backbone",
                                         (len(NER_TAGS), EMBED_WIDTH))
        width = (d if cfg.use_gaze else 0) \
            + (cfg.n_r if cfg.use_text else 0) \
            + (cfg.n_k if cfg.use_knowledge else 0)
        self.head_w = self._param("head.w", None, "backbone", (width, 1))
        self.head_b = self._param("head.b", np.zeros(1), "backbone")

    def load_embeddings(self, path) -> None:
        """Seed the text embedding table from an external JSON file
        {word_id_string: [floats]}; rows not present stay random."""
        import json
        with open(path) as f:
            table = json.load(f)
        for key, vec in table.items():
            idx = int(key)
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (self.config.n_r,):
                raise ValueError(f"embedding row {key} has width {vec.shape}")
            self.tok_embed.data[idx] = vec

    # ------------------------------------------------------------- forward

    def _gaze_view(self, batch: WindowBatch) -> tuple[np.ndarray, np.ndarray]:
        """Gaze channels and mask, capped at max_gaze_len and decimated by
        the configured stride."""
        s = self.config.gaze_stride
        m = self.config.max_gaze_len
        return batch.gaze[:, :m:s], batch.gaze_mask[:, :m:s]

    def encode_gaze(self, batch: WindowBatch) -> Tensor:
        if batch.gaze_mask.sum() == 0:
            raise ValueError("empty gaze window")
        gaze, mask = self._gaze_view(batch)
        s = self.config.gaze_stride
        L = gaze.shape[1]
        x = T.add(T.matmul(Tensor(gaze), self.gaze_proj),
                  self.gaze_proj_b)
        # time encoding keeps the original sampling clock under decimation
        x = T.add(x, Tensor(self._time_enc[:L * s:s]))
        x = T.mul(x, Tensor(mask[:, :, None]))
        for blk in self.enc_blocks:
            x = blk(x, mask)
        return T.layer_norm(x, self.enc_ln_g, self.enc_ln_b)

    def decode_tokens(self, h_g: Tensor, batch: WindowBatch) -> Tensor:
        if batch.token_mask.sum() == 0:
            raise ValueError("empty token mask")
        feats = np.concatenate([batch.token_pos,
                                batch.token_dist[:, :, None],
                                batch.token_dur[:, :, None]], axis=-1)
        x = T.add(T.matmul(Tensor(feats), self.tok_proj), self.tok_proj_b)
        x = T.mul(x, Tensor(batch.token_mask[:, :, None]))
        _, memory_mask = self._gaze_view(batch)
        for blk in self.dec_blocks:
            x = blk(x, batch.token_mask, memory=h_g,
                    memory_mask=memory_mask)
        return T.layer_norm(x, self.dec_ln_g, self.dec_ln_b)

    def encode_text(self, token_ids: np.ndarray,
                    token_mask: np.ndarray) -> Tensor:
        if token_ids.max(initial=0) >= self.config.vocab_size:
            raise IndexError(f"token id {token_ids.max()} out of range "
                             f"[0, {self.config.vocab_size})")
        n = token_ids.shape[1]
        x = T.add(T.embedding(self.tok_embed, token_ids),
                  T.embedding(self.pos_embed,
                              np.broadcast_to(np.arange(n), token_ids.shape)))
        x = T.mul(x, Tensor(token_mask[:, :, None]))
        for blk in self.text_blocks:
            x = blk(x, token_mask)
        return T.layer_norm(x, self.text_ln_g, self.text_ln_b)

    def knowledge_embed(self, batch: WindowBatch) -> Tensor:
        return T.concat([
            T.embedding(self.tf_embed, batch.know_tf_bin),
            T.embedding(self.pos_tag_embed, batch.know_pos),
            T.embedding(self.ner_embed, batch.know_ner),
            Tensor(batch.know_log_tf[:, :, None]),
        ])

    def classify(self, parts: list[Tensor]) -> Tensor:
        h = parts[0] if len(parts) == 1 else T.concat(parts)
        if h.shape[-1] != self.head_w.shape[0]:
            raise T.ShapeError(f"classifier width {h.shape[-1]} does not "
                               f"match head {self.head_w.shape}")
        logits = T.add(T.matmul(h, self.head_w), self.head_b)
        return T.sigmoid(T.reshape(logits, logits.shape[:-1]))

    def forward(self, batch: WindowBatch) -> Tensor:
        """Per-token probabilities p in (0,1), shape [B, T]."""
        cfg = self.config
        parts = []
        if cfg.use_gaze:
            parts.append(self.decode_tokens(self.encode_gaze(batch), batch))
        if cfg.use_text:
            parts.append(self.encode_text(batch.token_ids, batch.token_mask))
        if cfg.use_knowledge:
            parts.append(self.knowledge_embed(batch))
        return self.classify(parts)

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()


def focal_loss(p: Tensor, labels: np.ndarray, alpha: float, gamma: float,
               mask: np.ndarray) -> Tensor:
    """Focal binary cross-entropy, averaged over unmasked tokens.

    Probabilities are clamped to [1e-12, 1-1e-12] before the logs.
    """
    y = np.asarray(labels, dtype=np.float64)
    eps = 1e-12
    clamped = T.Tensor(np.clip(p.data, eps, 1 - eps))
    clamped.requires_grad = p.requires_grad
    clamped._parents = (p,)
    inside = (p.data > eps) & (p.data < 1 - eps)

    def bwd(g):
        if p.requires_grad:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
            p.grad += g * inside

    clamped._backward = bwd

    one_minus = T.add(T.mul(clamped, T.Tensor(-1.0)), T.Tensor(1.0))
    pos = T.mul(T.mul(T.power(one_minus, gamma), T.log(clamped)),
                T.Tensor(-alpha * y))
    neg = T.mul(T.mul(T.power(clamped, gamma), T.log(one_minus)),
                T.Tensor(-(1.0 - alpha) * (1.0 - y)))
    per_token = T.add(pos, neg)
    return T.masked_mean(per_token, mask)
