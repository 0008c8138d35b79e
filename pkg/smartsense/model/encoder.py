"""Queried Transformer Encoder (QTE).

A QTE correlates k input vectors with stacked self-attention layers and then
collapses them into one vector with query-attention, weighting each hidden
row by its relevance to a query vector.
"""

import math

import torch
from torch import nn

from smartsense.constants import LAYER_NORM_EPS
from smartsense.numeric import dropout, layer_norm, softmax_rows


class TransformerLayer(nn.Module):
    """Weights of one self-attention layer: multi-head Q/K/V/O, FNN, two layer norms."""

    def __init__(self, d: int, heads: int):
        super().__init__()
        self.d = d
        self.heads = heads
        self.w_q = nn.Linear(d, d, bias=False)
        self.w_k = nn.Linear(d, d, bias=False)
        self.w_v = nn.Linear(d, d, bias=False)
        self.w_o = nn.Linear(d, d, bias=False)
        self.fnn = nn.Sequential(nn.Linear(d, 4 * d), nn.ReLU(), nn.Linear(4 * d, d))
        self.norm1 = nn.LayerNorm(d, eps=LAYER_NORM_EPS)
        self.norm2 = nn.LayerNorm(d, eps=LAYER_NORM_EPS)

    def _split_heads(self, M: torch.Tensor) -> torch.Tensor:
        # (..., k, d) -> (..., heads, k, d / heads)
        *batch, k, _ = M.shape
        return M.reshape(*batch, k, self.heads, self.d // self.heads).transpose(-3, -2)

    def attention(self, X: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Multi-head attention output X-bar and per-head scores (..., heads, k, k)."""
        Q = self._split_heads(self.w_q(X))
        K = self._split_heads(self.w_k(X))
        V = self._split_heads(self.w_v(X))
        scores = softmax_rows(Q @ K.transpose(-2, -1) / math.sqrt(self.d // self.heads))
        heads = (scores @ V).transpose(-3, -2)
        concat = heads.reshape(*X.shape[:-1], self.d)
        return self.w_o(concat), scores


def self_attention_block(
    X: torch.Tensor,
    layer: TransformerLayer,
    *,
    training: bool = False,
    dropout_p: float = 0.0,
    use_layer_norm: bool = True,
    generator: torch.Generator | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """One transformer layer over the rows of X, without masking.

    With layer norm:  A' = LN1(X + drop(X-bar));  H = LN2(A' + drop(FNN(A'))).
    Without it:       H = X + X-bar + FNN(X + X-bar)  (dropout aside).

    Returns:
        (H, attention scores of shape (..., heads, k, k))
    """
    attended, scores = layer.attention(X)
    residual = X + dropout(attended, dropout_p, training, generator)
    if use_layer_norm:
        residual = layer_norm(residual, layer.norm1.weight, layer.norm1.bias)
    H = residual + dropout(layer.fnn(residual), dropout_p, training, generator)
    if use_layer_norm:
        H = layer_norm(H, layer.norm2.weight, layer.norm2.bias)
    return H, scores


def query_attention(
    H: torch.Tensor,
    q: torch.Tensor,
    W_h: torch.Tensor,
    b_h: torch.Tensor,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Summarize the rows of H by their relevance to the query q.

    beta_i = q . tanh(W_h h_i + b_h), alpha = softmax(beta), output = sum_i alpha_i h_i.

    Args:
        H: (..., k, d) hidden rows.
        q: (..., d') query, broadcast over the batch dimensions of H.
        W_h: (d', d) projection into the query space.
        b_h: (d',) bias.

    Returns:
        (summary (..., d), alpha (..., k))
    """
    projected = torch.tanh(H @ W_h.transpose(-2, -1) + b_h)
    beta = (projected * q.unsqueeze(-2)).sum(dim=-1)
    alpha = softmax_rows(beta)
    return (alpha.unsqueeze(-1) * H).sum(dim=-2), alpha


class QueriedTransformerEncoder(nn.Module):
    """L self-attention layers followed by query-attention into one d-vector."""

    def __init__(self, d: int, heads: int, layers: int, query_dim: int):
        super().__init__()
        self.d = d
        self.query_dim = query_dim
        self.layers = nn.ModuleList(TransformerLayer(d, heads) for _ in range(layers))
        self.query_proj = nn.Linear(d, query_dim)

    def hidden(
        self,
        X: torch.Tensor,
        *,
        dropout_p: float = 0.0,
        use_layer_norm: bool = True,
        generator: torch.Generator | None = None,
    ) -> tuple[torch.Tensor, list[torch.Tensor]]:
        """Final-layer hidden rows plus the attention scores of every layer."""
        scores = []
        H = X
        for layer in self.layers:
            H, layer_scores = self_attention_block(
                H,
                layer,
                training=self.training,
                dropout_p=dropout_p,
                use_layer_norm=use_layer_norm,
                generator=generator,
            )
            scores.append(layer_scores)
        return H, scores

    def summarize(self, H: torch.Tensor, q: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        return query_attention(H, q, self.query_proj.weight, self.query_proj.bias)

    def forward(
        self,
        X: torch.Tensor,
        q: torch.Tensor,
        *,
        dropout_p: float = 0.0,
        use_layer_norm: bool = True,
        generator: torch.Generator | None = None,
    ) -> torch.Tensor:
        H, _ = self.hidden(
            X, dropout_p=dropout_p, use_layer_norm=use_layer_norm, generator=generator
        )
        summary, _ = self.summarize(H, q)
        return summary
