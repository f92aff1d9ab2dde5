"""Small-scale numerics for the recognizer: Conformer block, CTC, joint scoring.

Forward passes, losses and their gradients only; there is no optimizer.
Arrays are float64 throughout so the results can be checked against
brute-force enumeration and finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

BLANK = 0
ALPHA = 0.7   # CE weight in the training objective
LAMBDA = 0.5  # CE weight in decoding


class KernelError(ValueError):
    pass


def layer_norm(x, gamma=1.0, beta=0.0, eps: float = 1e-5) -> np.ndarray:
    """Normalize over the last axis, then scale by ``gamma`` and shift by ``beta``."""
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * gamma + beta


def log_softmax(x, axis: int = -1) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    m = x.max(axis=axis, keepdims=True)
    return x - m - np.log(np.exp(x - m).sum(axis=axis, keepdims=True))


def _logsumexp(a: np.ndarray, axis=None):
    m = np.max(a, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m_safe), axis=axis, keepdims=True)) + m_safe
    return np.squeeze(out, axis=axis) if axis is not None else out.item()


# ---------------------------------------------------------------- Conformer block

@dataclass
class KernelParams:
    """Weights of one Conformer block plus the loss/decode weights.

    Linear weights are stored (in, out) so a layer is ``x @ w + b``.
    """
    num_heads: int
    ffn1_w1: np.ndarray
    ffn1_b1: np.ndarray
    ffn1_w2: np.ndarray
    ffn1_b2: np.ndarray
    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray
    conv_pw1_w: np.ndarray   # (d, 2d), feeds the GLU
    conv_pw1_b: np.ndarray
    conv_dw_w: np.ndarray    # (kernel, d)
    conv_dw_b: np.ndarray
    conv_pw2_w: np.ndarray   # (d, d)
    conv_pw2_b: np.ndarray
    ffn2_w1: np.ndarray
    ffn2_b1: np.ndarray
    ffn2_w2: np.ndarray
    ffn2_b2: np.ndarray
    ln_gamma: np.ndarray
    ln_beta: np.ndarray
    alpha: float = ALPHA
    lam: float = LAMBDA

    def __post_init__(self):
        d = self.d_model
        if d % self.num_heads:
            raise KernelError(f"d_model={d} not divisible by num_heads={self.num_heads}")
        if self.conv_kernel % 2 == 0:
            raise KernelError(f"conv kernel size {self.conv_kernel} must be odd")
        if not (0 <= self.alpha <= 1 and 0 <= self.lam <= 1):
            raise KernelError("alpha and lambda must lie in [0, 1]")

    @property
    def d_model(self) -> int:
        return self.wq.shape[0]

    @property
    def conv_kernel(self) -> int:
        return self.conv_dw_w.shape[0]

    @classmethod
    def zeros(cls, d_model: int, num_heads: int = 4, ffn_hidden: Optional[int] = None,
              conv_kernel: int = 15) -> "KernelParams":
        """All sub-modules output zero; the final LayerNorm is the identity affine."""
        h = ffn_hidden or 4 * d_model
        shapes = _param_shapes(d_model, h, conv_kernel)
        kw = {name: np.zeros(shape) for name, shape in shapes.items()}
        kw["ln_gamma"] = np.ones(d_model)
        return cls(num_heads=num_heads, **kw)

    @classmethod
    def random(cls, d_model: int, num_heads: int = 4, ffn_hidden: Optional[int] = None,
               conv_kernel: int = 15, seed: int = 0, scale: float = 0.1) -> "KernelParams":
        h = ffn_hidden or 4 * d_model
        rng = np.random.default_rng(seed)
        shapes = _param_shapes(d_model, h, conv_kernel)
        kw = {name: rng.normal(0.0, scale, shape) for name, shape in shapes.items()}
        kw["ln_gamma"] = np.ones(d_model) + rng.normal(0.0, scale, d_model)
        return cls(num_heads=num_heads, **kw)


def _param_shapes(d: int, h: int, k: int) -> dict:
    return {
        "ffn1_w1": (d, h), "ffn1_b1": (h,), "ffn1_w2": (h, d), "ffn1_b2": (d,),
        "wq": (d, d), "bq": (d,), "wk": (d, d), "bk": (d,),
        "wv": (d, d), "bv": (d,), "wo": (d, d), "bo": (d,),
        "conv_pw1_w": (d, 2 * d), "conv_pw1_b": (2 * d,),
        "conv_dw_w": (k, d), "conv_dw_b": (d,),
        "conv_pw2_w": (d, d), "conv_pw2_b": (d,),
        "ffn2_w1": (d, h), "ffn2_b1": (h,), "ffn2_w2": (h, d), "ffn2_b2": (d,),
        "ln_gamma": (d,), "ln_beta": (d,),
    }


def feed_forward(x, w1, b1, w2, b2) -> np.ndarray:
    return np.maximum(x @ w1 + b1, 0.0) @ w2 + b2


def self_attention(x: np.ndarray, p: KernelParams) -> np.ndarray:
    """Multi-head scaled dot-product self-attention over the frame axis."""
    *lead, t, d = x.shape
    h = p.num_heads
    dh = d // h

    def heads(y):
        return y.reshape(*lead, t, h, dh).swapaxes(-2, -3)  # (..., h, t, dh)

    q, k, v = heads(x @ p.wq + p.bq), heads(x @ p.wk + p.bk), heads(x @ p.wv + p.bv)
    scores = q @ k.swapaxes(-1, -2) / np.sqrt(dh)
    att = np.exp(log_softmax(scores, axis=-1))
    ctx = (att @ v).swapaxes(-2, -3).reshape(*lead, t, d)
    return ctx @ p.wo + p.bo


def conv_module(x: np.ndarray, p: KernelParams) -> np.ndarray:
    """Pointwise -> GLU -> depthwise (same padding) -> ReLU -> pointwise."""
    y = x @ p.conv_pw1_w + p.conv_pw1_b
    d = x.shape[-1]
    y = y[..., :d] * (1.0 / (1.0 + np.exp(-y[..., d:])))
    k = p.conv_kernel
    pad = k // 2
    t = y.shape[-2]
    padded = np.zeros(y.shape[:-2] + (t + 2 * pad, d))
    padded[..., pad:pad + t, :] = y
    z = sum(padded[..., j:j + t, :] * p.conv_dw_w[j] for j in range(k)) + p.conv_dw_b
    return np.maximum(z, 0.0) @ p.conv_pw2_w + p.conv_pw2_b


def conformer_block(x, params: KernelParams, return_intermediates: bool = False):
    """One Conformer block with half-step feed-forward residuals.

    x' = x + FFN1(x)/2;  x'' = x' + MHSA(x');  x''' = x'' + Conv(x'');
    y = LayerNorm(x''' + FFN2(x''')/2).  ``x`` is (T, d) or (..., T, d).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2 or x.shape[-1] != params.d_model or x.shape[-2] < 1:
        raise KernelError(f"expected (..., T>=1, {params.d_model}) input, got {x.shape}")
    p = params
    x1 = x + 0.5 * feed_forward(x, p.ffn1_w1, p.ffn1_b1, p.ffn1_w2, p.ffn1_b2)
    x2 = x1 + self_attention(x1, p)
    x3 = x2 + conv_module(x2, p)
    pre = x3 + 0.5 * feed_forward(x3, p.ffn2_w1, p.ffn2_b1, p.ffn2_w2, p.ffn2_b2)
    y = layer_norm(pre, p.ln_gamma, p.ln_beta)
    if return_intermediates:
        return y, {"x1": x1, "x2": x2, "x3": x3, "pre_norm": pre}
    return y


# ---------------------------------------------------------------- CTC

def ctc_min_frames(labels: Sequence[int]) -> int:
    """Fewest frames that can emit ``labels``: one per label plus a blank between repeats."""
    labels = list(labels)
    return len(labels) + sum(1 for a, b in zip(labels, labels[1:]) if a == b)


def ctc_feasible(num_frames: int, labels: Sequence[int]) -> bool:
    return num_frames >= ctc_min_frames(labels)


def _extend(labels: Sequence[int]) -> List[int]:
    ext = [BLANK]
    for lab in labels:
        ext += [lab, BLANK]
    return ext


def _check_ctc_args(lattice: np.ndarray, labels: Sequence[int]):
    if lattice.ndim != 2:
        raise KernelError(f"lattice must be (T, V), got shape {lattice.shape}")
    v = lattice.shape[1]
    for lab in labels:
        if not (0 < lab < v):
            raise KernelError(f"label {lab} outside 1..{v - 1} (0 is blank)")


def _ctc_alpha(lp: np.ndarray, ext: List[int]) -> np.ndarray:
    t_len, s_len = lp.shape[0], len(ext)
    alpha = np.full((t_len, s_len), -np.inf)
    alpha[0, 0] = lp[0, ext[0]]
    if s_len > 1:
        alpha[0, 1] = lp[0, ext[1]]
    for t in range(1, t_len):
        for s in range(s_len):
            cands = [alpha[t - 1, s]]
            if s >= 1:
                cands.append(alpha[t - 1, s - 1])
            if s >= 2 and ext[s] != BLANK and ext[s] != ext[s - 2]:
                cands.append(alpha[t - 1, s - 2])
            alpha[t, s] = _logsumexp(np.array(cands)) + lp[t, ext[s]]
    return alpha


def _ctc_beta(lp: np.ndarray, ext: List[int]) -> np.ndarray:
    t_len, s_len = lp.shape[0], len(ext)
    beta = np.full((t_len, s_len), -np.inf)
    beta[-1, -1] = lp[-1, ext[-1]]
    if s_len > 1:
        beta[-1, -2] = lp[-1, ext[-2]]
    for t in range(t_len - 2, -1, -1):
        for s in range(s_len):
            cands = [beta[t + 1, s]]
            if s + 1 < s_len:
                cands.append(beta[t + 1, s + 1])
            if s + 2 < s_len and ext[s] != BLANK and ext[s] != ext[s + 2]:
                cands.append(beta[t + 1, s + 2])
            beta[t, s] = _logsumexp(np.array(cands)) + lp[t, ext[s]]
    return beta


def ctc_loss(lattice, labels: Sequence[int]) -> float:
    """-log P(labels | lattice) by the forward recursion in log space.

    ``lattice`` is (T, V) log-probabilities with blank at index 0.  Returns
    ``inf`` when T is too short for the labels (see ``ctc_feasible``).
    """
    lp = np.asarray(lattice, dtype=np.float64)
    labels = list(labels)
    _check_ctc_args(lp, labels)
    if not ctc_feasible(lp.shape[0], labels):
        return float("inf")
    ext = _extend(labels)
    alpha = _ctc_alpha(lp, ext)
    tail = alpha[-1, -2:] if len(ext) > 1 else alpha[-1, -1:]
    return -float(_logsumexp(tail))


def ctc_loss_grad(lattice, labels: Sequence[int]) -> Tuple[float, np.ndarray]:
    """Loss and d loss / d lattice, treating every lattice entry as a free input."""
    lp = np.asarray(lattice, dtype=np.float64)
    labels = list(labels)
    _check_ctc_args(lp, labels)
    if not ctc_feasible(lp.shape[0], labels):
        return float("inf"), np.zeros_like(lp)
    ext = _extend(labels)
    alpha, beta = _ctc_alpha(lp, ext), _ctc_beta(lp, ext)
    log_p = _logsumexp(alpha[-1, -2:] if len(ext) > 1 else alpha[-1, -1:])
    # alpha and beta both include the frame-t emission, hence the extra -lp
    occ = alpha + beta
    grad = np.zeros_like(lp)
    for k in set(ext):
        cols = [s for s, e in enumerate(ext) if e == k]
        grad[:, k] = -np.exp(_logsumexp(occ[:, cols], axis=1) - lp[:, k] - log_p)
    return -float(log_p), grad


def greedy_ctc_decode(lattice) -> List[int]:
    """Frame-wise argmax, merge repeats, drop blanks."""
    best = np.argmax(np.asarray(lattice), axis=1)
    out, prev = [], None
    for k in best:
        k = int(k)
        if k != prev and k != BLANK:
            out.append(k)
        prev = k
    return out


# ---------------------------------------------------------------- CE and joint scoring

def cross_entropy(logits, target: int) -> float:
    z = np.asarray(logits, dtype=np.float64)
    if not (0 <= target < z.shape[-1]):
        raise KernelError(f"target {target} outside 0..{z.shape[-1] - 1}")
    return -float(log_softmax(z)[target])


def cross_entropy_grad(logits, target: int) -> Tuple[float, np.ndarray]:
    z = np.asarray(logits, dtype=np.float64)
    loss = cross_entropy(z, target)
    g = np.exp(log_softmax(z))
    g[target] -= 1.0
    return loss, g


def joint_loss(loss_ce: float, loss_ctc: float, alpha: float = ALPHA) -> float:
    """Training objective: convex mix of the CE and CTC negative log-likelihoods."""
    return alpha * loss_ce + (1.0 - alpha) * loss_ctc


def joint_decode_score(logp_ce: float, logp_ctc: float, lam: float = LAMBDA) -> float:
    return lam * logp_ce + (1.0 - lam) * logp_ctc


def joint_decode(hypotheses: Sequence[Tuple[object, float, float]], lam: float = LAMBDA):
    """Pick the hypothesis maximizing the interpolated score.

    ``hypotheses`` holds (hyp, logp_ce, logp_ctc) triples; ties keep the
    earlier entry.  Returns (hyp, score).
    """
    if not hypotheses:
        raise KernelError("no hypotheses to decode")
    scores = [joint_decode_score(ce, ctc, lam) for _, ce, ctc in hypotheses]
    i = int(np.argmax(scores))
    return hypotheses[i][0], scores[i]

