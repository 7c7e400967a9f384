"""Control-to-amplitude network with hand-written gradients.

Architecture, all float64 numpy:
  per control   affine 1->H, layer norm, leaky ReLU
  trunk         GRU over the concatenated control features (input C*H)
  head stack    depth x (affine H->H, layer norm, leaky ReLU)
  head          affine H->M, scaled sigmoid

The scaled sigmoid y = 2*sigmoid(x)^ln(10) + 1e-18 keeps amplitudes
positive with a gentle knee; its derivative has the closed form
p*(y - 1e-18)*(1 - sigmoid(x)).

Parameters live in an ordered name->array mapping with a canonical flat
packing (see param_names) shared by the optimiser and checkpoints. The
backward pass is exact reverse mode through every stage including the GRU
recurrence; tests validate it against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError

LN_EPS = 1e-5
AMP_FLOOR = 1e-18
SIGMOID_POWER = float(np.log(10.0))


@dataclass(frozen=True)
class ModelConfig:
    num_controls: int = 2
    hidden_size: int = 128
    num_bands: int = 2048
    output_depth: int = 3
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.num_controls < 1:
            raise ModelError("need at least one control input")
        if self.hidden_size < 1 or self.num_bands < 1 or self.output_depth < 0:
            raise ModelError("hidden_size, num_bands >= 1 and output_depth >= 0")


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict[str, np.ndarray] = field(repr=False)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Canonical parameter order; flat packing follows this exactly."""
    h, c, m = config.hidden_size, config.num_controls, config.num_bands
    shapes: dict[str, tuple[int, ...]] = {}
    for i in range(c):
        shapes[f"in{i}.w"] = (h,)
        shapes[f"in{i}.b"] = (h,)
        shapes[f"in{i}.gain"] = (h,)
        shapes[f"in{i}.offset"] = (h,)
    shapes["gru.w_ih"] = (3 * h, c * h)
    shapes["gru.w_hh"] = (3 * h, h)
    shapes["gru.b_ih"] = (3 * h,)
    shapes["gru.b_hh"] = (3 * h,)
    for i in range(config.output_depth):
        shapes[f"out{i}.w"] = (h, h)
        shapes[f"out{i}.b"] = (h,)
        shapes[f"out{i}.gain"] = (h,)
        shapes[f"out{i}.offset"] = (h,)
    shapes["head.w"] = (m, h)
    shapes["head.b"] = (m,)
    return shapes


def param_names(config: ModelConfig) -> list[str]:
    return list(param_shapes(config))


def param_count(config: ModelConfig) -> int:
    return sum(int(np.prod(s)) for s in param_shapes(config).values())


def init_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases, unit gains."""
    h, c = config.hidden_size, config.num_controls
    rng = np.random.Generator(np.random.Philox(seed))
    fan_in = {"in": 1, "gru.w_ih": c * h, "gru.w_hh": h, "out": h, "head.w": h}

    tensors: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(config).items():
        if name.endswith((".b", ".offset", "gru.b_ih", "gru.b_hh")):
            tensors[name] = np.zeros(shape)
        elif name.endswith(".gain"):
            tensors[name] = np.ones(shape)
        else:
            if name.startswith("in"):
                fi = fan_in["in"]
            elif name.startswith("out"):
                fi = fan_in["out"]
            else:
                fi = fan_in[name]
            bound = 1.0 / np.sqrt(fi)
            tensors[name] = rng.uniform(-bound, bound, shape)
    return ModelParams(config=config, tensors=tensors)


def pack_params(params: ModelParams) -> np.ndarray:
    return np.concatenate([params.tensors[n].reshape(-1)
                           for n in param_names(params.config)])


def unpack_params(config: ModelConfig, flat: np.ndarray) -> ModelParams:
    shapes = param_shapes(config)
    total = sum(int(np.prod(s)) for s in shapes.values())
    flat = np.asarray(flat, dtype=np.float64)
    if flat.shape != (total,):
        raise ModelError(f"flat parameter vector has {flat.shape}, expected ({total},)")
    tensors = {}
    pos = 0
    for name, shape in shapes.items():
        size = int(np.prod(shape))
        tensors[name] = flat[pos: pos + size].reshape(shape).copy()
        pos += size
    return ModelParams(config=config, tensors=tensors)


def scaled_sigmoid(x: np.ndarray) -> np.ndarray:
    sig = _sigmoid(x)
    return 2.0 * sig ** SIGMOID_POWER + AMP_FLOOR


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _layer_norm(a: np.ndarray, gain: np.ndarray, offset: np.ndarray):
    mu = a.mean(axis=-1, keepdims=True)
    centered = a - mu
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = centered * inv_std
    return gain * xhat + offset, xhat, inv_std


def _layer_norm_back(dz, xhat, inv_std, gain):
    h = xhat.shape[-1]
    dgain = np.sum(dz * xhat, axis=tuple(range(dz.ndim - 1)))
    doffset = np.sum(dz, axis=tuple(range(dz.ndim - 1)))
    dxhat = dz * gain
    da = (inv_std / h) * (h * dxhat
                          - dxhat.sum(axis=-1, keepdims=True)
                          - xhat * np.sum(dxhat * xhat, axis=-1, keepdims=True))
    return da, dgain, doffset


def _leaky(y: np.ndarray, slope: float) -> np.ndarray:
    return np.where(y > 0.0, y, slope * y)


def forward(params: ModelParams, controls: np.ndarray,
            h0: np.ndarray | None = None, want_cache: bool = False):
    """Map control curves to per-band amplitude envelopes.

    controls: (T, C) or (B, T, C); returns amps of matching leading shape
    with M bands on the last axis, plus the final GRU state. With
    want_cache=True also returns the intermediates backward() consumes.
    """
    cfg = params.config
    controls = np.asarray(controls, dtype=np.float64)
    squeeze = controls.ndim == 2
    if squeeze:
        controls = controls[None]
    if controls.ndim != 3 or controls.shape[2] != cfg.num_controls:
        raise ModelError(
            f"controls shape {controls.shape} incompatible with C={cfg.num_controls}")
    b, t, c = controls.shape
    h = cfg.hidden_size

    cache: dict = {"controls": controls}
    feats = np.empty((b, t, c * h))
    in_cache = []
    for i in range(c):
        x = controls[:, :, i]
        a = x[..., None] * params[f"in{i}.w"] + params[f"in{i}.b"]
        z, xhat, inv_std = _layer_norm(a, params[f"in{i}.gain"], params[f"in{i}.offset"])
        y = _leaky(z, cfg.leaky_slope)
        feats[:, :, i * h: (i + 1) * h] = y
        in_cache.append((xhat, inv_std, z))
    cache["in"] = in_cache
    cache["feats"] = feats

    hidden, gru_cache = _gru_forward(params, feats, h0)
    cache["gru"] = gru_cache
    h_final = hidden[:, -1].copy()

    y = hidden
    out_cache = []
    for i in range(cfg.output_depth):
        a = y @ params[f"out{i}.w"].T + params[f"out{i}.b"]
        z, xhat, inv_std = _layer_norm(a, params[f"out{i}.gain"], params[f"out{i}.offset"])
        y_new = _leaky(z, cfg.leaky_slope)
        out_cache.append((y, xhat, inv_std, z))
        y = y_new
    cache["out"] = out_cache
    cache["head_in"] = y

    logits = y @ params["head.w"].T + params["head.b"]
    sig = _sigmoid(logits)
    amps = 2.0 * sig ** SIGMOID_POWER + AMP_FLOOR
    cache["sig"] = sig
    cache["amps"] = amps

    if squeeze:
        amps_out, h_out = amps[0], h_final[0]
    else:
        amps_out, h_out = amps, h_final
    if want_cache:
        return amps_out, h_out, cache
    return amps_out, h_out


def _gru_forward(params: ModelParams, x: np.ndarray, h0: np.ndarray | None):
    """PyTorch-convention GRU: gate order r, z, n; double biases."""
    cfg = params.config
    b, t, _ = x.shape
    hs = cfg.hidden_size
    w_ih, w_hh = params["gru.w_ih"], params["gru.w_hh"]
    b_ih, b_hh = params["gru.b_ih"], params["gru.b_hh"]

    h = np.zeros((b, hs)) if h0 is None else np.array(h0, dtype=np.float64).reshape(b, hs)
    h0_saved = h.copy()
    gates_x = x @ w_ih.T + b_ih  # (B, T, 3H), precomputed outside the loop
    R = np.empty((b, t, hs))
    Z = np.empty((b, t, hs))
    N = np.empty((b, t, hs))
    U = np.empty((b, t, hs))
    H = np.empty((b, t, hs))
    for step in range(t):
        gh = h @ w_hh.T + b_hh
        gx = gates_x[:, step]
        r = _sigmoid(gx[:, :hs] + gh[:, :hs])
        z = _sigmoid(gx[:, hs: 2 * hs] + gh[:, hs: 2 * hs])
        u = gh[:, 2 * hs:]
        n = np.tanh(gx[:, 2 * hs:] + r * u)
        h = (1.0 - z) * n + z * h
        R[:, step], Z[:, step], N[:, step], U[:, step], H[:, step] = r, z, n, u, h
    return H, {"R": R, "Z": Z, "N": N, "U": U, "H": H, "h0": h0_saved, "x": x}


def backward(params: ModelParams, cache: dict, damps: np.ndarray):
    """Exact gradients of a scalar loss wrt every parameter.

    damps matches the amps returned by forward (leading batch axis optional).
    Returns a name->gradient mapping in param_shapes order.
    """
    cfg = params.config
    damps = np.asarray(damps, dtype=np.float64)
    if damps.ndim == 2:
        damps = damps[None]
    sig, amps = cache["sig"], cache["amps"]
    grads = {name: np.zeros(shape) for name, shape in param_shapes(cfg).items()}

    dlogits = damps * SIGMOID_POWER * (amps - AMP_FLOOR) * (1.0 - sig)

    y = cache["head_in"]
    grads["head.w"] = np.einsum("btm,bth->mh", dlogits, y)
    grads["head.b"] = dlogits.sum(axis=(0, 1))
    dy = dlogits @ params["head.w"]

    for i in reversed(range(cfg.output_depth)):
        y_in, xhat, inv_std, z = cache["out"][i]
        dz = dy * np.where(z > 0.0, 1.0, cfg.leaky_slope)
        da, dgain, doffset = _layer_norm_back(dz, xhat, inv_std, params[f"out{i}.gain"])
        grads[f"out{i}.gain"] = dgain
        grads[f"out{i}.offset"] = doffset
        grads[f"out{i}.w"] = np.einsum("bth,btk->hk", da, y_in)
        grads[f"out{i}.b"] = da.sum(axis=(0, 1))
        dy = da @ params[f"out{i}.w"]

    dfeats = _gru_backward(params, cache["gru"], dy, grads)

    h = cfg.hidden_size
    for i in range(cfg.num_controls):
        xhat, inv_std, z = cache["in"][i]
        dyc = dfeats[:, :, i * h: (i + 1) * h]
        dz = dyc * np.where(z > 0.0, 1.0, cfg.leaky_slope)
        da, dgain, doffset = _layer_norm_back(dz, xhat, inv_std, params[f"in{i}.gain"])
        grads[f"in{i}.gain"] = dgain
        grads[f"in{i}.offset"] = doffset
        x = cache["controls"][:, :, i]
        grads[f"in{i}.w"] = np.einsum("bth,bt->h", da, x)
        grads[f"in{i}.b"] = da.sum(axis=(0, 1))
    return grads


def _gru_backward(params: ModelParams, gc: dict, dh_out: np.ndarray, grads: dict):
    cfg = params.config
    hs = cfg.hidden_size
    w_ih, w_hh = params["gru.w_ih"], params["gru.w_hh"]
    R, Z, N, U, H, h0, x = gc["R"], gc["Z"], gc["N"], gc["U"], gc["H"], gc["h0"], gc["x"]
    b, t, _ = x.shape

    dW_ih = np.zeros_like(w_ih)
    dW_hh = np.zeros_like(w_hh)
    db_ih = np.zeros(3 * hs)
    db_hh = np.zeros(3 * hs)
    dx = np.empty_like(x)
    dh = np.zeros((b, hs))
    for step in range(t - 1, -1, -1):
        dh = dh + dh_out[:, step]
        r, z, n, u = R[:, step], Z[:, step], N[:, step], U[:, step]
        h_prev = H[:, step - 1] if step > 0 else h0

        dn = dh * (1.0 - z)
        dz = dh * (h_prev - n)
        dh = dh * z

        dpre_n = dn * (1.0 - n * n)
        dr = dpre_n * u
        dpre_r = dr * r * (1.0 - r)
        dpre_z = dz * z * (1.0 - z)
        dpre_nh = dpre_n * r  # gradient wrt the hidden half of the n gate

        dpre = np.concatenate([dpre_r, dpre_z, dpre_n], axis=1)
        dpre_h = np.concatenate([dpre_r, dpre_z, dpre_nh], axis=1)

        dW_ih += dpre.T @ x[:, step]
        db_ih += dpre.sum(axis=0)
        dW_hh += dpre_h.T @ h_prev
        db_hh += dpre_h.sum(axis=0)

        dx[:, step] = dpre @ w_ih
        dh = dh + dpre_h @ w_hh

    grads["gru.w_ih"] = dW_ih
    grads["gru.w_hh"] = dW_hh
    grads["gru.b_ih"] = db_ih
    grads["gru.b_hh"] = db_hh
    return dx
