"""Variational affordance encoder-decoder.

The encoder maps an RGB image to a diagonal Gaussian over the affordance
latent; the decoder maps a latent vector to one sigmoid probability map per
affordance. Training minimizes per-pixel binary cross entropy plus beta times
the KL divergence to the standard normal prior.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from . import checkpoint

log = logging.getLogger(__name__)

LOGVAR_MIN, LOGVAR_MAX = -10.0, 10.0
BCE_EPS = 1e-7
OUTPUT_BIAS = -4.0


@dataclass(frozen=True)
class VaedConfig:
    latent_dim: int = 10
    beta: float = 4.0
    conv_spec: tuple = ((32, 4, 2), (64, 4, 2), (128, 4, 2), (256, 4, 2))
    image_size: tuple = (64, 64)
    n_affordances: int = 2
    hidden_dim: int = 256
    leak: float = 0.2
    batch_norm: bool = True

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if len(self.conv_spec) != 4:
            raise ValueError("conv_spec needs exactly 4 stages")
        object.__setattr__(self, "conv_spec", tuple(tuple(int(v) for v in s) for s in self.conv_spec))
        object.__setattr__(self, "image_size", tuple(int(v) for v in self.image_size))

    def to_dict(self):
        d = asdict(self)
        d["conv_spec"] = [list(s) for s in self.conv_spec]
        d["image_size"] = list(self.image_size)
        return d

    @classmethod
    def from_dict(cls, d):
        known = cls.__dataclass_fields__
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0


def _padding(k, s):
    return max((k - s + 1) // 2, 0)


class VAED(nn.Module):
    def __init__(self, cfg: VaedConfig = VaedConfig()):
        super().__init__()
        self.cfg = cfg
        h, w = cfg.image_size
        sizes = [(h, w)]
        enc = []
        c_in = 3
        for c_out, k, s in cfg.conv_spec:
            p = _padding(k, s)
            enc.append(nn.Conv2d(c_in, c_out, k, s, p))
            h = (h + 2 * p - k) // s + 1
            w = (w + 2 * p - k) // s + 1
            if h < 1 or w < 1:
                raise ValueError(f"conv_spec shrinks {cfg.image_size} to nothing")
            sizes.append((h, w))
            c_in = c_out
        self.enc_convs = nn.ModuleList(enc)
        bn = cfg.batch_norm
        self.enc_norms = nn.ModuleList(nn.BatchNorm2d(s[0]) if bn else nn.Identity() for s in cfg.conv_spec)
        self.feat_shape = (c_in, h, w)
        flat = c_in * h * w
        self.enc_fc = nn.Linear(flat, cfg.hidden_dim)
        self.fc_mu = nn.Linear(cfg.hidden_dim, cfg.latent_dim)
        self.fc_logvar = nn.Linear(cfg.hidden_dim, cfg.latent_dim)
        self.dec_fc = nn.Linear(cfg.latent_dim, flat)

        dec = []
        channels = [s[0] for s in cfg.conv_spec]
        outs = channels[::-1][1:] + [cfg.n_affordances]
        for i, (stage, c_out) in enumerate(zip(reversed(cfg.conv_spec), outs)):
            c_here, k, s = stage
            p = _padding(k, s)
            h_in, w_in = sizes[len(sizes) - 1 - i]
            h_t, w_t = sizes[len(sizes) - 2 - i]
            op = (h_t - ((h_in - 1) * s - 2 * p + k), w_t - ((w_in - 1) * s - 2 * p + k))
            if not all(0 <= v < max(s, 1) for v in op):
                raise ValueError(f"transposed stage {i} cannot restore size {(h_t, w_t)}")
            dec.append(nn.ConvTranspose2d(c_here, c_out, k, s, p, output_padding=op))
        self.dec_convs = nn.ModuleList(dec)
        self.dec_norms = nn.ModuleList(nn.BatchNorm2d(c) if bn else nn.Identity() for c in outs[:-1])
        # start the output maps near the (sparse) label prior instead of 0.5
        nn.init.constant_(self.dec_convs[-1].bias, OUTPUT_BIAS)

    def _act(self, x):
        return F.leaky_relu(x, self.cfg.leak)

    def check_images(self, x: torch.Tensor):
        h, w = self.cfg.image_size
        if x.ndim != 4 or x.shape[1:] != (3, h, w):
            raise ValueError(f"expected images (N, 3, {h}, {w}), got {tuple(x.shape)}")

    def encode(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Images (N, 3, H, W) in [0, 1] -> (mu, logvar), each (N, latent_dim)."""
        self.check_images(x)
        for conv, norm in zip(self.enc_convs, self.enc_norms):
            x = self._act(norm(conv(x)))
        x = self._act(self.enc_fc(x.flatten(1)))
        logvar = torch.clamp(self.fc_logvar(x), LOGVAR_MIN, LOGVAR_MAX)
        return self.fc_mu(x), logvar

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        """Latents (N, latent_dim) -> affordance probabilities (N, C, H, W)."""
        if z.ndim != 2 or z.shape[1] != self.cfg.latent_dim:
            raise ValueError(f"expected latents (N, {self.cfg.latent_dim}), got {tuple(z.shape)}")
        x = self._act(self.dec_fc(z)).view(-1, *self.feat_shape)
        last = len(self.dec_convs) - 1
        for i, conv in enumerate(self.dec_convs):
            x = conv(x)
            x = torch.sigmoid(x) if i == last else self._act(self.dec_norms[i](x))
        return x

    def forward(self, x, noise=None):
        mu, logvar = self.encode(x)
        z = mu if noise is None else reparameterize(mu, logvar, noise)
        return self.decode(z), mu, logvar


def reparameterize(mu, logvar, noise):
    """z = mu + exp(logvar / 2) * noise."""
    if noise.shape != mu.shape:
        raise ValueError(f"noise shape {tuple(noise.shape)} does not match {tuple(mu.shape)}")
    return mu + torch.exp(0.5 * logvar) * noise


def kl_divergence(mu, logvar):
    """KL(N(mu, sigma^2) || N(0, I)), summed over latent dims, averaged over the batch."""
    kl = 0.5 * (mu.pow(2) + logvar.exp() - 1.0 - logvar)
    if kl.ndim == 1:
        return kl.sum()
    return kl.sum(dim=1).mean()


def bce_loss(pred, target):
    """Mean binary cross entropy over every pixel and channel, pred clamped to [eps, 1 - eps]."""
    if pred.shape != target.shape:
        raise ValueError(f"prediction {tuple(pred.shape)} vs target {tuple(target.shape)}")
    p = pred.clamp(BCE_EPS, 1.0 - BCE_EPS)
    t = target.to(p.dtype)
    return -(t * torch.log(p) + (1.0 - t) * torch.log1p(-p)).mean()


def combine(bce, kl, beta):
    return bce + beta * kl


def vaed_loss(model: VAED, images, target, noise, beta=None):
    """Total = BCE + beta * KL; returns ``(total, components)``.

    The reconstruction term is the per-image BCE: summed over pixels and
    channels, averaged over the batch, matching the per-image KL. The
    pixel-mean value is reported as ``bce_mean`` for logging.
    """
    beta = model.cfg.beta if beta is None else beta
    mu, logvar = model.encode(images)
    pred = model.decode(reparameterize(mu, logvar, noise))
    bce_mean = bce_loss(pred, target)
    bce = bce_mean * pred[0].numel()
    kl = kl_divergence(mu, logvar)
    return combine(bce, kl, beta), {"bce": bce, "kl": kl, "bce_mean": bce_mean}


# --- data helpers -------------------------------------------------------------


def images_to_tensor(rgb, dtype=torch.float32) -> torch.Tensor:
    """uint8 (N, H, W, 3) or (H, W, 3) -> float (N, 3, H, W) in [0, 1]."""
    a = np.asarray(rgb)
    if a.ndim == 3:
        a = a[None]
    return torch.from_numpy(np.ascontiguousarray(a.transpose(0, 3, 1, 2))).to(dtype) / 255.0


def labels_to_tensor(labels, dtype=torch.float32) -> torch.Tensor:
    a = np.asarray(labels)
    if a.ndim == 3:
        a = a[None]
    return torch.from_numpy(np.ascontiguousarray(a.transpose(0, 3, 1, 2))).to(dtype)


def to_affordance_map(probs: torch.Tensor) -> np.ndarray:
    """(N, C, H, W) tensor -> (N, H, W, C) numpy."""
    return probs.detach().cpu().numpy().transpose(0, 2, 3, 1)


@torch.no_grad()
def encode_mean(model: VAED, rgb, batch_size: int = 256) -> np.ndarray:
    """Posterior means for uint8 images (N, H, W, 3); the policy's latent input."""
    model.eval()
    rgb = np.asarray(rgb)
    out = []
    for i in range(0, len(rgb), batch_size):
        mu, _ = model.encode(images_to_tensor(rgb[i : i + batch_size], next(model.parameters()).dtype))
        out.append(mu.numpy())
    return np.concatenate(out) if out else np.zeros((0, model.cfg.latent_dim))


@torch.no_grad()
def predict_maps(model: VAED, rgb, batch_size: int = 256) -> np.ndarray:
    model.eval()
    rgb = np.asarray(rgb)
    out = []
    for i in range(0, len(rgb), batch_size):
        mu, _ = model.encode(images_to_tensor(rgb[i : i + batch_size]))
        out.append(to_affordance_map(model.decode(mu)))
    return np.concatenate(out)


# --- training -------------------------------------------------------------------


def train_vaed(rgb, labels, cfg: VaedConfig = VaedConfig(), train_cfg: TrainConfig = TrainConfig(), on_epoch=None):
    """Fit a VAED on uint8 images (N, H, W, 3) and masks (N, H, W, C).

    Returns ``(model, log)`` with one ``{epoch, bce, kl, total}`` row per epoch;
    ``bce`` is the pixel-mean value, ``total`` the optimized per-image loss.
    Bit-reproducible for a fixed ``train_cfg.seed`` on one machine.
    """
    torch.manual_seed(train_cfg.seed)
    gen = torch.Generator().manual_seed(train_cfg.seed)
    model = VAED(cfg)
    opt = torch.optim.Adam(model.parameters(), lr=train_cfg.lr)
    x_all = images_to_tensor(rgb)
    y_all = labels_to_tensor(labels)
    n = len(x_all)
    rows = []
    for epoch in range(train_cfg.epochs):
        model.train()
        perm = torch.randperm(n, generator=gen)
        sums = np.zeros(3)
        for i in range(0, n, train_cfg.batch_size):
            idx = perm[i : i + train_cfg.batch_size]
            noise = torch.randn(len(idx), cfg.latent_dim, generator=gen)
            total, parts = vaed_loss(model, x_all[idx], y_all[idx], noise, cfg.beta)
            opt.zero_grad()
            total.backward()
            opt.step()
            sums += len(idx) * np.array([parts["bce_mean"].item(), parts["kl"].item(), total.item()])
        bce, kl, tot = sums / max(n, 1)
        row = {"epoch": epoch, "bce": float(bce), "kl": float(kl), "total": float(tot)}
        rows.append(row)
        log.info("vaed epoch %d bce %.5f kl %.4f total %.5f", epoch, bce, kl, tot)
        if on_epoch is not None:
            on_epoch(row)
    model.eval()
    return model, rows


def save_vaed(model: VAED, path, extra: dict | None = None) -> None:
    config = {"kind": "vaed", "model": model.cfg.to_dict()}
    if extra:
        config.update(extra)
    checkpoint.save(path, model.state_dict(), config)


def load_vaed(path) -> VAED:
    header, tensors = checkpoint.load(path)
    config = header["config"]
    if config.get("kind") != "vaed":
        raise checkpoint.CheckpointError(f"{path} is not a VAED checkpoint")
    model = VAED(VaedConfig.from_dict(config["model"]))
    model.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model
