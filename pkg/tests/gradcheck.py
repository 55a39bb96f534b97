"""Directional finite-difference check shared by the gradient tests."""
import torch


def directional_errors(loss_fn, params, n_dirs=20, h=1e-6, seed=0):
    """Relative error between autograd and central differences along random directions.

    ``loss_fn()`` must be deterministic; ``params`` are float64 leaf tensors.
    """
    gen = torch.Generator().manual_seed(seed)
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params)
    errs = []
    for _ in range(n_dirs):
        dirs = [torch.randn(p.shape, generator=gen, dtype=p.dtype) for p in params]
        norm = torch.sqrt(sum((d * d).sum() for d in dirs))
        dirs = [d / norm for d in dirs]
        analytic = sum((g * d).sum() for g, d in zip(grads, dirs)).item()
        with torch.no_grad():
            for p, d in zip(params, dirs):
                p.add_(h * d)
            up = loss_fn().item()
            for p, d in zip(params, dirs):
                p.sub_(2 * h * d)
            down = loss_fn().item()
            for p, d in zip(params, dirs):
                p.add_(h * d)
        numeric = (up - down) / (2 * h)
        errs.append(abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12))
    return errs
