"""Shared test utilities."""

import torch


def max_rel_fd_error(loss_fn, tensors, eps=1e-6):
    """Worst relative disagreement between autograd and central differences.

    ``loss_fn`` must recompute the scalar loss from the current contents of
    ``tensors`` (float64 leaves with requires_grad). Relative error uses
    max(|analytic|, |fd|, 1) as denominator so dead-zero gradients compare
    absolutely instead of dividing noise by noise.
    """
    for t in tensors:
        t.grad = None
    loss = loss_fn()
    loss.backward()
    worst = 0.0
    for t in tensors:
        # a parameter that never participated has gradient zero
        grad = t.grad if t.grad is not None else torch.zeros_like(t)
        flat = t.data.view(-1)
        gflat = grad.view(-1)
        for idx in range(flat.numel()):
            orig = flat[idx].item()
            flat[idx] = orig + eps
            with torch.no_grad():
                up = loss_fn().item()
            flat[idx] = orig - eps
            with torch.no_grad():
                down = loss_fn().item()
            flat[idx] = orig
            fd = (up - down) / (2 * eps)
            a = gflat[idx].item()
            err = abs(a - fd) / max(abs(a), abs(fd), 1.0)
            worst = max(worst, err)
    return worst
