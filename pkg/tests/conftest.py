import numpy as np
import pytest

from bodyformer.numerics import graph_scope, no_grad


def central_difference(fn, arrays, h=1e-5, entries=None):
    """Central-difference gradient of scalar ``fn()`` w.r.t. each array in ``arrays``.

    ``arrays`` are perturbed in place and restored. ``entries`` optionally maps
    an array position to the flat indices to probe; other entries stay NaN.
    """
    grads = []
    for pos, arr in enumerate(arrays):
        g = np.full(arr.shape, np.nan)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        idx = range(flat.size) if entries is None or pos not in entries else entries[pos]
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            with no_grad():
                fp = float(fn())
            flat[i] = orig - h
            with no_grad():
                fm = float(fn())
            flat[i] = orig
            gflat[i] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def relative_error(analytic, numeric, floor=1e-6):
    """||a - n|| / max(||a||, ||n||, floor) over the probed (non-NaN) entries.

    The floor keeps groups whose exact gradient is zero (e.g. attention key
    biases, which softmax shift-invariance cancels) from dividing round-off by
    round-off.
    """
    sel = ~np.isnan(numeric)
    a = np.zeros_like(numeric) if analytic is None else analytic
    a, n = a[sel], numeric[sel]
    denom = max(np.linalg.norm(a), np.linalg.norm(n), floor)
    return float(np.linalg.norm(a - n) / denom)


# one PASS/FAIL line per acceptance criterion, echoed in the session summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def fresh_graph():
    with graph_scope() as g:
        yield g


_LEAF_PARTS = {"w", "b", "gain", "bias", "q", "k", "v", "o", "fc1", "fc2"}


def parameter_group(name):
    """Sub-layer a parameter belongs to: "encoder.0.self_attn.k.b" -> "encoder.0.self_attn".

    Free-standing tensors (frequencies, prior, PMA seed, start token) are their own group.
    """
    parts = name.split(".")
    while len(parts) > 1 and parts[-1] in _LEAF_PARTS:
        parts.pop()
    return ".".join(parts)


def full_loss_gradient_errors(per_tensor=10, seed=0, h=1e-5):
    """Relative error of the tape gradient of the full training objective, per parameter group.

    Tiny config, B=2 sequences of T=8 frames with J=2 joints, fixed latent noise
    and a frame keep-mask with dropped frames. Every parameter tensor is probed
    at up to ``per_tensor`` random entries by central differences.
    """
    from bodyformer import numerics as nx
    from bodyformer.model import init_params, tiny_config
    from bodyformer.synthetic import synthetic_dataset
    from bodyformer.training import TrainingSchedule, crossmodal_loss, full_batch

    rng = np.random.default_rng(seed)
    params = init_params(tiny_config(), rng)
    # move the learnable prior and frequencies off their symmetric initial values
    params["prior.mu"].data[:] = rng.normal(0, 0.3, params["prior.mu"].shape)
    params["prior.logvar"].data[:] = rng.normal(0, 0.3, params["prior.logvar"].shape)
    for name in ("speech_embed", "motion_embed"):
        params[f"{name}.mpe_freqs"].data *= rng.uniform(0.5, 1.5, params[f"{name}.mpe_freqs"].shape)
    batch = full_batch(synthetic_dataset(2, 8, seed=seed + 3))
    noise = rng.standard_normal((2, params.config.d_model))
    keep = np.ones((2, 7))
    keep[0, 2] = keep[1, 5] = 0.0
    schedule = TrainingSchedule(grad_clip=0.0)
    epoch = 4

    def loss():
        return crossmodal_loss(params, batch, noise, keep, epoch, schedule)[0]

    params.zero_grad()
    with nx.graph_scope():
        nx.backward(loss())
    names = list(params)
    entries = {i: rng.choice(params[n].data.size, min(per_tensor, params[n].data.size),
                             replace=False) for i, n in enumerate(names)}
    numeric = central_difference(lambda: loss().data, [params[n].data for n in names], h, entries)
    grouped = {}
    for n, g in zip(names, numeric):
        sel = ~np.isnan(g)
        a = np.zeros_like(g) if params[n].grad is None else params[n].grad
        pair = grouped.setdefault(parameter_group(n), ([], []))
        pair[0].append(a[sel])
        pair[1].append(g[sel])
    return {k: relative_error(np.concatenate(a), np.concatenate(n)) for k, (a, n) in grouped.items()}
