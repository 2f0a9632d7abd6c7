"""Shared builders for randomized test corpora."""

import numpy as np

from pairforge.core import AMINO_ACIDS, Label, PairExample, ProteinRecord, Role
from pairforge.ingest import EmbeddingTable, ScaleTable


def random_records(rng, n, prefix="P", role=Role.HOST, min_len=30, max_len=60):
    records = []
    for i in range(n):
        length = int(rng.integers(min_len, max_len + 1))
        seq = "".join(AMINO_ACIDS[j] for j in rng.integers(0, 20, size=length))
        records.append(ProteinRecord(id=f"{prefix}{i:04d}", role=role, sequence=seq))
    return records


def random_embeddings(rng, records, dim=8):
    vectors = {}
    for record in records:
        vec = rng.normal(size=dim)
        vec.flags.writeable = False
        vectors[record.id] = vec
    return EmbeddingTable(dim=dim, vectors=vectors)


def random_pair_keys(rng, ids, n):
    keys = set()
    while len(keys) < n:
        i, j = rng.choice(len(ids), size=2, replace=False)
        keys.add(tuple(sorted((ids[i], ids[j]))))
    return sorted(keys)


def pairs_from_keys(keys, label=Label.POSITIVE):
    return [PairExample(a, b, label) for a, b in keys]


def toy_scale(mapping, dim=1, fill=0.0):
    """A full 20-residue scale where unlisted residues take a constant."""
    values = {}
    for residue in AMINO_ACIDS:
        raw = mapping.get(residue, [fill] * dim)
        if np.isscalar(raw):
            raw = [raw]
        vec = np.asarray(raw, dtype=np.float64)
        vec.flags.writeable = False
        values[residue] = vec
    return ScaleTable(name="toy", dim=dim, values=values)


# ---------------------------------------------------------------------------
# Reference forward pass and finite-difference gradient harness


def reference_logits(spec, params, x, input_dim):
    """Straight-line reimplementation of both scorers.

    Returns the logits plus the hidden-layer pre-activations (used to keep
    finite-difference probes away from the relu kink).
    """
    from scipy.special import erf

    def act(a):
        if spec.activation == "relu":
            return np.maximum(a, 0.0)
        if spec.activation == "tanh":
            return np.tanh(a)
        if spec.activation == "gelu":
            return a * 0.5 * (1.0 + erf(a / np.sqrt(2.0)))
        return a / (1.0 + np.exp(-a))

    def encode(h):
        pre = []
        depth = len(spec.hidden_sizes)
        for i in range(depth + 1):
            a = h @ params[f"w{i}"] + params[f"b{i}"]
            if i < depth:
                pre.append(a)
                h = act(a)
            else:
                h = a
        return h, pre

    if spec.architecture == "pair_mlp":
        out, pre = encode(x)
        return out[:, 0], pre
    u, pre_a = encode(x[:, :input_dim])
    v, pre_b = encode(x[:, input_dim:2 * input_dim])
    denom = np.maximum(np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1),
                       1e-12)
    cos = (u * v).sum(axis=1) / denom
    return cos * np.exp(-float(params["log_t"])), pre_a + pre_b


def gradient_check(spec, input_dim, n_points=10, seed=0, step=1e-5):
    """Worst relative error between analytic and central-difference gradients.

    Also cross-checks the module forward pass against ``reference_logits``
    at every probe point.
    """
    from pairforge.predict import build_model, loss_and_gradients
    from pairforge.predict import _forward  # forward oracle comparison

    rng = np.random.default_rng(seed)
    pair_width = input_dim if spec.architecture == "pair_mlp" else 4 * input_dim
    model = build_model(spec, input_dim)
    params = model.params
    worst = 0.0
    for _ in range(n_points):
        for _attempt in range(100):
            x = rng.normal(size=(6, pair_width))
            _, pre = reference_logits(spec, params, x, input_dim)
            if all(np.abs(a).min() > 1e-3 for a in pre):
                break
        y = rng.integers(0, 2, size=6).astype(np.float64)
        weights = rng.uniform(0.5, 2.0, size=6)

        expected, _ = reference_logits(spec, params, x, input_dim)
        actual, _ = _forward(spec, params, x, input_dim)
        assert np.max(np.abs(actual - expected)) <= 1e-12

        _, grads = loss_and_gradients(spec, params, x, y, input_dim, weights)
        for key, p in params.items():
            flat = p.reshape(-1)
            analytic = grads[key].reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + step
                up, _ = loss_and_gradients(spec, params, x, y, input_dim,
                                           weights)
                flat[j] = orig - step
                down, _ = loss_and_gradients(spec, params, x, y, input_dim,
                                             weights)
                flat[j] = orig
                fd = (up - down) / (2.0 * step)
                scale = max(1.0, abs(analytic[j]), abs(fd))
                worst = max(worst, abs(analytic[j] - fd) / scale)
    return worst
