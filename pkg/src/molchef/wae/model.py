"""Reactant-bag autoencoder: set encoder, sequential decoder, WAE objective."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..config import RunConfig
from ..embed import GGNN, make_batch
from ..numerics import ops as T
from ..numerics.layers import gru_cell, init_gru, init_linear, init_mlp, linear, mlp
from ..numerics.params import ParameterStore
from ..numerics.stats import gaussian_reparam_sample, mmd_squared
from ..numerics.tensor import Tensor
from .vocab import Bag, EmptyBag, ReactantVocabulary


class BatchTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class GaussianPosterior:
    mean: np.ndarray
    log_var: np.ndarray

    @property
    def variance(self) -> np.ndarray:
        return np.exp(self.log_var)


@dataclass(frozen=True)
class DecodeResult:
    """Outcome of decoding one latent point.

    ``empty`` is set when halt was picked at the first step; ``bag`` is then ().
    """

    bag: Bag
    sequence: tuple[int, ...]  # reactants in generation order
    empty: bool
    logits: tuple[np.ndarray, ...]  # one (V + 1,) row per step taken


class MoleculeChef:
    """Parameter layout and forward passes of the reactant-bag model.

    Token ``len(vocab)`` is the halt token in every logit row.
    """

    def __init__(self, vocab: ReactantVocabulary, config: RunConfig = RunConfig()):
        self.vocab = vocab
        self.config = config
        self.ggnn = GGNN("ggnn", config.node_dim, config.embed_dim, config.ggnn_steps)
        self.vocab_batch = make_batch(vocab.graphs, self.ggnn.table)

    @property
    def halt(self) -> int:
        return len(self.vocab)

    def init_params(self, seed: int) -> ParameterStore:
        c = self.config
        rng = np.random.default_rng([seed, 0])
        store = ParameterStore()
        self.ggnn.init(store, rng)
        init_mlp(store, "enc.hidden", [c.embed_dim, c.encoder_hidden], rng)
        init_linear(store, "enc.mean", c.encoder_hidden, c.latent_dim, rng)
        init_linear(store, "enc.log_var", c.encoder_hidden, c.latent_dim, rng)
        init_linear(store, "dec.init", c.latent_dim, c.gru_layers * c.gru_hidden, rng, bias=False)
        init_gru(store, "dec.gru", c.embed_dim, c.gru_hidden, c.gru_layers, rng)
        init_mlp(store, "dec.query", [c.gru_hidden, c.decoder_hidden, c.embed_dim], rng)
        store.add("dec.halt", rng.normal(0.0, 0.1, (1, c.embed_dim)))
        init_mlp(store, "prop", [c.latent_dim, c.property_hidden, c.property_hidden, 1], rng)
        # wider initial logits and a narrow posterior speed up early reconstruction
        for name in store.names("ggnn.output") + store.names("dec.query"):
            store.set_value(name, store[name].value * 2.0)
        store.set_value("enc.log_var.bias", np.full(c.latent_dim, -6.0))
        return store

    # ----------------------------------------------------------- encoder

    def vocab_embeddings(self, store: ParameterStore) -> Tensor:
        """(V, embed_dim) embeddings of every vocabulary molecule."""
        return self.ggnn.embed_batch(self.vocab_batch, store)

    def encode_batch(self, bags: Sequence[Bag], store: ParameterStore,
                     embeddings: Tensor | None = None) -> tuple[Tensor, Tensor]:
        """(mean, log_var), each (n_bags, latent_dim)."""
        if any(len(b) == 0 for b in bags):
            raise EmptyBag("cannot encode an empty bag")
        emb = self.vocab_embeddings(store) if embeddings is None else embeddings
        # sorted member order makes the sum bit-identical for any input ordering
        members = np.concatenate([np.sort(np.asarray(b, dtype=np.int64)) for b in bags])
        owner = np.repeat(np.arange(len(bags)), [len(b) for b in bags])
        pooled = T.segment_sum(T.take(emb, members), owner, len(bags))
        h = T.relu(mlp(pooled, store, "enc.hidden", 1))
        return linear(h, store, "enc.mean"), linear(h, store, "enc.log_var")

    def encode(self, bag: Bag, store: ParameterStore) -> GaussianPosterior:
        mean, log_var = self.encode_batch([bag], store)
        return GaussianPosterior(mean.value[0].copy(), log_var.value[0].copy())

    # ----------------------------------------------------------- decoder

    def _initial_hidden(self, z, store: ParameterStore) -> list[Tensor]:
        c = self.config
        h0 = T.matmul(z, store["dec.init.weight"])
        return [T.slice_(h0, (Ellipsis, slice(k * c.gru_hidden, (k + 1) * c.gru_hidden)))
                for k in range(c.gru_layers)]

    def _token_matrix(self, store: ParameterStore, embeddings: Tensor | None) -> Tensor:
        emb = self.vocab_embeddings(store) if embeddings is None else embeddings
        return T.concat([emb, store["dec.halt"]], axis=0)

    def _step(self, inp, hidden, store: ParameterStore, tokens_t: Tensor):
        hidden = gru_cell(inp, hidden, store, "dec.gru")
        query = mlp(hidden[-1], store, "dec.query", 2)
        return hidden, T.matmul(query, tokens_t)

    def reconstruction_loss(self, sequences: Sequence[Sequence[int]], z, store: ParameterStore,
                            embeddings: Tensor | None = None) -> Tensor:
        """Per-row teacher-forced cross-entropy, shape (n,).

        Each sequence lists reactants in the order they are fed; halt is
        appended unless the sequence already has ``max_steps`` entries.
        """
        z = T.as_tensor(z)
        tokens = self._token_matrix(store, embeddings)
        tokens_t = T.transpose(tokens)
        targets = []
        for seq in sequences:
            if len(seq) == 0 or len(seq) > self.config.max_steps:
                raise EmptyBag(f"bag size must be 1..{self.config.max_steps}, got {len(seq)}")
            targets.append(list(seq) + ([self.halt] if len(seq) < self.config.max_steps else []))
        n = len(targets)
        length = max(len(t) for t in targets)
        hidden = self._initial_hidden(z, store)
        inp = Tensor(np.zeros((n, self.config.embed_dim)))
        total = None
        for t in range(length):
            hidden, logits = self._step(inp, hidden, store, tokens_t)
            tgt = np.array([row[t] if t < len(row) else 0 for row in targets], dtype=np.int64)
            ce = T.softmax_cross_entropy(logits, tgt)
            live = np.array([t < len(row) for row in targets], dtype=np.float64)
            if not live.all():
                ce = T.mul(ce, live)
            total = ce if total is None else T.add(total, ce)
            if t + 1 < length:
                inp = T.take(tokens, tgt)
        return total

    def decode(self, z: np.ndarray, store: ParameterStore, mode: str = "greedy",
               rng: np.random.Generator | None = None, embeddings: np.ndarray | None = None) -> list[DecodeResult]:
        """Decode each row of ``z`` (shape (n, latent_dim) or (latent_dim,)).

        Pass precomputed vocabulary ``embeddings`` to skip the graph network.
        """
        if mode not in ("greedy", "sample"):
            raise ValueError(f"unknown decode mode {mode!r}")
        if mode == "sample" and rng is None:
            raise ValueError("sampling needs an rng")
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if not np.all(np.isfinite(z)):
            raise ValueError("latent point must be finite")
        n = z.shape[0]
        emb = None if embeddings is None else Tensor(embeddings)
        tokens = self._token_matrix(store, emb).value
        tokens_t = Tensor(tokens.T)
        hidden = self._initial_hidden(z, store)
        inp = Tensor(np.zeros((n, self.config.embed_dim)))
        seqs: list[list[int]] = [[] for _ in range(n)]
        logs: list[list[np.ndarray]] = [[] for _ in range(n)]
        done = np.zeros(n, dtype=bool)
        halted_first = np.zeros(n, dtype=bool)
        for t in range(self.config.max_steps):
            hidden, logits = self._step(inp, hidden, store, tokens_t)
            lv = logits.value
            if mode == "greedy":
                picks = lv.argmax(axis=1)
            else:
                shifted = np.exp(lv - lv.max(axis=1, keepdims=True))
                probs = shifted / shifted.sum(axis=1, keepdims=True)
                picks = np.array([rng.choice(lv.shape[1], p=p) for p in probs])
            for i in np.flatnonzero(~done):
                logs[i].append(lv[i].copy())
                if picks[i] == self.halt:
                    done[i] = True
                    halted_first[i] = t == 0
                else:
                    seqs[i].append(int(picks[i]))
            if done.all():
                break
            # rows that already halted keep running on a dummy token; their picks are ignored
            feed = np.where(done, 0, np.minimum(picks, self.halt - 1))
            inp = Tensor(tokens[feed])
        return [DecodeResult(tuple(sorted(s)), tuple(s), bool(e), tuple(l))
                for s, e, l in zip(seqs, halted_first, logs)]

    # ----------------------------------------------------- property head

    def property_head(self, z, store: ParameterStore) -> Tensor:
        """Predicted product score; (n,) for (n, latent_dim) input, scalar for a vector."""
        z = T.as_tensor(z)
        out = mlp(T.reshape(z, (1, z.shape[0])) if z.ndim == 1 else z, store, "prop", 3)
        return T.reshape(out, (out.shape[0],)) if z.ndim == 2 else T.reshape(out, ())

    # ------------------------------------------------------------ WAE loss

    def wae_loss(self, bags: Sequence[Bag], store: ParameterStore, rng: np.random.Generator,
                 targets: Sequence[float] | None = None, orderings: Sequence[Sequence[int]] | None = None,
                 lambda_mmd: float | None = None, noise: np.ndarray | None = None,
                 prior: np.ndarray | None = None) -> tuple[Tensor, dict[str, float]]:
        """Reconstruction + lambda * MMD (+ weighted property MSE when targets are given).

        Randomness is drawn from ``rng`` in a fixed order (posterior noise,
        orderings, prior draws); any of these can be injected instead.
        """
        c = self.config
        lam = c.lambda_mmd if lambda_mmd is None else lambda_mmd
        n = len(bags)
        if n < 2:
            raise BatchTooSmall("MMD needs at least two bags per batch")
        emb = self.vocab_embeddings(store)
        mean, log_var = self.encode_batch(bags, store, emb)
        if noise is None:
            noise = rng.standard_normal((n, c.latent_dim))
        z = gaussian_reparam_sample(mean, log_var, noise)
        if orderings is None:
            orderings = [rng.permutation(len(b)) for b in bags]
        sequences = [[bag[k] for k in order] for bag, order in zip(bags, orderings)]
        recon = T.mean(self.reconstruction_loss(sequences, z, store, emb))
        if prior is None:
            prior = rng.standard_normal((n, c.latent_dim))
        mmd = mmd_squared(z, prior, kernel=c.mmd_kernel)
        total = T.add(recon, T.scale(mmd, lam))
        parts = {"recon": recon.item(), "mmd": mmd.item()}
        if targets is not None:
            err = T.sub(self.property_head(z, store), np.asarray(targets, dtype=np.float64))
            prop = T.mean(T.square(err))
            total = T.add(total, T.scale(prop, c.property_weight))
            parts["prop"] = prop.item()
        return total, parts
