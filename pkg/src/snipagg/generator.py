"""Forward sampling of synthetic corpora with known latent structure.

The sampler walks the model's own generative story: global emission
distributions and the word-role transition table come from their
priors, each entity draws its aspect mixture and aspect word
distributions, and every snippet draws an aspect, a value type, and a
role chain that starts at the virtual start state and emits one word
(and one tag) per step. All latent draws are recorded as gold
annotations, and every sampled distribution is returned for parameter
recovery checks.

make_separable additionally interpolates the aspect word priors toward
disjoint vocabulary blocks: at separation 1 the blocks are fully
disjoint (a word generated under aspect a never appears under another
aspect), and at separation 0 the draw stream is identical to
sample_corpus.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from snipagg.corpus import (
    Corpus,
    GoldAnnotations,
    Indexer,
    SeedLexicon,
    Snippet,
    Token,
    default_value_names,
)
from snipagg.model import Hyperparameters, transition_priors, value_prior

log = logging.getLogger(__name__)

SYNTHETIC_TAGS = ("NN", "JJ", "VB", "DT", "RB")
# Tag emission priors lean aspect words onto nouns and value words onto
# adjectives so tag-aware fits have signal to find.
TAG_BIAS = 6.0
MAX_CHAIN_LENGTH = 200


class GeneratorError(ValueError):
    """Invalid sampling request."""


@dataclass
class CorpusShape:
    """Size and length profile of a sampled corpus.

    mean_words feeds either a Poisson length truncated to [1, 30]
    (length_mode "poisson") or, with length_mode "chain", the walk runs
    until the transition table emits the end marker. vocab_size counts
    the whole vocabulary including any reserved seed words.
    """

    n_entities: int
    snippets_per_entity: int
    mean_words: float = 8.0
    length_mode: str = "poisson"
    vocab_size: int = 600
    seed_words_per_value: int = 0

    def validate(self, n_values: int) -> None:
        if self.n_entities < 1 or self.snippets_per_entity < 1:
            raise GeneratorError("need at least one entity and one snippet")
        if self.length_mode not in ("poisson", "chain"):
            raise GeneratorError(f"unknown length mode {self.length_mode!r}")
        if self.mean_words <= 0:
            raise GeneratorError("mean_words must be positive")
        if self.seed_words_per_value < 0:
            raise GeneratorError("seed_words_per_value must be non-negative")
        reserved = n_values * self.seed_words_per_value
        if self.vocab_size <= reserved:
            raise GeneratorError(
                f"vocab_size {self.vocab_size} leaves no room for "
                f"{reserved} reserved seed words"
            )


@dataclass
class SyntheticCorpus:
    """A sampled corpus with its gold latents and true distributions."""

    corpus: Corpus
    gold: GoldAnnotations
    true_parameters: dict
    seeds: SeedLexicon


def _draw_multinomial(rng: np.random.Generator, alpha: np.ndarray) -> np.ndarray:
    """Dirichlet draw by gamma normalization; zero concentrations give
    exact zero mass, which rng.dirichlet would reject."""
    draw = rng.gamma(alpha)
    total = draw.sum()
    while total <= 0.0:
        draw = rng.gamma(alpha)
        total = draw.sum()
    return draw / total


def _choice(rng: np.random.Generator, probs: np.ndarray) -> int:
    edges = np.cumsum(probs)
    idx = int(np.searchsorted(edges, rng.random() * edges[-1], side="right"))
    return min(idx, len(probs) - 1)


def sample_corpus(
    hp: Hyperparameters, shape: CorpusShape, rng_seed: int
) -> SyntheticCorpus:
    """Sample a corpus from the generative story under hp's priors."""
    return _sample(hp, shape, rng_seed, separation=0.0, topic_mix=None)


def make_separable(
    hp: Hyperparameters,
    shape: CorpusShape,
    separation: float,
    rng_seed: int,
    topic_mix: Optional[Sequence[float]] = None,
) -> SyntheticCorpus:
    """Sample a corpus whose aspect vocabularies are pushed apart.

    separation in [0, 1] scales the aspect emission prior outside each
    aspect's designated vocabulary block: 0 reproduces sample_corpus
    draw for draw, 1 makes the aspect vocabularies fully disjoint.
    topic_mix, when given, replaces the sampled transition table with
    fixed rows proportional to the mix (one weight per enabled role)
    with end probability 1 / mean_words, which pins the expected role
    proportions for noise-level experiments.
    """
    if not (0.0 <= separation <= 1.0):
        raise GeneratorError("separation must lie in [0, 1]")
    return _sample(hp, shape, rng_seed, separation, topic_mix)


def _sample(
    hp: Hyperparameters,
    shape: CorpusShape,
    rng_seed: int,
    separation: float,
    topic_mix: Optional[Sequence[float]],
) -> SyntheticCorpus:
    hp.validate()
    shape.validate(hp.N)
    layout = hp.layout()
    n = layout.n_topics
    rng = np.random.default_rng(rng_seed)

    value_names = default_value_names(hp.N)
    words: list[str] = []
    seed_sets: list[set[int]] = []
    for v in range(hp.N):
        s = set()
        for k in range(shape.seed_words_per_value):
            s.add(len(words))
            words.append(f"{value_names[v]}seed{k}")
        seed_sets.append(s)
    reserved = len(words)
    words.extend(f"w{k:04d}" for k in range(shape.vocab_size - reserved))
    V = len(words)
    seeds = SeedLexicon(list(value_names), seed_sets)

    blocks: list[np.ndarray] = []
    if separation > 0.0:
        region = np.arange(reserved, V)
        if len(region) < hp.K:
            raise GeneratorError(
                f"vocabulary too small for {hp.K} disjoint aspect blocks"
            )
        blocks = list(np.array_split(region, hp.K))

    theta_b = _draw_multinomial(rng, np.full(V, hp.lambda_B))
    theta_i = _draw_multinomial(rng, np.full(V, hp.lambda_I)) if hp.use_ignore else None
    theta_v = None
    if hp.N >= 1:
        vp = value_prior(hp, V, [sorted(s) for s in seed_sets])
        theta_v = np.stack([_draw_multinomial(rng, vp[v]) for v in range(hp.N)])

    tag_alpha = np.full((n, len(SYNTHETIC_TAGS)), hp.lambda_tag)
    tag_alpha[layout.col("A"), SYNTHETIC_TAGS.index("NN")] += TAG_BIAS
    if layout.has_value:
        tag_alpha[layout.col("V"), SYNTHETIC_TAGS.index("JJ")] += TAG_BIAS
    eta = np.stack([_draw_multinomial(rng, tag_alpha[t]) for t in range(n)])

    if topic_mix is not None:
        mix = np.asarray(topic_mix, dtype=float)
        if mix.shape != (n,) or mix.min() < 0 or mix.sum() <= 0:
            raise GeneratorError(
                f"topic_mix needs {n} non-negative weights with positive sum"
            )
        mix = mix / mix.sum()
        p_end = min(1.0 / shape.mean_words, 0.5)
        trans_start = mix.copy()
        trans_main = np.tile(
            np.concatenate([mix * (1.0 - p_end), [p_end]]), (n, 1)
        )
    else:
        start_prior, main_prior = transition_priors(hp, layout)
        trans_start = _draw_multinomial(rng, start_prior)
        trans_main = np.stack(
            [_draw_multinomial(rng, main_prior[t]) for t in range(n)]
        )

    def draw_aspect_rows() -> np.ndarray:
        rows = []
        for a in range(hp.K):
            alpha = np.full(V, hp.lambda_A * (1.0 - separation))
            if blocks:
                alpha[blocks[a]] = hp.lambda_A
            rows.append(_draw_multinomial(rng, alpha))
        return np.stack(rows)

    n_scopes = 1 if hp.shared_aspects else shape.n_entities
    theta_a = [draw_aspect_rows() for _ in range(n_scopes)]
    phi = None
    if hp.N >= 1:
        phi = [
            np.stack(
                [_draw_multinomial(rng, np.full(hp.N, hp.lambda_AV)) for _ in range(hp.K)]
            )
            for _ in range(n_scopes)
        ]
    n_psi = 1 if hp.shared_aspect_multinomial else shape.n_entities
    psi = [_draw_multinomial(rng, np.full(hp.K, hp.lambda_M)) for _ in range(n_psi)]

    emit_dists = {"B": theta_b}
    if theta_i is not None:
        emit_dists["I"] = theta_i

    vocabulary = Indexer(words)
    tag_set = Indexer(SYNTHETIC_TAGS)
    entities = [f"e{i:03d}" for i in range(shape.n_entities)]
    groups: list[list[Snippet]] = []
    gold = GoldAnnotations()

    for i in range(shape.n_entities):
        scope = 0 if hp.shared_aspects else i
        pscope = 0 if hp.shared_aspect_multinomial else i
        group: list[Snippet] = []
        for j in range(shape.snippets_per_entity):
            sid = f"{entities[i]}-s{j:05d}"
            z_a = _choice(rng, psi[pscope])
            z_v = _choice(rng, phi[scope][z_a]) if hp.N >= 1 else None

            if shape.length_mode == "poisson":
                length = int(rng.poisson(shape.mean_words))
                while not (1 <= length <= 30):
                    length = int(rng.poisson(shape.mean_words))
            else:
                length = MAX_CHAIN_LENGTH

            roles: list[int] = []
            state = -1  # start
            for _ in range(length):
                if state < 0:
                    nxt = _choice(rng, trans_start)
                else:
                    if shape.length_mode == "poisson":
                        nxt = _choice(rng, trans_main[state, :n])
                    else:
                        nxt = _choice(rng, trans_main[state])
                        if nxt == layout.end_col:
                            break
                roles.append(nxt)
                state = nxt

            tokens: list[Token] = []
            letters: list[str] = []
            for role in roles:
                letter = layout.letters[role]
                if letter == "A":
                    dist = theta_a[scope][z_a]
                elif letter == "V":
                    dist = theta_v[z_v]
                else:
                    dist = emit_dists[letter]
                word = _choice(rng, dist)
                tag = _choice(rng, eta[role])
                tokens.append(Token(word, tag))
                letters.append(letter)

            group.append(Snippet(i, sid, tokens))
            gold.clusters[sid] = f"a{z_a}"
            if z_v is not None:
                gold.polarity[sid] = z_v
            gold.word_labels[sid] = letters
        groups.append(group)

    corpus = Corpus(entities, groups, vocabulary, tag_set)
    true_parameters = {
        "topic_letters": list(layout.letters),
        "value_names": list(value_names),
        "vocab": words,
        "separation": separation,
        "topic_mix": None if topic_mix is None else list(map(float, topic_mix)),
        "theta_B": theta_b.tolist(),
        "theta_I": None if theta_i is None else theta_i.tolist(),
        "theta_V": None if theta_v is None else theta_v.tolist(),
        "eta": eta.tolist(),
        "tags": list(SYNTHETIC_TAGS),
        "transition_start": trans_start.tolist(),
        "transition_main": trans_main.tolist(),
        "psi": [p.tolist() for p in psi],
        "theta_A": [t.tolist() for t in theta_a],
        "phi": None if phi is None else [p.tolist() for p in phi],
        "aspect_blocks": [b.tolist() for b in blocks],
    }
    log.info(
        "sampled corpus: %d entities, %d snippets, %d tokens",
        corpus.n_entities, corpus.n_snippets, corpus.n_tokens,
    )
    return SyntheticCorpus(corpus, gold, true_parameters, seeds)


def aspect_vocabularies_disjoint(syn: SyntheticCorpus) -> bool:
    """Whether words observed under different gold aspects never overlap."""
    seen: dict[str, set[int]] = {}
    for group in syn.corpus.snippets:
        for sn in group:
            cluster = syn.gold.clusters[sn.snippet_id]
            labels = syn.gold.word_labels[sn.snippet_id]
            for tok, letter in zip(sn.tokens, labels):
                if letter == "A":
                    seen.setdefault(cluster, set()).add(tok.word)
    clusters = list(seen)
    for x in range(len(clusters)):
        for y in range(x + 1, len(clusters)):
            if seen[clusters[x]] & seen[clusters[y]]:
                return False
    return True
