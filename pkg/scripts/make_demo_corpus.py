"""Regenerate the bundled demo corpus (src/pairforge/data/demo).

A small synthetic interaction dataset with enough structure for the full
pipeline to produce non-trivial rulesets and scorers: proteins fall into
four latent communities; interactions are mostly intra-community;
embeddings, compartments, and domain families all carry community signal.

Run from the repository root:

    python3 scripts/make_demo_corpus.py
"""

import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from pairforge.core import AMINO_ACIDS  # noqa: E402
from pairforge.ingest import COMPARTMENTS  # noqa: E402

OUT = ROOT / "src" / "pairforge" / "data" / "demo"

N_PROTEINS = 100
N_CLUSTERS = 4
EMBEDDING_DIM = 16
TARGET_POSITIVES = 220

CLUSTER_COMPARTMENTS = {
    0: ("nucleus", "cytoplasm"),
    1: ("mitochondrion", "cytoplasm"),
    2: ("er", "membrane"),
    3: ("extracellular", "endosome"),
}

# residue pools that skew each community's composition, so sequence
# descriptors carry a little community signal too
CLUSTER_RESIDUE_BIAS = {0: "KRDE", 1: "LIVF", 2: "STNQ", 3: "GAPC"}


def make_sequences(rng, clusters):
    sequences = []
    for cluster in clusters:
        length = int(rng.integers(40, 81))
        biased = CLUSTER_RESIDUE_BIAS[cluster]
        residues = []
        for _ in range(length):
            if rng.uniform() < 0.3:
                residues.append(biased[rng.integers(len(biased))])
            else:
                residues.append(AMINO_ACIDS[rng.integers(len(AMINO_ACIDS))])
        sequences.append("".join(residues))
    return sequences


def make_embeddings(rng, clusters):
    centers = rng.normal(scale=2.0, size=(N_CLUSTERS, EMBEDDING_DIM))
    return np.array([centers[c] + rng.normal(scale=0.6, size=EMBEDDING_DIM)
                     for c in clusters])


def make_positives(rng, ids, clusters):
    by_cluster = {c: [i for i, ci in enumerate(clusters) if ci == c]
                  for c in range(N_CLUSTERS)}
    pairs = set()
    # intra-community edges form the bulk of the interactome
    while len(pairs) < int(TARGET_POSITIVES * 0.85):
        cluster = int(rng.integers(N_CLUSTERS))
        members = by_cluster[cluster]
        i, j = rng.choice(members, size=2, replace=False)
        pairs.add((min(ids[i], ids[j]), max(ids[i], ids[j])))
    # a few promiscuous hubs bridge communities
    hubs = rng.choice(N_PROTEINS, size=4, replace=False)
    while len(pairs) < TARGET_POSITIVES:
        hub = int(hubs[rng.integers(len(hubs))])
        other = int(rng.integers(N_PROTEINS))
        if hub == other:
            continue
        pairs.add((min(ids[hub], ids[other]), max(ids[hub], ids[other])))
    return sorted(pairs)


def make_annotations(rng, ids, clusters):
    rows = []
    families = {c: [f"PF{c}{k:02d}" for k in range(3)]
                for c in range(N_CLUSTERS)}
    protein_families = {}
    for i, pid in enumerate(ids):
        cluster = clusters[i]
        # ~70% annotated with 1-2 community compartments
        if rng.uniform() < 0.7:
            terms = CLUSTER_COMPARTMENTS[cluster]
            count = 1 + int(rng.uniform() < 0.4)
            for term in rng.choice(terms, size=count, replace=False):
                assert term in COMPARTMENTS
                rows.append((pid, "compartment", term))
        # ~65% carry 1-2 domain families from the community pool
        mine = []
        if rng.uniform() < 0.65:
            count = 1 + int(rng.uniform() < 0.35)
            mine = list(rng.choice(families[cluster], size=count,
                                   replace=False))
            for fam in mine:
                rows.append((pid, "pfam", fam))
        protein_families[pid] = mine
        if rng.uniform() < 0.5:
            rows.append((pid, "reactome", f"R-DEMO-{clusters[i]}"))
        if rng.uniform() < 0.3:
            rows.append((pid, "go_bp", f"GO:00{clusters[i]:02d}00"))
    # domain-domain interaction priors: within-community family pairs
    for c in range(N_CLUSTERS):
        fams = families[c]
        rows.append(("-", "ddi", f"{fams[0]}|{fams[1]}"))
        rows.append(("-", "ddi", f"{fams[0]}|{fams[0]}"))
    return rows


def main():
    rng = np.random.default_rng(823)
    ids = [f"D{i:03d}" for i in range(1, N_PROTEINS + 1)]
    clusters = [i % N_CLUSTERS for i in range(N_PROTEINS)]
    sequences = make_sequences(rng, clusters)
    embeddings = make_embeddings(rng, clusters)
    positives = make_positives(rng, ids, clusters)
    annotations = make_annotations(rng, ids, clusters)

    OUT.mkdir(parents=True, exist_ok=True)

    fasta = []
    for pid, seq in zip(ids, sequences):
        fasta.append(f">{pid} role=host")
        for start in range(0, len(seq), 60):
            fasta.append(seq[start:start + 60])
    (OUT / "proteins.fasta").write_text("\n".join(fasta) + "\n")

    pair_rows = [f"{a}\t{b}\t1\tdemo" for a, b in positives]
    (OUT / "pairs.tsv").write_text("\n".join(pair_rows) + "\n")

    emb_rows = [pid + "\t" + "\t".join(repr(round(float(v), 6))
                                       for v in vec)
                for pid, vec in zip(ids, embeddings)]
    (OUT / "embeddings.tsv").write_text("\n".join(emb_rows) + "\n")

    ann_rows = [f"{pid}\t{ns}\t{term}" for pid, ns, term in annotations]
    (OUT / "annotations.tsv").write_text("\n".join(ann_rows) + "\n")

    print(f"wrote demo corpus: {N_PROTEINS} proteins, "
          f"{len(positives)} positive pairs, {len(ann_rows)} annotation rows"
          f" -> {OUT}")


if __name__ == "__main__":
    main()
