"""
Dense retrieval: exact top-k cosine search over stored embeddings
=================================================================

Load unit-normalized vectors into an embedding store and find nearest
neighbors by exact cosine similarity, with and without exclusions.
"""

import numpy as np

from prprank import EmbeddingStore, top_k_cosine

rng = np.random.default_rng(7)

# Three tight clusters in 8 dimensions, five vectors each.
centers = rng.normal(size=(3, 8))
pairs = []
for c, center in enumerate(centers):
    for j in range(5):
        vec = center + 0.05 * rng.normal(size=8)
        pairs.append((f"c{c}_{j}", vec))

# Vectors are normalized on ingestion, so dot product equals cosine.
store = EmbeddingStore.from_vectors(pairs)
print(f"stored {len(store)} vectors of dimension {store.dim}")

# Probe with a noisy copy of cluster 1's center: its members dominate.
probe = centers[1] + 0.05 * rng.normal(size=8)
print("\nnearest to a cluster-1 probe:")
for hit in top_k_cosine(store, probe, 5):
    print(f"  {hit.rank}. {hit.item_id}  cosine={hit.score:.4f}")

# Excluding ids is how a query avoids retrieving itself as a neighbor.
hits = top_k_cosine(store, store.vector("c1_0"), 3, exclude={"c1_0"})
print("\nneighbors of c1_0 excluding itself:", [h.item_id for h in hits])

# Exact ties order by id, so results never depend on internal layout.
tied = EmbeddingStore.from_vectors(
    [("b", [1.0, 0.0]), ("a", [1.0, 0.0]), ("z", [0.0, 1.0])]
)
print("\ntie ordering:", [h.item_id for h in top_k_cosine(tied, [1.0, 0.0], 2)])
