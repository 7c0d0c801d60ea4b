# coding: utf-8

# # Estimating a functional graph
#
# Five random functions per subject, recorded at ten time points.  Node 2
# depends on node 1, node 4 on node 2 and node 5 on node 3, so the true
# undirected graph has edges 1-2, 2-4 and 3-5.

import numpy as np

from fsgm.graph import fit, graph_auc
from fsgm.simgen import ModelSpec, gen_model

dataset, truth = gen_model(ModelSpec("I", n=100, grid_mode="balanced", seed=1))
print(dataset.n, "subjects,", dataset.p, "nodes")
print("true edges:", truth.sorted_edges())


# ## Fit with every tuning parameter chosen by GCV

graph = fit(dataset)
for key in ("eta", "epsilon", "delta", "rho"):
    print(f"{key:>8} = {graph.tuning[key]:g}")


# Each unordered pair gets a score: the HS norm of the estimated conditional
# covariance operator given that pair's sufficient predictors.  Pairs above
# the threshold rho are edges.

for pair, score in sorted(graph.score_map().items(), key=lambda kv: -kv[1]):
    mark = "*" if pair in truth.edges else " "
    print(f"{mark} {pair}: {score:.4f}")

print("estimated edges:", sorted(graph.edges))


# ## Ranking quality
#
# The ROC curve sweeps the threshold over all scores, so the AUC does not
# depend on the chosen rho.

print("AUC:", round(graph_auc(graph, truth.edges), 3))


# ## Irregular sampling
#
# With unbalanced grids every subject has its own ten time points.  Nothing
# else changes.

dataset_u, truth_u = gen_model(ModelSpec("I", n=100, grid_mode="unbalanced", seed=1))
print("distinct time points:", np.unique(np.concatenate(dataset_u.times)).size)
print("AUC:", round(graph_auc(fit(dataset_u), truth_u.edges), 3))
