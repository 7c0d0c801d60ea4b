# coding: utf-8

# # Comparing two groups
#
# Fit one graph per group and split the edges into those found only in the
# first group, only in the second, and in both.  Here the two "groups" are
# Model I and Model III samples, which share no true edges.

from fsgm.graph import compare_graphs, fit
from fsgm.simgen import ModelSpec, gen_model

first, truth_a = gen_model(ModelSpec("I", n=100, seed=5))
second, truth_b = gen_model(ModelSpec("III", n=100, seed=6))

graph_a = fit(first)
graph_b = fit(second)

for name, edges in compare_graphs(graph_a, graph_b).items():
    print(f"{name:>12}: {edges}")

print("truth, first group: ", truth_a.sorted_edges())
print("truth, second group:", truth_b.sorted_edges())


# The same thing from the shell:
#
#     fsgm simulate --model I --n 100 --seed 5 --out a
#     fsgm simulate --model III --n 100 --seed 6 --out b
#     fsgm fit a/data.csv --out a
#     fsgm fit b/data.csv --out b
#     fsgm compare a/graph.json b/graph.json --out diff
