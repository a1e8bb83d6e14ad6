"""Build a model whose true triples are exactly those of a small graph.

    python3 demos/capture_small_graph.py
"""
from expressive_kge.evaluation import evaluate
from expressive_kge.expressiveness import build_capturing_model, verify_truth_table
from expressive_kge.kg import parse_triples
from expressive_kge.model import is_true

TRAIN = [
    "alice\tknows\tbob",
    "bob\tknows\tcarol",
    "carol\tknows\tcarol",
    "bob\tworks_with\talice",
]
TEST = ["alice\tknows\tcarol"]


def main():
    kg = parse_triples(TRAIN, [], TEST)
    model = build_capturing_model(kg)
    report = verify_truth_table(model, kg)
    print(f"{kg.n_entities} entities, {kg.n_relations} relations -> dimension {model.dim}")
    print(f"exact: {report.exact} over {report.n_triples} possible triples")

    # the self-loop knows(alice, alice) is absent and gets its own dimension
    e, r = kg.entity_index, kg.relation_index
    for h, rel, t in [("alice", "knows", "alice"), ("carol", "knows", "carol"), ("carol", "knows", "bob")]:
        print(f"  {rel}({h},{t}) true: {bool(is_true(model, [e[h], r[rel], e[t]]))}")

    ranks = evaluate(model, kg)
    print(f"filtered test MRR {ranks.mrr:.3f}")


if __name__ == "__main__":
    main()
