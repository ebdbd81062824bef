"""Motif-guided backdoor attacks on graph classifiers, with baselines and a Jaccard defense."""

from .attack import (
    AttackError,
    BackdoorConfig,
    BlackBoxTarget,
    InjectionPlan,
    Trigger,
    build_shadow,
    candidate_nodes,
    degree_centrality,
    inject_trigger,
    poison_dataset,
    run_backdoor,
    select_injection_nodes,
    select_trigger,
    subscore,
)
from .baselines import AttackKind, er_b_trigger, place_maxdcc, place_random, run_attack, run_baseline
from .gnn import GnnModel, TrainConfig, accuracy, forward, init_model, load_model, save_model, train
from .graph import Dataset, Graph, Split, drop_node, erdos_renyi_graph, induced_subgraph, load_tu_dataset, split_dataset
from .metrics import MetricsRow, evaluate_attack, jaccard_defense, jaccard_similarity
from .motifs import MOTIFS, MotifId, classify_connected, count_motifs, dataset_distribution, motif_graph
from .synthetic import smoke_corpus

__version__ = "0.1.0"
