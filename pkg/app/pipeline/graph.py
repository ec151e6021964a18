"""
Graph construction for the experiment pipeline.

One run of the workbench is a LangGraph state machine:
1. start_run writes config and manifest (or reuses a finished run)
2. generate_data and poison_data build D, U and the triggered test set
3. prepare_model builds or loads the classifier; train_model trains it
4. evaluate_model records BA and ASR
5. requested analysis stages run in order: distances, detection,
   trigger synthesis, pruning
6. finalize_run marks the manifest complete
"""

from langgraph.graph import END, StateGraph

from app.pipeline.nodes import (
    evaluate_model,
    finalize_run,
    generate_data,
    measure_distances,
    poison_data,
    prepare_model,
    prune_neurons,
    run_detection,
    start_run,
    synthesize_triggers,
    train_model,
)
from app.pipeline.router import (
    route_after_defend,
    route_after_distances,
    route_after_evaluate,
    route_after_model,
    route_after_poison,
    route_after_start,
    route_after_synthesize,
)
from app.pipeline.state import PipelineState

ANALYSIS_TARGETS = {
    "measure_distances": "measure_distances",
    "run_detection": "run_detection",
    "synthesize_triggers": "synthesize_triggers",
    "prune_neurons": "prune_neurons",
    "finalize_run": "finalize_run",
}


def create_pipeline():
    """
    Create and compile the experiment graph.

    Returns:
        Compiled StateGraph; invoke it with a PipelineState holding config,
        run_dir and stages.

    Example:
        >>> pipeline = create_pipeline()
        >>> result = pipeline.invoke({"config": ExperimentConfig(), "run_dir": "runs/x", "stages": ["train", "eval"]})
    """
    graph = StateGraph(PipelineState)

    graph.add_node("start_run", start_run.start_run)
    graph.add_node("generate_data", generate_data.generate_data)
    graph.add_node("poison_data", poison_data.poison_data)
    graph.add_node("prepare_model", prepare_model.prepare_model)
    graph.add_node("train_model", train_model.train_model)
    graph.add_node("evaluate_model", evaluate_model.evaluate_model)
    graph.add_node("measure_distances", measure_distances.measure_distances)
    graph.add_node("run_detection", run_detection.run_detection)
    graph.add_node("synthesize_triggers", synthesize_triggers.synthesize_triggers)
    graph.add_node("prune_neurons", prune_neurons.prune_neurons)
    graph.add_node("finalize_run", finalize_run.finalize_run)

    graph.set_entry_point("start_run")

    graph.add_conditional_edges("start_run", route_after_start, {"RUN": "generate_data", "REUSED": END})
    graph.add_edge("generate_data", "poison_data")
    graph.add_conditional_edges(
        "poison_data",
        route_after_poison,
        {"prepare_model": "prepare_model", "finalize_run": "finalize_run"},
    )
    graph.add_conditional_edges(
        "prepare_model",
        route_after_model,
        {"train_model": "train_model", "evaluate_model": "evaluate_model"},
    )
    graph.add_edge("train_model", "evaluate_model")

    # Analysis stages, each skipping ahead to the next requested one
    graph.add_conditional_edges("evaluate_model", route_after_evaluate, ANALYSIS_TARGETS)
    graph.add_conditional_edges("measure_distances", route_after_distances, ANALYSIS_TARGETS)
    graph.add_conditional_edges("run_detection", route_after_defend, ANALYSIS_TARGETS)
    graph.add_conditional_edges("synthesize_triggers", route_after_synthesize, ANALYSIS_TARGETS)
    graph.add_edge("prune_neurons", "finalize_run")

    graph.add_edge("finalize_run", END)
    return graph.compile()
