"""
LangGraph状态定义和流程图
实验流程：运行实验 → 写出结果 → 生成摘要
"""
from typing import Any, Dict, List, Optional, TypedDict

from langgraph.graph import END, START, StateGraph
import logging

logger = logging.getLogger(__name__)


class ExperimentState(TypedDict):
    """实验流程状态定义"""
    config: Any  # ExperimentConfig
    output_dir: str
    outcome: Optional[Any]  # ExperimentOutcome
    written_files: List[str]
    summary_line: Optional[str]
    current_step: str
    error: Optional[str]
    error_kind: Optional[str]  # usage / integration / internal / io


def route_after_run(state: ExperimentState) -> str:
    """实验失败时跳过写出，直接生成摘要"""
    if state.get("error") or state.get("outcome") is None:
        logger.info(f"实验未产生结果 ({state.get('error_kind')})，跳过写出")
        return "finish"
    return "emit"


def create_experiment_graph():
    """
    创建实验流程图
    """
    from .node_handlers import emit_outputs_node, run_experiment_node, summarize_node

    workflow = StateGraph(ExperimentState)

    # 添加节点
    workflow.add_node("run_experiment", run_experiment_node)
    workflow.add_node("emit_outputs", emit_outputs_node)
    workflow.add_node("summarize", summarize_node)

    # 设置入口点
    workflow.add_edge(START, "run_experiment")

    workflow.add_conditional_edges(
        "run_experiment",
        route_after_run,
        {
            "emit": "emit_outputs",
            "finish": "summarize"
        }
    )
    workflow.add_edge("emit_outputs", "summarize")
    workflow.add_edge("summarize", END)

    return workflow.compile()


def initial_state(config, output_dir: str) -> ExperimentState:
    return {
        "config": config,
        "output_dir": output_dir,
        "outcome": None,
        "written_files": [],
        "summary_line": None,
        "current_step": "initial",
        "error": None,
        "error_kind": None,
    }


def run_experiment_pipeline(config, output_dir: Optional[str] = None) -> Dict[str, Any]:
    """
    运行完整的实验流程并返回最终状态

    Args:
        config: ExperimentConfig
        output_dir: 输出目录，缺省取 config.output_dir
    """
    graph = create_experiment_graph()
    state = initial_state(config, output_dir or config.output_dir)
    return graph.invoke(state)
