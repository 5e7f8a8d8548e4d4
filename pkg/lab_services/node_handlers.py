"""
节点处理器模块
包含实验流程中的各种节点实现
"""

import logging
import os
from datetime import datetime

from nls_services.snapshot_storage import emit_csv, format_number, summary_rows, write_snapshot

from .experiment_graph import ExperimentState
from .experiment_registry import experiment_registry
from . import experiments  # noqa: F401  注册全部实验

logger = logging.getLogger(__name__)


def run_experiment_node(state: ExperimentState) -> ExperimentState:
    """
    实验执行节点
    通过注册器执行子命令对应的实验
    """
    start_time = datetime.now()
    config = state["config"]
    logger.info(f"[{start_time}] 开始实验节点处理: {config.subcommand}")

    result = experiment_registry.execute_experiment(config.subcommand, config)

    duration = (datetime.now() - start_time).total_seconds()
    if not result["success"]:
        logger.error(f"实验失败: {config.subcommand}, 耗时: {duration:.2f}秒")
        return {
            **state,
            "error": result["error"],
            "error_kind": result["error_kind"],
            "current_step": "experiment_failed",
        }

    logger.info(f"实验完成: {config.subcommand}, 耗时: {duration:.2f}秒")
    return {
        **state,
        "outcome": result["result"],
        "current_step": "experiment_completed",
    }


def emit_outputs_node(state: ExperimentState) -> ExperimentState:
    """
    结果写出节点
    依次写出 CSV 表格、摘要 CSV 和快照文件
    """
    outcome = state["outcome"]
    output_dir = state["output_dir"]
    written = []
    try:
        os.makedirs(output_dir, exist_ok=True)
        for filename, table in outcome.tables.items():
            path = os.path.join(output_dir, filename)
            emit_csv(table, path)
            written.append(path)

        path = os.path.join(output_dir, f"{outcome.name}_summary.csv")
        emit_csv(summary_rows(outcome.summary), path, columns=["key", "value"])
        written.append(path)

        for filename, (field, t) in outcome.snapshots.items():
            path = os.path.join(output_dir, filename)
            write_snapshot(field, t, path)
            written.append(path)
    except OSError as e:
        logger.error(f"结果写出失败: {output_dir}, 错误: {str(e)}")
        return {
            **state,
            "written_files": written,
            "error": f"cannot write output: {e}",
            "error_kind": "io",
            "current_step": "emit_failed",
        }

    logger.info(f"结果已写出: {len(written)} 个文件 -> {output_dir}")
    return {
        **state,
        "written_files": written,
        "current_step": "outputs_written",
    }


def summarize_node(state: ExperimentState) -> ExperimentState:
    """
    摘要节点
    生成一行摘要；数值格式与摘要 CSV 一致
    """
    config = state["config"]
    outcome = state.get("outcome")
    if state.get("error"):
        line = f"{config.subcommand}: error: {state['error']}"
    else:
        status = "ok" if outcome.ok else "VIOLATION"
        fields = ", ".join(f"{key}={format_number(value)}" for key, value in outcome.summary.items())
        line = f"{config.subcommand}: {status}: {fields}"
        for message in outcome.messages:
            logger.warning(f"不变量违反: {message}")

    return {
        **state,
        "summary_line": line,
        "current_step": "completed",
    }
