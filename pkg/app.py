"""
命令行入口
用法: python app.py <子命令> --config <配置文件> [--output <目录>]
"""
import logging
import os
import sys
from typing import List, Optional

import click

# 从环境变量获取日志级别，默认为INFO
log_level = os.getenv('LOG_LEVEL', 'INFO').upper()
numeric_level = getattr(logging, log_level, logging.INFO)

# 配置日志
logging.basicConfig(
    level=numeric_level,
    format='%(asctime)s %(levelname)s %(name)s %(threadName)s : %(message)s'
)

from lab_services.experiment_graph import run_experiment_pipeline  # noqa: E402
from lab_services.experiment_registry import experiment_registry  # noqa: E402
from lab_services import experiments  # noqa: E402,F401
from nls_services.experiment_config import SUBCOMMANDS, ConfigError, parse_config  # noqa: E402

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2

# 错误类型 -> 退出码
EXIT_CODES = {
    'usage': EXIT_USAGE,
    'io': EXIT_USAGE,
    'integration': EXIT_VIOLATION,
    'internal': EXIT_VIOLATION,
}


def run_subcommand(subcommand: str, config_path: str, output_dir: Optional[str]) -> int:
    """解析配置、运行实验流程、打印摘要并返回退出码"""
    try:
        config = parse_config(config_path, subcommand, output_dir)
    except ConfigError as e:
        logger.error(f"配置错误: {config_path}: {str(e)}")
        click.echo(f"Error: {e}", err=True)
        return EXIT_USAGE

    state = run_experiment_pipeline(config)
    if state.get("error"):
        click.echo(state["summary_line"], err=True)
        return EXIT_CODES.get(state.get("error_kind"), EXIT_VIOLATION)

    click.echo(state["summary_line"])
    return EXIT_OK if state["outcome"].ok else EXIT_VIOLATION


@click.group()
def cli():
    """阻尼受迫三次 NLS 方程的伪谱实验室"""


def _make_command(subcommand: str) -> click.Command:
    @click.option("--config", "config_path", required=True,
                  type=click.Path(exists=True, dir_okay=False), help="实验配置文件")
    @click.option("--output", "output_dir", default=None, envvar="NLSA_OUTPUT_DIR",
                  help="输出目录（覆盖配置中的 output_dir）")
    def command(config_path: str, output_dir: Optional[str]) -> int:
        return run_subcommand(subcommand, config_path, output_dir)

    return click.command(name=subcommand, help=experiment_registry.description(subcommand))(command)


for _name in SUBCOMMANDS:
    cli.add_command(_make_command(_name))


def main(argv: Optional[List[str]] = None) -> int:
    """
    命令行主函数

    Returns:
        0 成功且不变量全部成立；1 不变量违反或积分失败；2 用法/配置错误
    """
    try:
        result = cli.main(args=argv, prog_name="nlsa", standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        return EXIT_VIOLATION
    return result if isinstance(result, int) else EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
