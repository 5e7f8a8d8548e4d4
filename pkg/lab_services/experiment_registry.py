"""
实验注册模块
用于注册和执行命令行可调用的实验
"""

import logging
from functools import wraps
from typing import Any, Callable, Dict, List

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from nls_services.solver import IntegrationError

logger = logging.getLogger(__name__)


class ExperimentOutcome(BaseModel):
    """实验结果：摘要数值、CSV 表格和快照"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str = Field(description="子命令名称")
    ok: bool = Field(description="所有断言的不变量是否成立")
    summary: Dict[str, Any] = Field(default_factory=dict, description="摘要数值（有序）")
    tables: Dict[str, pd.DataFrame] = Field(default_factory=dict, description="文件名 -> 表格")
    snapshots: Dict[str, Any] = Field(default_factory=dict, description="文件名 -> (场, t)")
    messages: List[str] = Field(default_factory=list, description="不变量违反说明")


class ExperimentRegistry:
    """实验注册器，负责注册和执行实验"""

    def __init__(self):
        self.experiments: Dict[str, Dict[str, Any]] = {}

    def register_experiment(self, name: str, description: str):
        """
        注册实验的装饰器

        Args:
            name: 子命令名称
            description: 实验描述（同时作为命令行帮助）
        """
        def decorator(func: Callable):
            @wraps(func)
            def wrapper(*args, **kwargs):
                return func(*args, **kwargs)

            self.experiments[name] = {
                'function': wrapper,
                'description': description,
                'name': name
            }
            logger.debug(f"实验已注册: {name} - {description}")
            return wrapper
        return decorator

    def names(self) -> List[str]:
        return list(self.experiments)

    def description(self, name: str) -> str:
        return self.experiments[name]['description']

    def execute_experiment(self, name: str, config) -> Dict[str, Any]:
        """
        执行指定的实验

        Args:
            name: 子命令名称
            config: ExperimentConfig

        Returns:
            {'success', 'error', 'error_kind', 'result'}；error_kind 为
            'usage'（配置/前置条件错误）、'integration'（积分失败）或 'internal'
        """
        if name not in self.experiments:
            return {
                'success': False,
                'error': f'unknown experiment: {name}',
                'error_kind': 'usage',
                'result': None
            }

        experiment = self.experiments[name]
        try:
            logger.info(f"执行实验: {name}")
            result = experiment['function'](config)
            logger.info(f"实验执行完成: {name}, 不变量成立: {result.ok}")
            return {
                'success': True,
                'error': None,
                'error_kind': None,
                'result': result
            }
        except IntegrationError as e:
            logger.error(f"实验积分失败: {name}, 错误: {str(e)}")
            return {'success': False, 'error': str(e), 'error_kind': 'integration', 'result': None}
        except (ValueError, ValidationError) as e:
            logger.error(f"实验参数错误: {name}, 错误: {str(e)}")
            return {'success': False, 'error': str(e), 'error_kind': 'usage', 'result': None}
        except Exception as e:
            logger.error(f"实验执行失败: {name}, 错误: {str(e)}")
            return {'success': False, 'error': str(e), 'error_kind': 'internal', 'result': None}


# 创建全局实验注册器实例
experiment_registry = ExperimentRegistry()
