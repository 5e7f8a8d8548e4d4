# -*- coding: utf-8 -*-
"""
时空范数模块
离散的 Lᵖ_{T,x}、L^∞_x L²_T、局部 L²_T H^{1/2}(K) 范数，L² 配对，以及非线性项估计中的 Hölder/插值链
时间方向统一使用记录帧上的梯形公式
"""

import logging
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, Field

from .spectral_core import (
    ComplexField,
    SpaceTimeField,
    half_derivative_symbol,
    inner_product,
    l2_norm,
)

logger = logging.getLogger(__name__)

# 插值不等式 lhs ≤ rhs·(1 + HOLDER_SLACK)
HOLDER_SLACK = 1e-10


class NormReport(BaseModel):
    """范数计算结果"""
    name: str = Field(description="范数名称")
    value: float = Field(ge=0, description="范数值")
    n_points: int
    length: float
    dt_sample: float
    t_final: float


def time_weights(traj: SpaceTimeField) -> np.ndarray:
    """梯形权重，首末帧取一半"""
    weights = np.full(len(traj.frames), traj.dt_sample)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    if len(weights) == 1:
        weights[0] = 0.0
    return weights


def lp_space_time(traj: SpaceTimeField, p: float) -> float:
    """(Σ_t Σ_x |u|ᵖ dx·w_t)^{1/p}"""
    if not p >= 1:
        raise ValueError(f"not a norm: p={p}")
    modulus = np.abs(traj.as_array())
    total = float(np.sum(time_weights(traj) * np.sum(modulus ** p, axis=1)) * traj.grid.dx)
    return total ** (1.0 / p)


def mixed_linf_x_l2_t(traj: SpaceTimeField) -> float:
    """max_x sqrt(Σ_t w_t |u(x, t)|²)；网格上的 max 是连续上确界的下界"""
    modulus_sq = np.abs(traj.as_array()) ** 2
    return float(np.sqrt(np.max(time_weights(traj) @ modulus_sq)))


def half_derivative_frames(traj: SpaceTimeField) -> np.ndarray:
    """逐帧作用 D^{1/2}"""
    symbol = half_derivative_symbol(traj.grid)
    return np.fft.ifft(np.fft.fft(traj.as_array(), axis=1) * symbol, axis=1)


def apply_framewise_half_derivative(traj: SpaceTimeField) -> SpaceTimeField:
    return SpaceTimeField.from_array(
        traj.grid, traj.dt_sample, half_derivative_frames(traj), t0=traj.t0, regime=traj.regime
    )


def _interval_mask(traj: SpaceTimeField, k_interval: Tuple[float, float]) -> np.ndarray:
    left, right = k_interval
    if not left < right:
        raise ValueError(f"empty interval K=[{left}, {right}]")
    half = 0.5 * traj.grid.length
    if left < -half or right > half:
        raise ValueError(f"interval K=[{left}, {right}] leaves the box [{-half}, {half}]")
    x = traj.grid.x
    return (x >= left) & (x <= right)


def local_h_half_l2t(traj: SpaceTimeField, k_interval: Tuple[float, float]) -> float:
    """
    sqrt(∫₀^T ‖u(t)‖²_{L²(K)} + ‖D^{1/2}u(t)‖²_{L²(K)} dt)

    D^{1/2} 先在整个周期区间上用谱方法计算，再限制到 K
    """
    mask = _interval_mask(traj, k_interval)
    data = traj.as_array()
    smoothed = half_derivative_frames(traj)
    density = (np.abs(data) ** 2 + np.abs(smoothed) ** 2)[:, mask]
    total = float(np.sum(time_weights(traj) * np.sum(density, axis=1)) * traj.grid.dx)
    return float(np.sqrt(total))


def local_l4(traj: SpaceTimeField, k_interval: Tuple[float, float]) -> float:
    """‖u‖_{L⁴_T L⁴(K)}"""
    mask = _interval_mask(traj, k_interval)
    density = (np.abs(traj.as_array()) ** 4)[:, mask]
    total = float(np.sum(time_weights(traj) * np.sum(density, axis=1)) * traj.grid.dx)
    return total ** 0.25


def pairing(u: ComplexField, phi: ComplexField) -> complex:
    """弱拓扑探针 (u, φ)"""
    return inner_product(u, phi)


def holder_chain_check(traj: SpaceTimeField) -> Tuple[float, float, bool]:
    """
    ‖u³‖_{L^{6/5}} = ‖u‖³_{L^{18/5}} ≤ ‖u‖_{L²}‖u‖²_{L⁶}

    1/(18/5) = (1/3)/2 + (2/3)/6，因此插值常数为 1
    """
    lhs = lp_space_time(traj, 18.0 / 5.0) ** 3
    rhs = lp_space_time(traj, 2.0) * lp_space_time(traj, 6.0) ** 2
    ok = lhs <= rhs * (1.0 + HOLDER_SLACK)
    if not ok:
        logger.warning(f"Hölder 链不成立: lhs={lhs:.17g}, rhs={rhs:.17g}")
    return lhs, rhs, bool(ok)


def strichartz_ratio(traj: SpaceTimeField, u0: ComplexField) -> float:
    """‖u‖_{L⁶_{T,x}} / ‖u₀‖₂，自由群时即 Strichartz 估计的经验常数"""
    norm0 = l2_norm(u0)
    if norm0 == 0.0:
        return 0.0
    return lp_space_time(traj, 6.0) / norm0


def norm_report(traj: SpaceTimeField, name: str, value: float) -> NormReport:
    return NormReport(
        name=name,
        value=value,
        n_points=traj.grid.n_points,
        length=traj.grid.length,
        dt_sample=traj.dt_sample,
        t_final=traj.t_final,
    )


def norm_suite(traj: SpaceTimeField, k_interval: Tuple[float, float]) -> List[NormReport]:
    """`norms` 子命令输出的全部范数"""
    lhs, rhs, _ = holder_chain_check(traj)
    entries = [
        ("L2_Tx", lp_space_time(traj, 2.0)),
        ("L6_Tx", lp_space_time(traj, 6.0)),
        ("L18/5_Tx", lp_space_time(traj, 18.0 / 5.0)),
        ("Linf_x_L2_T", mixed_linf_x_l2_t(traj)),
        ("Linf_x_L2_T_half_derivative", mixed_linf_x_l2_t(apply_framewise_half_derivative(traj))),
        ("L2_T_H1/2(K)", local_h_half_l2t(traj, k_interval)),
        ("L4_T_L4(K)", local_l4(traj, k_interval)),
        ("holder_lhs", lhs),
        ("holder_rhs", rhs),
        ("strichartz_ratio", strichartz_ratio(traj, traj.frames[0])),
    ]
    return [norm_report(traj, name, value) for name, value in entries]
