# -*- coding: utf-8 -*-
"""
场构造模块
根据配置中的字段描述（zero / gaussian / random / plane / file）构造 ComplexField
随机场使用跨语言可复现的 64 位线性同余发生器
"""

import logging
from typing import Optional

import numpy as np

from .spectral_core import ComplexField, Grid, l2_norm

logger = logging.getLogger(__name__)

LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1


class LcgGenerator:
    """64 位线性同余发生器，输出取高 53 位的 [0, 1) 双精度数"""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_double(self) -> float:
        self.state = (LCG_MULTIPLIER * self.state + LCG_INCREMENT) & _MASK64
        return (self.state >> 11) * (1.0 / (1 << 53))

    def uniform(self, count: int) -> np.ndarray:
        return np.array([self.next_double() for _ in range(count)])


def gaussian_field(grid: Grid, amp: float, center: float, width: float) -> ComplexField:
    """amp·exp(-(x - center)²/(2·width²))"""
    if width <= 0:
        raise ValueError(f"gaussian width must be positive, got {width}")
    x = grid.x
    return ComplexField(grid=grid, values=amp * np.exp(-((x - center) ** 2) / (2.0 * width ** 2)))


def modulated_field(g: ComplexField, mode_index: int) -> ComplexField:
    """e^{i k_n x}·g(x)，k_n = 2πn/L"""
    k = 2.0 * np.pi * mode_index / g.grid.length
    return g.with_values(np.exp(1j * k * g.grid.x) * g.values)


def random_field(grid: Grid, amp: float, seed: int, cutoff: Optional[int] = None) -> ComplexField:
    """
    LCG 随机场：|m| ≤ cutoff 的模系数实部、虚部取 2·draw - 1（按 m 升序），
    乘以宽度 L/16 的高斯包络后归一化到 L² 范数 amp
    """
    if cutoff is None:
        cutoff = grid.n_points // 16
    if not 0 <= cutoff < grid.n_points // 2:
        raise ValueError(f"random field cutoff {cutoff} not resolvable on {grid.n_points} points")
    generator = LcgGenerator(seed)
    coefficients = np.zeros(grid.n_points, dtype=np.complex128)
    for m in range(-cutoff, cutoff + 1):
        re = 2.0 * generator.next_double() - 1.0
        im = 2.0 * generator.next_double() - 1.0
        coefficients[m % grid.n_points] = re + 1j * im
    polynomial = np.fft.ifft(coefficients) * grid.n_points
    envelope = np.exp(-grid.x ** 2 / (2.0 * (grid.length / 16.0) ** 2))
    field = ComplexField(grid=grid, values=polynomial * envelope)
    norm = l2_norm(field)
    if norm == 0.0:
        return field
    return field.with_values(field.values * (amp / norm))


def _parse_numbers(body: str, spec: str, expected: tuple) -> list:
    parts = [part.strip() for part in body.split(",") if part.strip()]
    if len(parts) not in expected:
        raise ValueError(f"field spec '{spec}' expects {' or '.join(map(str, expected))} numbers")
    try:
        return [float(part) for part in parts]
    except ValueError:
        raise ValueError(f"field spec '{spec}' contains a non-numeric value")


def build_field(spec: str, grid: Grid, seed: int = 0) -> ComplexField:
    """
    按描述构造场

    Args:
        spec: "zero" | "gaussian:amp,center,width" | "random:amp[,cutoff]" |
              "plane:amp,mode" | "file:<snapshot path>"
        grid: 目标网格
        seed: random 场使用的 LCG 种子

    Returns:
        ComplexField
    """
    spec = spec.strip()
    kind, _, body = spec.partition(":")
    kind = kind.strip().lower()

    if kind == "zero" and not body:
        return ComplexField.zeros(grid)
    if kind == "gaussian":
        amp, center, width = _parse_numbers(body, spec, (3,))
        return gaussian_field(grid, amp, center, width)
    if kind == "random":
        numbers = _parse_numbers(body, spec, (1, 2))
        cutoff = int(numbers[1]) if len(numbers) == 2 else None
        return random_field(grid, numbers[0], seed, cutoff)
    if kind == "plane":
        amp, mode = _parse_numbers(body, spec, (2,))
        k = 2.0 * np.pi * int(mode) / grid.length
        return ComplexField(grid=grid, values=amp * np.exp(1j * k * grid.x))
    if kind == "file":
        from .snapshot_storage import read_snapshot

        field, t = read_snapshot(body.strip())
        if field.grid != grid:
            raise ValueError(
                f"snapshot {body.strip()} has grid ({field.grid.n_points}, {field.grid.length}), "
                f"expected ({grid.n_points}, {grid.length})"
            )
        logger.info(f"从快照 {body.strip()} 读取场 (t={t})")
        return field
    raise ValueError(f"unknown field spec '{spec}'")
