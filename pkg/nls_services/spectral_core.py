# -*- coding: utf-8 -*-
"""
谱方法核心模块
周期网格、离散傅里叶变换、傅里叶乘子算子（半阶导数、自由薛定谔群）以及 L² 内积与范数

约定：
- 正变换带 1/n 因子，因此 û₀ 等于 u 的均值
- 波数按标准 FFT 排列 (0..n/2-1, -n/2..-1)，Nyquist 模取 k = -π·n/L
- x 方向积分使用步长 dx 的矩形公式
"""

import logging
from functools import lru_cache
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

logger = logging.getLogger(__name__)


class IncompatibleGridError(ValueError):
    """两个场不在同一网格上"""

    def __init__(self, message: str = "incompatible grids"):
        super().__init__(message)


@lru_cache(maxsize=64)
def _wavenumbers(n_points: int, length: float) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.fftfreq(n_points, d=length / n_points)
    k.setflags(write=False)
    return k


class Grid(BaseModel):
    """周期网格定义"""
    model_config = ConfigDict(frozen=True)

    n_points: int = Field(description="网格点数（2 的幂，至少 8）")
    length: float = Field(description="周期区间长度 L")

    @field_validator("n_points")
    @classmethod
    def _check_n_points(cls, value: int) -> int:
        if value < 8 or value & (value - 1):
            raise ValueError(f"n_points must be a power of two >= 8, got {value}")
        return value

    @field_validator("length")
    @classmethod
    def _check_length(cls, value: float) -> float:
        if not np.isfinite(value) or value <= 0:
            raise ValueError(f"length must be positive, got {value}")
        return float(value)

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def wavenumbers(self) -> np.ndarray:
        """k_m = 2π·m/L，FFT 排列"""
        return _wavenumbers(self.n_points, self.length)

    @property
    def x(self) -> np.ndarray:
        """网格坐标 x_j = -L/2 + j·dx"""
        return -0.5 * self.length + self.dx * np.arange(self.n_points)

    def mode_indices(self) -> np.ndarray:
        return np.fft.fftfreq(self.n_points, d=1.0 / self.n_points).astype(np.int64)


class ComplexField(BaseModel):
    """网格上的一个复值场 u(·, t)，也用来存放谱系数"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _coerce_values(cls, value) -> np.ndarray:
        values = np.asarray(value, dtype=np.complex128)
        if values.ndim != 1:
            raise ValueError(f"values must be one-dimensional, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains NaN or Inf")
        return values

    @model_validator(mode="after")
    def _check_length(self) -> "ComplexField":
        if self.values.shape[0] != self.grid.n_points:
            raise ValueError(
                f"values must have {self.grid.n_points} entries, got {self.values.shape[0]}"
            )
        return self

    def with_values(self, values: np.ndarray) -> "ComplexField":
        return ComplexField(grid=self.grid, values=values)

    @classmethod
    def zeros(cls, grid: Grid) -> "ComplexField":
        return cls(grid=grid, values=np.zeros(grid.n_points, dtype=np.complex128))


class TrajectoryRegime(BaseModel):
    """产生轨迹时的物理参数，供特定情形的检验使用"""
    model_config = ConfigDict(frozen=True)

    gamma: float = Field(description="阻尼参数 γ")
    forcing_norm: float = Field(description="外力 ‖f‖₂")


class SpaceTimeField(BaseModel):
    """时间上等间隔采样的场序列"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    dt_sample: float = Field(gt=0, description="采样间隔")
    frames: List[ComplexField]
    t0: float = 0.0
    regime: Optional[TrajectoryRegime] = None

    @model_validator(mode="after")
    def _check_frames(self) -> "SpaceTimeField":
        if not self.frames:
            raise ValueError("frames must be non-empty")
        for frame in self.frames:
            if frame.grid != self.grid:
                raise IncompatibleGridError()
        return self

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt_sample * np.arange(len(self.frames))

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    def as_array(self) -> np.ndarray:
        """形状 (帧数, n_points) 的复数组"""
        return np.stack([frame.values for frame in self.frames])

    @classmethod
    def from_array(cls, grid: Grid, dt_sample: float, data: np.ndarray, t0: float = 0.0,
                   regime: Optional[TrajectoryRegime] = None) -> "SpaceTimeField":
        frames = [ComplexField(grid=grid, values=row) for row in np.asarray(data)]
        return cls(grid=grid, dt_sample=dt_sample, frames=frames, t0=t0, regime=regime)


def _require_same_grid(u: ComplexField, v: ComplexField) -> None:
    if u.grid != v.grid:
        raise IncompatibleGridError()


def forward_dft(field: ComplexField) -> ComplexField:
    """正变换，带 1/n 因子"""
    return field.with_values(np.fft.fft(field.values) / field.grid.n_points)


def inverse_dft(coeffs: ComplexField) -> ComplexField:
    return coeffs.with_values(np.fft.ifft(coeffs.values) * coeffs.grid.n_points)


def apply_multiplier(u: ComplexField, symbol: np.ndarray) -> ComplexField:
    """在谱空间乘以符号 symbol(k)"""
    return u.with_values(np.fft.ifft(np.fft.fft(u.values) * symbol))


def half_derivative_symbol(grid: Grid) -> np.ndarray:
    return np.sqrt(np.abs(grid.wavenumbers))


def half_derivative(u: ComplexField) -> ComplexField:
    """D_x^{1/2}，符号 |k|^{1/2}；零模被消去"""
    return apply_multiplier(u, half_derivative_symbol(u.grid))


def abs_derivative(u: ComplexField) -> ComplexField:
    """D_x = √(-Δ)，符号 |k|"""
    return apply_multiplier(u, np.abs(u.grid.wavenumbers))


def free_propagator_symbol(grid: Grid, t: float) -> np.ndarray:
    # u_t = -i u_xx 且 ∂_xx ↦ -k²，故 û_k(t) = e^{+i k² t} û_k(0)
    k = grid.wavenumbers
    return np.exp(1j * k * k * t)


def free_propagator(u0: ComplexField, t: float) -> ComplexField:
    """线性薛定谔群 U(t)，u_t + i u_xx = 0 的解算子"""
    return apply_multiplier(u0, free_propagator_symbol(u0.grid, t))


def inner_product(u: ComplexField, v: ComplexField) -> complex:
    """(u, v) = Σ u(x_j)·conj(v(x_j))·dx"""
    _require_same_grid(u, v)
    return complex(np.vdot(v.values, u.values) * u.grid.dx)


def l2_norm(u: ComplexField) -> float:
    return float(np.sqrt(np.sum(np.abs(u.values) ** 2) * u.grid.dx))


def spectral_l2_norm(u: ComplexField) -> float:
    """Parseval：‖u‖₂ = sqrt(L·Σ|û_m|²)"""
    coeffs = np.fft.fft(u.values) / u.grid.n_points
    return float(np.sqrt(u.grid.length * np.sum(np.abs(coeffs) ** 2)))


def spectral_tail_ratio(u: ComplexField) -> float:
    """|m| > n/3 的谱尾最大模与谱峰值之比，用于混叠监控"""
    magnitude = np.abs(np.fft.fft(u.values))
    peak = magnitude.max()
    if peak == 0.0:
        return 0.0
    modes = np.abs(u.grid.mode_indices())
    tail = magnitude[modes > u.grid.n_points // 3]
    return float(tail.max() / peak) if tail.size else 0.0


def dealias_mask(grid: Grid) -> np.ndarray:
    """2/3 规则掩码"""
    modes = np.abs(grid.mode_indices())
    return (modes <= grid.n_points // 3).astype(np.float64)
