"""Executor-dependent stage durations for the discrete-event simulation.

GPU-role stages (encode, prefill, dtw, leading decode steps) are affine in
their token counts; decode costs are per model call. Core-allocation
penalties model host-side contention: the GPU-role executor needs a minimum
of host cores, and the CPU-role executor saturates at ``c_sat`` cores.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

GPU = "gpu"
CPU = "cpu"


@dataclass(frozen=True)
class Allocation:
    """Core split between the two executors (one core stays reserved)."""

    cpu_exec_cores: int
    gpu_exec_cores: int
    total_cores: int

    def __post_init__(self) -> None:
        if min(self.cpu_exec_cores, self.gpu_exec_cores) < 1:
            raise ValueError("each executor needs at least one core")
        if self.cpu_exec_cores + self.gpu_exec_cores != self.total_cores - 1:
            raise ValueError("allocation must satisfy cpu + gpu = total - 1")


@dataclass(frozen=True)
class StageLatencyModel:
    enc_base_ms: float = 4.0
    enc_per_token_ms: float = 0.4
    prefill_base_ms: float = 2.0
    prefill_per_token_ms: float = 0.5
    dtw_base_ms: float = 2.0
    dtw_per_token_ms: float = 0.2
    decode_call_gpu_ms: float = 3.0
    cpu_gpu_decode_ratio: float = 1.15
    c_sat: float = 6.0
    g_min: float = 2.0
    allocation: Allocation | None = None

    def __post_init__(self) -> None:
        values = (
            self.enc_per_token_ms,
            self.prefill_per_token_ms,
            self.dtw_per_token_ms,
            self.decode_call_gpu_ms,
            self.cpu_gpu_decode_ratio,
        )
        if min(values) <= 0:
            raise ValueError("stage costs must be positive")

    def with_allocation(self, allocation: Allocation | None) -> "StageLatencyModel":
        return replace(self, allocation=allocation)

    def cpu_penalty(self) -> float:
        if self.allocation is None:
            return 1.0
        return max(1.0, self.c_sat / self.allocation.cpu_exec_cores)

    def gpu_host_penalty(self) -> float:
        if self.allocation is None:
            return 1.0
        return max(1.0, self.g_min / self.allocation.gpu_exec_cores)

    def enc_ms(self, n_tokens: int) -> float:
        if n_tokens <= 0:
            return 0.0
        return (self.enc_base_ms + self.enc_per_token_ms * n_tokens) * self.gpu_host_penalty()

    def prefill_ms(self, n_tokens: int) -> float:
        if n_tokens <= 0:
            return 0.0
        return (
            self.prefill_base_ms + self.prefill_per_token_ms * n_tokens
        ) * self.gpu_host_penalty()

    def dtw_ms(self, n_tokens: int) -> float:
        if n_tokens <= 0:
            return 0.0
        return (self.dtw_base_ms + self.dtw_per_token_ms * n_tokens) * self.gpu_host_penalty()

    def decode_call_ms(self, executor: str) -> float:
        """Cost of one decode model call on the given executor role."""
        if executor == GPU:
            return self.decode_call_gpu_ms * self.gpu_host_penalty()
        if executor == CPU:
            return self.decode_call_gpu_ms * self.cpu_gpu_decode_ratio * self.cpu_penalty()
        raise ValueError(f"unknown executor role: {executor}")


@dataclass(frozen=True)
class StageRecord:
    round_index: int
    stage: str
    executor: str
    start_ms: float
    end_ms: float

    def __post_init__(self) -> None:
        if self.end_ms < self.start_ms:
            raise ValueError("stage interval must not be negative")
