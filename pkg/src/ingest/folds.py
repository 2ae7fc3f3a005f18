"""折键分配：由记录全局序号、种子与折数确定的可复现随机键。"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


def splitmix64(value: int) -> int:
    """splitmix64 终结器，将 64 位整数打散为近似均匀的 64 位输出。"""

    z = (value + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def assign_fold(record_ordinal: int, seed: int, k: int) -> int:
    """返回记录的折键 ∈ {0, ..., k-1}。

    以 ``seed ⊕ ordinal`` 作为哈希输入，对落在 ``2^64 - (2^64 mod k)`` 之上的
    输出继续迭代哈希（拒绝采样），避免取模偏差。结果只依赖
    ``(record_ordinal, seed, k)``，与分片布局和 worker 无关。
    """

    if k < 2:
        raise ValueError("折数 k 必须 ≥ 2")
    limit = (1 << 64) - ((1 << 64) % k)
    z = splitmix64((seed ^ record_ordinal) & _MASK64)
    while z >= limit:
        z = splitmix64(z)
    return z % k


__all__ = ["assign_fold", "splitmix64"]
