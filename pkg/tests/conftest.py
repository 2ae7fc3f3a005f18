import sys
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

Dataset = Tuple[np.ndarray, np.ndarray]


def _make_regression(
    n: int,
    p: int,
    *,
    seed: int = 0,
    beta: Optional[Sequence[float]] = None,
    intercept: float = 1.0,
    noise: float = 0.5,
) -> Dataset:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    coef = rng.standard_normal(p) if beta is None else np.asarray(beta, dtype=np.float64)
    y = intercept + x @ coef + noise * rng.standard_normal(n)
    return x, y


def _write_csv(
    path: Path,
    x: np.ndarray,
    y: np.ndarray,
    *,
    header: bool = True,
    names: Optional[List[str]] = None,
    delimiter: str = ",",
) -> Path:
    """响应列放在最后；数值以 repr 写出以便无损回读。"""

    path.parent.mkdir(parents=True, exist_ok=True)
    names = names or [f"x{j}" for j in range(x.shape[1])] + ["y"]
    lines = []
    if header:
        lines.append(delimiter.join(names))
    for row, target in zip(x, y):
        lines.append(delimiter.join([repr(float(value)) for value in row] + [repr(float(target))]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def make_regression() -> Callable[..., Dataset]:
    """合成线性数据：``y = intercept + xᵀβ + noise·ε``。"""

    return _make_regression


@pytest.fixture
def write_csv() -> Callable[..., Path]:
    return _write_csv


@pytest.fixture
def split_csv(tmp_path: Path) -> Callable[[Path, int], List[Path]]:
    """把带表头的 CSV 按行顺序切成若干分片，每个分片都带表头。"""

    def _split(source: Path, parts: int) -> List[Path]:
        lines = source.read_text(encoding="utf-8").splitlines()
        header, rows = lines[0], lines[1:]
        shards: List[Path] = []
        for index, chunk in enumerate(np.array_split(np.arange(len(rows)), parts)):
            shard = tmp_path / f"{source.stem}-part{parts}-{index}.csv"
            body = [header] + [rows[i] for i in chunk]
            shard.write_text("\n".join(body) + "\n", encoding="utf-8")
            shards.append(shard)
        return shards

    return _split
