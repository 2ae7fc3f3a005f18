"""工具集合：日志、配置等。"""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

LOGGER_NAME = "penreg"


def configure_logging() -> None:
    """按 ``PENREG_LOG_LEVEL`` / ``PENREG_LOG_FILE`` 重新配置根日志；.env 载入后需再调用一次。"""

    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    log_file = os.environ.get("PENREG_LOG_FILE")
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))

    logging.basicConfig(
        level=os.environ.get("PENREG_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


configure_logging()
logger = logging.getLogger(LOGGER_NAME)


def ensure_directory(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_env_settings(path: str = ".env") -> Dict[str, str]:
    """读取 .env 配置并写入环境变量。"""

    env_path = Path(path)
    settings: Dict[str, str] = {}
    if not env_path.exists():
        return settings

    for raw_line in env_path.read_text(encoding="utf-8").splitlines():
        line = raw_line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        settings[key] = value
        os.environ.setdefault(key, value)
    return settings


def resolve_thread_count(explicit: Optional[int] = None) -> int:
    """命令行优先，其次环境变量 ``PENREG_THREADS``，默认 1。"""

    if explicit is not None:
        return max(1, int(explicit))
    raw = os.environ.get("PENREG_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("忽略非法的 PENREG_THREADS=%s", raw)
        return 1


__all__ = [
    "LOGGER_NAME",
    "configure_logging",
    "logger",
    "ensure_directory",
    "load_env_settings",
    "resolve_thread_count",
]
