"""Plain-text key-value run configuration and manifests.

Config files hold one ``key = value`` pair per line with ``#`` comments.
Relative paths are resolved against the config file's directory.  Manifests
written by commands use the same syntax with keys sorted, echo every
parameter actually used, and are themselves loadable as configs, so a run can
be reproduced from its manifest; informational keys live under the ``used.``
prefix and are ignored on load.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from tryonkit.preprocess import DEFAULT_TORSO_LABELS, PreprocessConfig
from tryonkit.raster import atomic_write_bytes

__all__ = ["RunConfig", "parse_config_text", "load_config", "write_manifest", "format_value"]

_PATH_KEYS = (
    "garment",
    "garment_mask",
    "segmentation",
    "agnostic",
    "keep_mask",
    "warped",
    "warped_mask",
    "demo_mask",
    "golden_dir",
    "out_dir",
)


@dataclass(frozen=True)
class RunConfig:
    """Aggregated settings for the command-line pipeline."""

    preprocess: PreprocessConfig = PreprocessConfig()
    encode_factor: int = 8
    resize_threshold: float = 0.5
    timesteps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    steps: int = 50
    strength: float = 1.0
    seed: int = 0
    latent_channels: int = 4
    latent_height: int = 8
    latent_width: int = 8
    trajectories: int = 10000
    attention_mode: str = "full"
    alpha_init: float = 0.5
    paths: dict = field(default_factory=dict)

    def path(self, name: str) -> Path:
        """Resolve a required path, checking that input files exist."""
        if name not in self.paths:
            raise ValueError(f"config is missing required path 'paths.{name}'")
        p = Path(self.paths[name])
        if not name.endswith("_dir") and not p.is_file():
            raise FileNotFoundError(f"paths.{name} does not exist: {p}")
        return p

    def has_path(self, name: str) -> bool:
        return name in self.paths


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; rejects malformed lines and duplicate keys."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ValueError(f"{source}:{lineno}: empty key")
        if key in mapping:
            raise ValueError(f"{source}:{lineno}: duplicate key {key!r}")
        mapping[key] = value
    return mapping


def _to_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"config key {key} must be an integer, got {value!r}") from None


def _to_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"config key {key} must be a number, got {value!r}") from None


def config_from_mapping(mapping: dict[str, str], base_dir: Path | None = None) -> RunConfig:
    """Build a RunConfig from parsed key-value pairs, applying defaults."""
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    cfg = RunConfig()
    pre_kwargs: dict = {}
    paths: dict[str, str] = {}
    updates: dict = {}

    for key, value in mapping.items():
        section, _, name = key.partition(".")
        if section == "used":
            continue
        if section == "preprocess":
            if name == "torso_labels":
                labels = frozenset(int(v) for v in value.split(",") if v.strip())
                pre_kwargs[name] = labels or DEFAULT_TORSO_LABELS
            elif name in ("erosion_kernel", "bilateral_kernel"):
                pre_kwargs[name] = _to_int(key, value)
            elif name in ("sigma_d", "sigma_r_train", "sigma_r_infer"):
                pre_kwargs[name] = _to_float(key, value)
            elif name == "mode":
                pre_kwargs[name] = value
            else:
                raise ValueError(f"unknown config key: {key}")
        elif section == "compose":
            if name == "encode_factor":
                updates["encode_factor"] = _to_int(key, value)
            elif name == "resize_threshold":
                updates["resize_threshold"] = _to_float(key, value)
            else:
                raise ValueError(f"unknown config key: {key}")
        elif section == "diffusion":
            if name in ("timesteps", "steps", "seed", "latent_channels", "latent_height", "latent_width", "trajectories"):
                updates[name] = _to_int(key, value)
            elif name in ("beta_start", "beta_end", "strength"):
                updates[name] = _to_float(key, value)
            else:
                raise ValueError(f"unknown config key: {key}")
        elif section == "attention":
            if name == "mode":
                updates["attention_mode"] = value
            elif name == "alpha_init":
                updates["alpha_init"] = _to_float(key, value)
            else:
                raise ValueError(f"unknown config key: {key}")
        elif section == "paths":
            if name not in _PATH_KEYS:
                raise ValueError(f"unknown config key: {key}")
            paths[name] = str((base_dir / value).resolve())
        else:
            raise ValueError(f"unknown config key: {key}")

    if pre_kwargs:
        updates["preprocess"] = replace(cfg.preprocess, **pre_kwargs)
    if paths:
        updates["paths"] = paths
    return replace(cfg, **updates)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such config file: {path}")
    mapping = parse_config_text(path.read_text(), source=str(path))
    return config_from_mapping(mapping, base_dir=path.parent)


def format_value(value) -> str:
    """Render a config value; floats use repr so round-trips are exact."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, frozenset) or isinstance(value, set):
        return ",".join(str(v) for v in sorted(value))
    return str(value)


def write_manifest(entries: dict, path: str | Path) -> None:
    """Write entries as sorted ``key = value`` lines, atomically."""
    lines = [f"{key} = {format_value(entries[key])}" for key in sorted(entries)]
    atomic_write_bytes(("\n".join(lines) + "\n").encode("utf-8"), path)
