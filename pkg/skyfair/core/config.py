import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Type, TypeVar

from pydantic import BaseModel, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from skyfair.core.errors import ConfigurationError
from skyfair.models.scenario import ExperimentOptions, ScenarioConfig

ModelT = TypeVar("ModelT", bound=BaseModel)


class Settings(BaseSettings):
    """Runtime settings with environment variable support (prefix SKYFAIR_)"""

    model_config = SettingsConfigDict(
        env_prefix="SKYFAIR_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    APP_NAME: str = "skyfair"
    APP_VERSION: str = "0.1.0"
    DEBUG: bool = False

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(message)s"
    LOG_RENDERER: str = "console"  # or "json"

    # Worker parallelism, 0 = one thread per CPU
    THREADS: int = 0

    # Outputs
    OUTPUT_DIR: str = "results"
    DEFAULT_PRESET: str = "table1"

    # Exhaustive search guard
    EXHAUSTIVE_MAX_CANDIDATES: int = 100_000


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get runtime settings"""
    return settings


def validate_settings(current: Optional[Settings] = None) -> bool:
    """Validate critical settings"""
    current = current or settings
    if current.THREADS < 0:
        raise ConfigurationError("must be >= 0 (0 = auto)", field="SKYFAIR_THREADS")
    if current.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        raise ConfigurationError(f"unknown level {current.LOG_LEVEL}", field="SKYFAIR_LOG_LEVEL")
    if current.LOG_RENDERER not in ("console", "json"):
        raise ConfigurationError("expected console or json", field="SKYFAIR_LOG_RENDERER")
    if current.EXHAUSTIVE_MAX_CANDIDATES < 1:
        raise ConfigurationError("must be positive", field="SKYFAIR_EXHAUSTIVE_MAX_CANDIDATES")
    return True


def resolve_threads(requested: Optional[int] = None) -> int:
    """0 means one worker per CPU"""
    threads = settings.THREADS if requested is None else requested
    if threads < 0:
        raise ConfigurationError("must be >= 0", field="SKYFAIR_THREADS")
    return threads or (os.cpu_count() or 1)


def setup_output_directory(path: Optional[str] = None) -> Path:
    """Create the output directory if it doesn't exist"""
    out = Path(path or settings.OUTPUT_DIR)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ScenarioConfig defaults are the full-scale values; presets only override
PRESETS: Dict[str, Dict[str, Any]] = {
    "table1": {},
    "desk": {
        "j": 6,
        "m_min": 50,
        "m_max": 50,
        "nu": 2,
        "x_min_m": -500.0,
        "x_max_m": 500.0,
        "y_min_m": -500.0,
        "y_max_m": 500.0,
        "h_min_m": 25.0,
        "h_max_m": 525.0,
        "upsilon_m": 50.0,
    },
}


def _field_keys(model: Type[BaseModel]) -> Dict[str, str]:
    """Map every accepted file key (alias or name) to the field name"""
    keys = {}
    for name, info in model.model_fields.items():
        keys[name] = name
        if info.alias:
            keys[info.alias] = name
    return keys


SCENARIO_KEYS = _field_keys(ScenarioConfig)
OPTION_KEYS = _field_keys(ExperimentOptions)


def build_model(model: Type[ModelT], values: Mapping[str, Any]) -> ModelT:
    """Construct a config model, turning validation failures into ConfigurationError"""
    try:
        return model.model_validate(dict(values))
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or None
        raise ConfigurationError(first["msg"], field=field) from e


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """Parse `key = value` lines; blank lines and # comments are skipped"""
    values: Dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{line_no}: expected 'key = value'", field=line)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{source}:{line_no}: empty key")
        if key not in SCENARIO_KEYS and key not in OPTION_KEYS:
            raise ConfigurationError(f"{source}:{line_no}: unknown key", field=key)
        if key in values:
            raise ConfigurationError(f"{source}:{line_no}: duplicate key", field=key)
        values[key] = value
    return values


def load_config_file(path: str) -> Dict[str, str]:
    """Read a key-value config file; a missing file surfaces as OSError"""
    file_path = Path(path)
    text = file_path.read_text(encoding="utf-8")
    return parse_config_text(text, source=str(file_path))


def split_values(values: Mapping[str, Any]) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    """Route flat key-value pairs to ScenarioConfig and ExperimentOptions"""
    scenario: Dict[str, Any] = {}
    options: Dict[str, Any] = {}
    for key, value in values.items():
        if key in SCENARIO_KEYS:
            scenario[SCENARIO_KEYS[key]] = value
        elif key in OPTION_KEYS:
            options[OPTION_KEYS[key]] = value
        else:
            raise ConfigurationError("unknown key", field=key)
    return scenario, options


def resolve_config(
    preset: Optional[str] = None,
    config_path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> Tuple[ScenarioConfig, ExperimentOptions]:
    """Layer preset, file and flag overrides (later layers win)"""
    preset_name = preset or settings.DEFAULT_PRESET
    if preset_name not in PRESETS:
        raise ConfigurationError(
            f"unknown preset {preset_name!r}; expected one of {', '.join(PRESETS)}", field="preset"
        )
    merged: Dict[str, Any] = dict(PRESETS[preset_name])
    if config_path:
        file_scenario, file_options = split_values(load_config_file(config_path))
        merged.update(file_scenario)
        merged.update(file_options)
    if overrides:
        flag_scenario, flag_options = split_values(
            {k: v for k, v in overrides.items() if v is not None}
        )
        merged.update(flag_scenario)
        merged.update(flag_options)
    scenario_values, option_values = split_values(merged)
    return build_model(ScenarioConfig, scenario_values), build_model(ExperimentOptions, option_values)


def config_snapshot(config: ScenarioConfig) -> Dict[str, Any]:
    """Config as file keys, suitable for a manifest"""
    return config.model_dump(by_alias=True)
