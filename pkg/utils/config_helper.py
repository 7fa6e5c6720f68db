import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv import dotenv_values, load_dotenv
from pydantic import ValidationError

from models.config_models import RunConfig
from models.error_models import ParameterError

ENV_PREFIX = "SHAPECX_"
LIST_FIELDS = ("latent_dims", "measures")


def _split_lists(values: Mapping[str, Any]) -> Dict[str, Any]:
    resolved = {}
    for key, value in values.items():
        if key in LIST_FIELDS and isinstance(value, str):
            value = [part.strip() for part in value.split(",") if part.strip()]
        resolved[key] = value
    return resolved


def env_overrides() -> Dict[str, Any]:
    """SHAPECX_<FIELD> variables for every RunConfig field, after loading .env"""
    load_dotenv()
    found = {}
    for field in RunConfig.model_fields:
        value = os.environ.get(ENV_PREFIX + field.upper())
        if value not in (None, ""):
            found[field] = value
    return _split_lists(found)


def file_overrides(path: Union[str, Path]) -> Dict[str, Any]:
    """key=value lines keyed by RunConfig field names; unknown keys are rejected"""
    path = Path(path)
    if not path.is_file():
        raise ParameterError(f"config file not found: {path}")
    values = {k: v for k, v in dotenv_values(path).items() if v is not None}
    unknown = sorted(set(values) - set(RunConfig.model_fields))
    if unknown:
        raise ParameterError(f"unknown config key '{unknown[0]}' in {path}")
    return _split_lists(values)


def resolve_config(config_file: Optional[Union[str, Path]] = None, **flags: Any) -> RunConfig:
    """Defaults < SHAPECX_* environment < --config file < explicit flags (None means not given)"""
    values: Dict[str, Any] = {}
    values.update(env_overrides())
    if config_file is not None:
        values.update(file_overrides(config_file))
    values.update(_split_lists({k: v for k, v in flags.items() if v is not None}))
    try:
        return RunConfig(**values)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ParameterError(f"invalid configuration: {problems}")
