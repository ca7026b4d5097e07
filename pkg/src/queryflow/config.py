"""Service configuration: one YAML document, credentials via environment."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .agent import AgentConfig
from .errors import QueryflowError
from .gateway import DEFAULT_MODEL_IDS, Gateway, LiveBackend, ModelRole
from .model import DEFAULT_EMBEDDING_DIM, ScopeDescription


class ConfigError(QueryflowError):
    pass


@dataclass(slots=True)
class GatewayConfig:
    backend: str = "scripted"  # "scripted" (offline demo) or "live"
    endpoint: str = "https://api.openai.com/v1"
    credential_env: str = "QUERYFLOW_API_KEY"
    model_ids: dict[str, str] = field(
        default_factory=lambda: {role.value: name for role, name in DEFAULT_MODEL_IDS.items()}
    )
    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_base_s: float = 1.0


@dataclass(slots=True)
class ServiceConfig:
    data_dir: Path = Path("data")
    prompt_dir: Path | None = None
    schema_file: Path | None = None
    console_dir: Path | None = None
    scope_title: str = "Test Data Analytics"
    scope_text: str = (
        "The assistant helps engineers analyze production test data: lots,"
        " wafers, dies, yields, E-test measurements, and process events."
    )
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    listen_host: str = "127.0.0.1"
    listen_port: int = 8080

    @property
    def store_path(self) -> Path:
        return self.data_dir / "examples.jsonl"

    @property
    def queries_path(self) -> Path:
        return self.data_dir / "queries.jsonl"

    @property
    def report_path(self) -> Path:
        return self.data_dir / "distill_report.json"

    @property
    def api_spec_dir(self) -> Path:
        return self.data_dir / "api_spec"

    @property
    def manifest_path(self) -> Path:
        return self.data_dir / "data_agent" / "manifest.jsonl"

    @property
    def runs_journal_path(self) -> Path:
        return self.data_dir / "runs.jsonl"

    def scope(self) -> ScopeDescription:
        return ScopeDescription(title=self.scope_title, text=self.scope_text)


def load_config(path: str | Path | None) -> ServiceConfig:
    """Load the YAML config; a missing path gives offline-demo defaults."""
    if path is None:
        return ServiceConfig()
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc

    config = ServiceConfig()
    if "data_dir" in raw:
        config.data_dir = Path(raw["data_dir"])
    if "prompt_dir" in raw and raw["prompt_dir"]:
        config.prompt_dir = Path(raw["prompt_dir"])
    if "schema_file" in raw and raw["schema_file"]:
        config.schema_file = Path(raw["schema_file"])
    if "console_dir" in raw and raw["console_dir"]:
        config.console_dir = Path(raw["console_dir"])
    scope = raw.get("scope") or {}
    if "title" in scope:
        config.scope_title = scope["title"]
    if "text" in scope:
        config.scope_text = scope["text"]
    if "file" in scope and scope["file"]:
        scope_path = Path(scope["file"])
        if not scope_path.is_absolute():
            scope_path = path.parent / scope_path
        config.scope_text = scope_path.read_text(encoding="utf-8").strip()

    gw = raw.get("gateway") or {}
    for key in ("backend", "endpoint", "credential_env"):
        if key in gw:
            setattr(config.gateway, key, gw[key])
    if "model_ids" in gw:
        config.gateway.model_ids.update(gw["model_ids"])
    for key in ("embedding_dim", "max_retries"):
        if key in gw:
            setattr(config.gateway, key, int(gw[key]))
    for key in ("timeout_s", "backoff_base_s"):
        if key in gw:
            setattr(config.gateway, key, float(gw[key]))

    ag = raw.get("agent") or {}
    try:
        config.agent = AgentConfig(
            icl_k=int(ag.get("icl_k", 4)),
            convergence_threshold=float(ag.get("convergence_threshold", 0.9)),
            max_iterations=int(ag.get("max_iterations", 5)),
            with_thought=bool(ag.get("with_thought", True)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad agent settings: {exc}") from exc

    listen = raw.get("listen") or {}
    if "host" in listen:
        config.listen_host = listen["host"]
    if "port" in listen:
        config.listen_port = int(listen["port"])

    if config.gateway.backend not in ("scripted", "live"):
        raise ConfigError(f"unknown gateway backend {config.gateway.backend!r}")
    return config


def build_gateway(config: ServiceConfig) -> Gateway:
    """Construct the configured gateway; live mode needs the credential set."""
    gw = config.gateway
    if gw.backend == "scripted":
        from .demo import demo_backend

        backend = demo_backend()
    else:
        api_key = os.environ.get(gw.credential_env, "")
        if not api_key:
            raise ConfigError(
                f"live gateway needs the {gw.credential_env} environment variable;"
                " set it or switch gateway.backend to 'scripted'"
            )
        backend = LiveBackend(
            base_url=gw.endpoint,
            api_key=api_key,
            model_ids={ModelRole(role): name for role, name in gw.model_ids.items()},
            timeout_s=gw.timeout_s,
        )
    return Gateway(
        backend,
        embedding_dim=gw.embedding_dim,
        max_retries=gw.max_retries,
        backoff_base_s=gw.backoff_base_s,
    )
