from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Type, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic import ValidationError as PydanticValidationError

from graphmarket.featural.spectrum import FeaturalScores
from graphmarket.structure.transport import DisparityScore
from graphmarket.utils.errors import ConfigError, DataIOError

DEFAULT_CONFIG_PATH = "config/valuation_config.json"

Direction = Literal["high", "low"]
Party = Literal["broker", "buyer", "seller"]
MessageKind = Literal[
    "SizeReport",
    "ProxyGraph",
    "StructuralSummary",
    "BuyerEigenvectors",
    "BuyerEigenvalues",
    "SellerProjectedVariances",
    "ValuationReport",
]


class Preference(BaseModel):
    """Which end of each metric is better for the buyer."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    d: Direction = "high"
    r: Direction = "high"
    s: Direction = "low"

    @classmethod
    def parse(cls, text: str) -> "Preference":
        """Parse 'd=high,r=high,s=low'; omitted metrics keep their defaults."""
        values = {}
        for item in filter(None, (part.strip() for part in text.split(","))):
            metric, _, direction = item.partition("=")
            values[metric.strip().lower()] = direction.strip().lower()
        try:
            return cls(**values)
        except PydanticValidationError as err:
            raise ConfigError(f"invalid preference {text!r}: {err.errors()[0]['msg']}")


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha: float = 0.5
    k: int = 16
    k_prime: int = 8
    seed: int = 0
    proxy_nodes: Optional[int] = None
    proxy_p: float = 0.5
    prefer: Preference = Field(default_factory=Preference)
    format: Literal["json", "csv"] = "json"
    threads: int = 1
    tie_break: bool = True

    @field_validator("alpha")
    @classmethod
    def _alpha_range(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        return value

    @field_validator("k", "k_prime", "threads")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @field_validator("seed")
    @classmethod
    def _seed_range(cls, value: int) -> int:
        if not 0 <= value < 2**64:
            raise ValueError("seed must be a non-negative 64-bit integer")
        return value

    @field_validator("proxy_nodes")
    @classmethod
    def _proxy_nodes(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 2:
            raise ValueError("a proxy graph needs at least 2 nodes")
        return value

    @field_validator("proxy_p")
    @classmethod
    def _proxy_p(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("edge probability must lie in (0, 1)")
        return value

    @classmethod
    def build(cls, **values: Any) -> "RunConfig":
        try:
            return cls(**values)
        except PydanticValidationError as err:
            first = err.errors()[0]
            field = ".".join(str(part) for part in first["loc"])
            raise ConfigError(f"invalid config value for {field}: {first['msg']}")

    @classmethod
    def load(cls, config_path: Optional[str] = None, **overrides: Any) -> "RunConfig":
        """Defaults <- JSON config file <- GRAPHMARKET_* environment <- explicit overrides."""
        load_dotenv()
        values: Dict[str, Any] = {}
        path = Path(config_path or DEFAULT_CONFIG_PATH)
        if path.exists():
            try:
                with open(path, "r") as f:
                    values.update(json.load(f))
            except (OSError, json.JSONDecodeError) as err:
                raise DataIOError(f"cannot read config ({err})", path=str(path))
        elif config_path is not None:
            raise DataIOError("config file not found", path=str(path))

        for name, env_var in (("seed", "GRAPHMARKET_SEED"), ("threads", "GRAPHMARKET_THREADS")):
            raw = os.getenv(env_var, "").strip()
            if raw:
                try:
                    values[name] = int(raw)
                except ValueError:
                    raise ConfigError(f"{env_var} must be an integer, got {raw!r}")

        values.update({key: value for key, value in overrides.items() if value is not None})
        if isinstance(values.get("prefer"), str):
            values["prefer"] = Preference.parse(values["prefer"])
        return cls.build(**values)

    def echo(self) -> Dict[str, Any]:
        """The settings that determine the scores, embedded in every report."""
        return {
            "alpha": self.alpha,
            "k": self.k,
            "k_prime": self.k_prime,
            "seed": self.seed,
            "proxy_nodes": self.proxy_nodes,
            "proxy_p": self.proxy_p,
        }


class _Payload(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SizeReport(_Payload):
    max_nodes: int
    graph_count: int
    feature_dim: Optional[int] = None


class ProxyGraph(_Payload):
    n: int
    edges: List[Tuple[int, int]]


class StructuralSummary(_Payload):
    summary: List[List[float]]
    max_residual: float


class BuyerEigenvectors(_Payload):
    eigenvectors: List[List[float]]


class BuyerEigenvalues(_Payload):
    eigenvalues: List[float]


class SellerProjectedVariances(_Payload):
    values: List[float]


class ValuationReport(_Payload):
    s: DisparityScore
    featural: Optional[FeaturalScores] = None
    featural_note: Optional[str] = None
    epsilon_hat_max: float
    config: Dict[str, Any]

    def flat(self) -> Dict[str, Any]:
        return {
            "S": self.s.s,
            "D": None if self.featural is None else self.featural.diversity,
            "R": None if self.featural is None else self.featural.relevance,
            "gwd": self.s.gwd,
            "epsilon_hat_max": self.epsilon_hat_max,
            "config": self.config,
        }

    def metrics(self) -> Dict[str, float]:
        values = {"s": self.s.s}
        if self.featural is not None:
            values["d"] = self.featural.diversity
            values["r"] = self.featural.relevance
        return values


PAYLOAD_SCHEMAS: Dict[str, Type[_Payload]] = {
    "SizeReport": SizeReport,
    "ProxyGraph": ProxyGraph,
    "StructuralSummary": StructuralSummary,
    "BuyerEigenvectors": BuyerEigenvectors,
    "BuyerEigenvalues": BuyerEigenvalues,
    "SellerProjectedVariances": SellerProjectedVariances,
    "ValuationReport": ValuationReport,
}

# (sender, recipient) -> kinds that may travel on that edge
ALLOWED_ROUTES: Dict[Tuple[str, str], Tuple[str, ...]] = {
    ("buyer", "broker"): ("SizeReport", "StructuralSummary", "BuyerEigenvalues"),
    ("seller", "broker"): ("SizeReport", "StructuralSummary", "SellerProjectedVariances"),
    ("broker", "buyer"): ("ProxyGraph", "ValuationReport"),
    ("broker", "seller"): ("ProxyGraph", "ValuationReport"),
    ("buyer", "seller"): ("BuyerEigenvectors",),
}


class Message(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    session_id: str
    seq: int
    sender: Party = Field(alias="from")
    recipient: Party = Field(alias="to")
    kind: MessageKind
    payload: Dict[str, Any]

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True)

    def body(self) -> _Payload:
        return PAYLOAD_SCHEMAS[self.kind](**self.payload)


class SellerRanking(BaseModel):
    per_metric_ranks: Dict[str, Dict[str, float]]
    average_rank: Dict[str, float]
    final_order: List[str]


def payload_dict(body: Union[_Payload, Dict[str, Any]]) -> Dict[str, Any]:
    if isinstance(body, BaseModel):
        return json.loads(body.model_dump_json())
    return body
