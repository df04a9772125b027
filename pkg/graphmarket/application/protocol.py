"""
Blind three-party valuation session.

The broker only ever sees sizes, pooled structural summaries and spectra;
the seller only sees the proxy and the buyer's eigenbasis; the buyer only
sees the proxy and the final report. Every message goes through a
`MessageBus`, whose ordered log is the audit artifact: `verify_log`
recomputes the report from it without access to either dataset.

The blindness guarantee is structural (which kinds may travel where, and
which payload schemas they admit). It says nothing about how much a pooled
summary or a spectrum reveals about the data behind it.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from graphmarket.featural.spectrum import (
    FeaturalScores,
    buyer_spectrum,
    check_orthonormal,
    diversity_relevance,
    seller_projected_variances,
    stack_and_center,
)
from graphmarket.graphs.core import Graph, GraphSet, generate_proxy
from graphmarket.structure.embedding import embed
from graphmarket.structure.matching import KeyFrame, MatchResult
from graphmarket.structure.transport import (
    DisparityScore,
    PooledSummary,
    align_embedding,
    gwd_sets,
    mean_pool,
    structural_disparity,
)
from graphmarket.utils.errors import (
    GraphInvariantError,
    PhaseError,
    ShapeError,
    ValidationError,
    VerificationError,
)
from graphmarket.utils.objects import (
    ALLOWED_ROUTES,
    PAYLOAD_SCHEMAS,
    BuyerEigenvalues,
    BuyerEigenvectors,
    Message,
    ProxyGraph,
    RunConfig,
    SellerProjectedVariances,
    SizeReport,
    StructuralSummary,
    ValuationReport,
    payload_dict,
)

logger = logging.getLogger(__name__)

PARTIES = ("buyer", "seller")
VERIFY_TOLERANCE = 1e-9


class Phase(str, Enum):
    INIT = "Init"
    PROXY_SENT = "ProxySent"
    STRUCTURAL_COLLECTED = "StructuralCollected"
    FEATURAL_COLLECTED = "FeaturalCollected"
    DONE = "Done"


class MessageBus:
    """Assigns sequence numbers, enforces routes and keeps the ordered log."""

    def __init__(self, session_id: str):
        self.session_id = session_id
        self.messages: List[Message] = []

    def post(self, sender: str, recipient: str, body) -> Message:
        kind = type(body).__name__
        if kind not in ALLOWED_ROUTES.get((sender, recipient), ()):
            raise ValidationError(f"{sender} may not send {kind} to {recipient}")
        message = Message(
            session_id=self.session_id,
            seq=len(self.messages),
            sender=sender,
            recipient=recipient,
            kind=kind,
            payload=payload_dict(body),
        )
        self.messages.append(message)
        return message

    def lines(self) -> List[str]:
        return [message.to_json() for message in self.messages]


def session_token(config: RunConfig, reports: Dict[str, SizeReport]) -> str:
    """Deterministic session id: identical inputs give identical logs."""
    material = {
        "config": config.echo(),
        "tie_break": config.tie_break,
        "reports": {party: reports[party].model_dump() for party in PARTIES},
    }
    digest = hashlib.sha256(json.dumps(material, sort_keys=True).encode("utf-8"))
    return digest.hexdigest()[:16]


def size_report(gs: GraphSet) -> SizeReport:
    return SizeReport(max_nodes=gs.max_nodes, graph_count=len(gs), feature_dim=gs.feature_dim)


def proxy_size(config: RunConfig, reports: Sequence[SizeReport]) -> int:
    if config.proxy_nodes is not None:
        return config.proxy_nodes
    # a one-node proxy has no edges to sample
    return max(2, max(report.max_nodes for report in reports))


@dataclass
class SessionState:
    config: RunConfig
    phase: Phase = Phase.INIT
    size_reports: Dict[str, SizeReport] = field(default_factory=dict)
    proxy: Optional[Graph] = None
    summaries: Dict[str, StructuralSummary] = field(default_factory=dict)
    eigenvalues: Optional[List[float]] = None
    projected_variances: Optional[List[float]] = None
    disparity: Optional[DisparityScore] = None
    featural: Optional[FeaturalScores] = None
    featural_note: Optional[str] = None

    @property
    def featural_enabled(self) -> bool:
        return all(self.size_reports[party].feature_dim is not None for party in PARTIES)

    def advance(self, phase: Phase) -> None:
        logger.debug("session phase %s -> %s", self.phase.value, phase.value)
        self.phase = phase


def broker_init(config: RunConfig, reports: Dict[str, SizeReport]) -> Tuple[SessionState, ProxyGraph]:
    """Size the proxy from both SizeReports and generate it."""
    missing = [party for party in PARTIES if party not in reports]
    if missing:
        raise PhaseError(f"missing SizeReport from {', '.join(missing)}")
    buyer_dim, seller_dim = reports["buyer"].feature_dim, reports["seller"].feature_dim
    if buyer_dim is not None and seller_dim is not None and buyer_dim != seller_dim:
        raise ShapeError(f"buyer features have dimension {buyer_dim}, seller features {seller_dim}")

    proxy = generate_proxy(proxy_size(config, list(reports.values())), config.proxy_p, config.seed)
    state = SessionState(config=config, size_reports=dict(reports), proxy=proxy)
    return state, ProxyGraph(n=proxy.node_count, edges=[list(edge) for edge in proxy.edges])


def summarize_set(
    gs: GraphSet,
    key: KeyFrame,
    k: int,
    k_prime: int,
    node_cap: Optional[int] = None,
) -> Tuple[PooledSummary, List[MatchResult]]:
    """Match every graph to the key, align its embedding in the key frame and mean-pool."""
    if len(gs) == 0:
        raise GraphInvariantError("cannot summarise an empty graph set")
    node_cap = node_cap or max(key.key.node_count, gs.max_nodes)
    matches = []
    aligned = []
    for g in gs:
        match = key.match(g)
        matches.append(match)
        aligned.append(align_embedding(embed(g, k, k_prime), match.permutation, node_cap))
    return mean_pool(np.stack(aligned)), matches


def party_structural_summary(
    gs: GraphSet, proxy: Graph, k: int, k_prime: int, tie_break: bool = True
) -> StructuralSummary:
    summary, matches = summarize_set(gs, KeyFrame(proxy, tie_break=tie_break), k, k_prime)
    return StructuralSummary(
        summary=summary.data.tolist(),
        max_residual=max(match.residual for match in matches),
    )


def broker_structural_score(
    fb: PooledSummary, fs: PooledSummary, alpha: float, threads: Optional[int] = None
) -> DisparityScore:
    return structural_disparity(gwd_sets(fb, fs, threads=threads), alpha)


def buyer_featural_offer(gs: GraphSet) -> Tuple[BuyerEigenvectors, BuyerEigenvalues]:
    spectrum = buyer_spectrum(stack_and_center(gs))
    return (
        BuyerEigenvectors(eigenvectors=spectrum.eigenvectors.tolist()),
        BuyerEigenvalues(eigenvalues=spectrum.eigenvalues.tolist()),
    )


def seller_featural_response(gs: GraphSet, eigenvectors: Sequence[Sequence[float]]) -> SellerProjectedVariances:
    variances = seller_projected_variances(stack_and_center(gs), np.asarray(eigenvectors, dtype=np.float64))
    return SellerProjectedVariances(values=variances.values.tolist())


def broker_featural_score(lam: Sequence[float], lam_hat: Sequence[float]) -> FeaturalScores:
    return diversity_relevance(lam, lam_hat)


class Broker:
    """Collects summaries in phase order and emits the report. Rejected messages leave the state untouched."""

    def __init__(self, config: RunConfig, bus: MessageBus):
        self.config = config
        self.bus = bus
        self.state = SessionState(config=config)
        self._pending_reports: Dict[str, SizeReport] = {}

    def _expect(self, message: Message, phase: Phase, kind: str, seen: Dict[str, Any]) -> None:
        if message.recipient != "broker":
            raise PhaseError(f"broker received a message addressed to {message.recipient}")
        if kind not in ALLOWED_ROUTES.get((message.sender, "broker"), ()):
            raise PhaseError(f"{message.sender} may not send {kind} to the broker")
        if self.state.phase != phase or message.kind != kind:
            raise PhaseError(f"{message.kind} from {message.sender} not accepted in phase {self.state.phase.value}")
        if message.sender in seen:
            raise PhaseError(f"duplicate {kind} from {message.sender}")

    def receive(self, message: Message) -> None:
        state = self.state
        if message.kind == "SizeReport":
            self._expect(message, Phase.INIT, "SizeReport", self._pending_reports)
            self._pending_reports[message.sender] = SizeReport(**message.payload)
        elif message.kind == "StructuralSummary":
            self._expect(message, Phase.PROXY_SENT, "StructuralSummary", state.summaries)
            body = StructuralSummary(**message.payload)
            pooled = {party: PooledSummary(s.summary) for party, s in state.summaries.items()}
            pooled[message.sender] = PooledSummary(body.summary)
            disparity = None
            if len(pooled) == len(PARTIES):
                disparity = broker_structural_score(
                    pooled["buyer"], pooled["seller"], self.config.alpha, threads=self.config.threads
                )
            state.summaries[message.sender] = body
            if disparity is not None:
                self._structure_scored(disparity)
        elif message.kind == "BuyerEigenvalues":
            seen = {} if state.eigenvalues is None else {"buyer": state.eigenvalues}
            self._expect(message, Phase.STRUCTURAL_COLLECTED, "BuyerEigenvalues", seen)
            lam = BuyerEigenvalues(**message.payload).eigenvalues
            self._collect_spectra(lam, state.projected_variances)
            state.eigenvalues = lam
        elif message.kind == "SellerProjectedVariances":
            seen = {} if state.projected_variances is None else {"seller": state.projected_variances}
            self._expect(message, Phase.STRUCTURAL_COLLECTED, "SellerProjectedVariances", seen)
            lam_hat = SellerProjectedVariances(**message.payload).values
            self._collect_spectra(state.eigenvalues, lam_hat)
            state.projected_variances = lam_hat
        else:
            raise PhaseError(f"broker does not accept {message.kind}")

    def send_proxy(self) -> List[Message]:
        if self.state.phase != Phase.INIT:
            raise PhaseError(f"proxy already sent (phase {self.state.phase.value})")
        state, proxy = broker_init(self.config, self._pending_reports)
        self.state = state
        logger.info("1. SENT %d-NODE PROXY", proxy.n)
        state.advance(Phase.PROXY_SENT)
        return [self.bus.post("broker", party, proxy) for party in PARTIES]

    def _structure_scored(self, disparity: DisparityScore) -> None:
        state = self.state
        state.disparity = disparity
        logger.info("2. COLLECTED STRUCTURAL SUMMARIES, GWD %.6g", disparity.gwd)
        state.advance(Phase.STRUCTURAL_COLLECTED)
        if not state.featural_enabled:
            lacking = [party for party in PARTIES if state.size_reports[party].feature_dim is None]
            state.featural_note = f"skipped: {' and '.join(lacking)} without node features"
            logger.info("3. %s", state.featural_note.upper())
            state.advance(Phase.FEATURAL_COLLECTED)

    def _collect_spectra(self, lam: Optional[List[float]], lam_hat: Optional[List[float]]) -> None:
        if lam is None or lam_hat is None:
            return
        state = self.state
        state.featural = broker_featural_score(lam, lam_hat)
        logger.info("3. COLLECTED SPECTRA, D %.6g R %.6g", state.featural.diversity, state.featural.relevance)
        state.advance(Phase.FEATURAL_COLLECTED)

    def report(self) -> ValuationReport:
        state = self.state
        if state.phase not in (Phase.FEATURAL_COLLECTED, Phase.DONE):
            raise PhaseError(f"no report before both inputs arrive (phase {state.phase.value})")
        return ValuationReport(
            s=state.disparity,
            featural=state.featural,
            featural_note=state.featural_note,
            epsilon_hat_max=sum(state.summaries[party].max_residual for party in PARTIES),
            config=self.config.echo(),
        )

    def send_report(self) -> List[Message]:
        if self.state.phase == Phase.DONE:
            raise PhaseError("report already sent")
        report = self.report()
        messages = [self.bus.post("broker", party, report) for party in PARTIES]
        self.state.advance(Phase.DONE)
        logger.info("4. SENT REPORT S %.6g", report.s.s)
        return messages


class DataOwner:
    """A buyer or seller: holds its GraphSet and answers only with summaries."""

    role = ""

    def __init__(self, gs: GraphSet, config: RunConfig, bus: MessageBus):
        self.gs = gs
        self.config = config
        self.bus = bus
        self.proxy: Optional[Graph] = None
        self.report: Optional[ValuationReport] = None

    def send_size_report(self) -> Message:
        return self.bus.post(self.role, "broker", size_report(self.gs))

    def send_structural_summary(self) -> Message:
        if self.proxy is None:
            raise PhaseError(f"{self.role} has no proxy yet")
        body = party_structural_summary(
            self.gs, self.proxy, self.config.k, self.config.k_prime, tie_break=self.config.tie_break
        )
        return self.bus.post(self.role, "broker", body)

    def receive(self, message: Message) -> None:
        if message.recipient != self.role:
            raise PhaseError(f"{self.role} received a message addressed to {message.recipient}")
        if message.kind == "ProxyGraph":
            if self.proxy is not None:
                raise PhaseError(f"{self.role} already holds a proxy")
            body = ProxyGraph(**message.payload)
            self.proxy = Graph.from_edges(body.n, body.edges)
        elif message.kind == "ValuationReport":
            if self.proxy is None or self.report is not None:
                raise PhaseError(f"unexpected ValuationReport at {self.role}")
            self.report = ValuationReport(**message.payload)
        else:
            self._receive_other(message)

    def _receive_other(self, message: Message) -> None:
        raise PhaseError(f"{self.role} does not accept {message.kind}")


class BuyerParty(DataOwner):
    role = "buyer"

    def send_featural_offer(self) -> Tuple[Message, Message]:
        if self.proxy is None:
            raise PhaseError("buyer has no proxy yet")
        vectors, values = buyer_featural_offer(self.gs)
        return self.bus.post("buyer", "seller", vectors), self.bus.post("buyer", "broker", values)


class SellerParty(DataOwner):
    role = "seller"

    def __init__(self, gs: GraphSet, config: RunConfig, bus: MessageBus):
        super().__init__(gs, config, bus)
        self.eigenvectors: Optional[List[List[float]]] = None

    def _receive_other(self, message: Message) -> None:
        if message.kind != "BuyerEigenvectors" or self.proxy is None or self.eigenvectors is not None:
            raise PhaseError(f"seller does not accept {message.kind} now")
        self.eigenvectors = BuyerEigenvectors(**message.payload).eigenvectors

    def send_projected_variances(self) -> Message:
        if self.eigenvectors is None:
            raise PhaseError("seller has not received the buyer eigenvectors")
        return self.bus.post("seller", "broker", seller_featural_response(self.gs, self.eigenvectors))


def run_session(buyer: GraphSet, seller: GraphSet, config: RunConfig) -> Tuple[ValuationReport, List[Message]]:
    reports = {"buyer": size_report(buyer), "seller": size_report(seller)}
    bus = MessageBus(session_token(config, reports))
    broker = Broker(config, bus)
    parties = {"buyer": BuyerParty(buyer, config, bus), "seller": SellerParty(seller, config, bus)}

    for party in PARTIES:
        broker.receive(parties[party].send_size_report())
    for message in broker.send_proxy():
        parties[message.recipient].receive(message)
    for party in PARTIES:
        broker.receive(parties[party].send_structural_summary())

    if broker.state.phase == Phase.STRUCTURAL_COLLECTED:
        vectors, values = parties["buyer"].send_featural_offer()
        parties["seller"].receive(vectors)
        broker.receive(values)
        broker.receive(parties["seller"].send_projected_variances())

    for message in broker.send_report():
        parties[message.recipient].receive(message)
    return broker.report(), list(bus.messages)


def _parse_log(records: Sequence[Dict[str, Any]]) -> List[Message]:
    messages = []
    for position, record in enumerate(records):
        try:
            messages.append(Message(**record))
        except (PydanticValidationError, TypeError) as err:
            raise VerificationError(f"message {position} is malformed: {err}")
    return messages


def audit_blindness(messages: Sequence[Message]) -> None:
    """Every message must travel an allowed route and match its kind's payload schema."""
    for message in messages:
        allowed = ALLOWED_ROUTES.get((message.sender, message.recipient), ())
        if message.kind not in allowed:
            raise VerificationError(
                f"message {message.seq}: {message.sender} may not send {message.kind} to {message.recipient}"
            )
        try:
            PAYLOAD_SCHEMAS[message.kind](**message.payload)
        except PydanticValidationError as err:
            raise VerificationError(f"message {message.seq}: {message.kind} payload violates its schema ({err.error_count()} errors)")


def _only(messages: Sequence[Message], kind: str, sender: str) -> Message:
    found = [m for m in messages if m.kind == kind and m.sender == sender]
    if len(found) != 1:
        raise VerificationError(f"expected one {kind} from {sender}, found {len(found)}")
    return found[0]


def _close(a: Optional[float], b: Optional[float]) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return abs(a - b) <= VERIFY_TOLERANCE * max(1.0, abs(a), abs(b))


def verify_log(records: Sequence[Dict[str, Any]]) -> ValuationReport:
    """Recompute the report from a message log; raises VerificationError on any disagreement."""
    messages = _parse_log(records)
    if not messages:
        raise VerificationError("empty trace")
    if [m.seq for m in messages] != list(range(len(messages))):
        raise VerificationError("sequence numbers are not 0..n-1 in order")
    if len({m.session_id for m in messages}) != 1:
        raise VerificationError("trace mixes sessions")
    audit_blindness(messages)

    report_messages = [m for m in messages if m.kind == "ValuationReport"]
    if [m.recipient for m in report_messages] != list(PARTIES) or messages[-2:] != report_messages:
        raise VerificationError("trace must end with the report to buyer and seller")
    if report_messages[0].payload != report_messages[1].payload:
        raise VerificationError("buyer and seller received different reports")
    report = ValuationReport(**report_messages[0].payload)

    try:
        config = RunConfig.build(**report.config)
    except ValidationError as err:
        raise VerificationError(f"report carries an invalid config echo ({err})")
    if config.echo() != report.config:
        raise VerificationError("report config echo is incomplete")

    reports = {party: SizeReport(**_only(messages, "SizeReport", party).payload) for party in PARTIES}
    # tie_break is not echoed, so either setting may have produced the id
    tokens = {
        session_token(config.model_copy(update={"tie_break": tie_break}), reports) for tie_break in (True, False)
    }
    if messages[0].session_id not in tokens:
        raise VerificationError("session id does not match the logged size reports and config")
    proxies = [m for m in messages if m.kind == "ProxyGraph"]
    if len(proxies) != 2 or proxies[0].payload != proxies[1].payload:
        raise VerificationError("buyer and seller must receive one identical proxy each")
    try:
        expected = generate_proxy(proxy_size(config, list(reports.values())), config.proxy_p, config.seed)
    except ValidationError as err:
        raise VerificationError(f"proxy cannot be regenerated ({err})")
    proxy = ProxyGraph(**proxies[0].payload)
    if proxy.n != expected.node_count or [tuple(e) for e in proxy.edges] != list(expected.edges):
        raise VerificationError("proxy graph does not match the seeded generator")

    summaries = {party: StructuralSummary(**_only(messages, "StructuralSummary", party).payload) for party in PARTIES}
    for party in PARTIES:
        rows = summaries[party].summary
        width = max(proxy.n, reports[party].max_nodes)
        if len(rows) != reports[party].graph_count or any(len(row) != width for row in rows):
            raise VerificationError(f"{party} summary does not have shape {reports[party].graph_count}x{width}")
    try:
        disparity = broker_structural_score(
            PooledSummary(summaries["buyer"].summary), PooledSummary(summaries["seller"].summary), config.alpha
        )
    except ValidationError as err:
        raise VerificationError(f"structural summaries are unusable ({err})")
    if not (_close(disparity.gwd, report.s.gwd) and _close(disparity.s, report.s.s) and _close(config.alpha, report.s.alpha)):
        raise VerificationError(f"structural score mismatch: recomputed S {disparity.s!r}, reported {report.s.s!r}")
    epsilon = sum(summaries[party].max_residual for party in PARTIES)
    if not _close(epsilon, report.epsilon_hat_max):
        raise VerificationError(f"epsilon_hat_max mismatch: recomputed {epsilon!r}, reported {report.epsilon_hat_max!r}")

    featural_kinds = {"BuyerEigenvectors", "BuyerEigenvalues", "SellerProjectedVariances"}
    featural_messages = [m for m in messages if m.kind in featural_kinds]
    with_features = all(reports[party].feature_dim is not None for party in PARTIES)
    if not with_features:
        if featural_messages or report.featural is not None:
            raise VerificationError("featural exchange present although a party has no features")
        return report

    dim = reports["buyer"].feature_dim
    if reports["seller"].feature_dim != dim:
        raise VerificationError("parties report different feature dimensions")
    vectors = BuyerEigenvectors(**_only(messages, "BuyerEigenvectors", "buyer").payload).eigenvectors
    lam = BuyerEigenvalues(**_only(messages, "BuyerEigenvalues", "buyer").payload).eigenvalues
    lam_hat = SellerProjectedVariances(**_only(messages, "SellerProjectedVariances", "seller").payload).values
    try:
        basis = check_orthonormal(np.asarray(vectors, dtype=np.float64))
        if basis.shape[0] != dim or len(lam) != dim:
            raise ShapeError(f"buyer spectrum does not have dimension {dim}")
        featural = broker_featural_score(lam, lam_hat)
    except ValidationError as err:
        raise VerificationError(f"featural exchange is unusable ({err})")
    if report.featural is None or not (
        _close(featural.diversity, report.featural.diversity) and _close(featural.relevance, report.featural.relevance)
    ):
        raise VerificationError(f"featural score mismatch: recomputed {featural}, reported {report.featural}")
    return report
