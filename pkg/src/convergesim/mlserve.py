"""Request/response surface of the streaming-ML service.

The service registers named model pipelines (running scaler + incremental
regressor), trains them one sample at a time, answers predictions, and
keeps a caller-populated held-out buffer for the running R-squared. It
can be driven in-process (the simulation mounts it directly) or over a
local stream socket (demo mode); both mounts speak the same line
protocol, so a request sequence yields identical response bodies either
way.

Wire grammar, one record per line:

  request  := verb [key=value]*
  verb     := create | train | predict | record_truth | metrics | stats
              | list_models
  response := status [key=value]*
  status   := ok | not_found | bad_request

Feature values are keyed as ``x:<name>=<float>``. Floats are rendered as
shortest round-trip decimal text (Python ``repr``), booleans as
``true``/``false``, missing values as ``null``, lists as comma-joined
items. Model names are restricted to [A-Za-z0-9_.-]+ so no quoting is
needed anywhere.

Every mutating verb bumps the model's sequence counter and echoes it, so
a response trace makes interleaved partial updates detectable: train is
atomic per model.
"""

import re
import socket
import socketserver
from dataclasses import dataclass, field

from . import mlcore

NAME_RE = re.compile(r"^[A-Za-z0-9_.-]+$")

VERBS = ("create", "train", "predict", "record_truth", "metrics", "stats", "list_models")


@dataclass(frozen=True)
class ServiceRequest:
    verb: str
    name: str | None = None
    model_type: str | None = None
    features: dict | None = None
    y: float | None = None
    y_true: float | None = None
    y_pred: float | None = None


@dataclass(frozen=True)
class ServiceResponse:
    status: str  # ok | not_found | bad_request
    body: tuple[tuple[str, object], ...] = ()

    def get(self, key, default=None):
        for k, v in self.body:
            if k == key:
                return v
        return default


def _ok(**kv) -> ServiceResponse:
    return ServiceResponse("ok", tuple(kv.items()))


def _not_found(error: str) -> ServiceResponse:
    return ServiceResponse("not_found", (("error", error),))


def _bad_request(error: str) -> ServiceResponse:
    return ServiceResponse("bad_request", (("error", error),))


@dataclass
class _ModelEntry:
    model_type: str
    scaler: mlcore.RunningScaler
    model: object
    truths: list[tuple[float, float]] = field(default_factory=list)
    seq: int = 0


class MLService:
    """In-process mount: model registry plus the verb dispatcher."""

    def __init__(self, model_defaults: dict | None = None):
        self._models: dict[str, _ModelEntry] = {}
        self._model_defaults = model_defaults or {}

    def model_names(self) -> list[str]:
        return list(self._models)

    def entry(self, name: str) -> _ModelEntry:
        return self._models[name]

    def handle(self, req: ServiceRequest) -> ServiceResponse:
        if req.verb == "create":
            return self._create(req)
        if req.verb == "list_models":
            return _ok(models=list(self._models))
        if req.verb in ("train", "predict", "record_truth", "metrics", "stats"):
            if req.name is None:
                return _bad_request("missing_name")
            entry = self._models.get(req.name)
            if entry is None:
                return _not_found("unknown_model")
            return getattr(self, f"_{req.verb}")(entry, req)
        return _bad_request("unknown_verb")

    def _create(self, req: ServiceRequest) -> ServiceResponse:
        if req.name is None or not NAME_RE.match(req.name):
            return _bad_request("bad_name")
        if req.name in self._models:
            return _bad_request("duplicate_model")
        if req.model_type not in mlcore.MODEL_VARIANTS:
            return _bad_request("unknown_model_type")
        kwargs = self._model_defaults.get(req.model_type, {})
        self._models[req.name] = _ModelEntry(
            model_type=req.model_type,
            scaler=mlcore.RunningScaler(),
            model=mlcore.make_model(req.model_type, **kwargs),
        )
        return _ok(name=req.name, model_type=req.model_type)

    def _train(self, entry: _ModelEntry, req: ServiceRequest) -> ServiceResponse:
        if not req.features or req.y is None:
            return _bad_request("missing_training_sample")
        try:
            scaled = entry.scaler.learn_transform(req.features)
            entry.model.learn(scaled, req.y)
        except (mlcore.DimensionMismatchError, ValueError) as err:
            return _bad_request(type(err).__name__)
        entry.seq += 1
        return _ok(samples_seen=entry.model.samples_seen, seq=entry.seq)

    def _predict(self, entry: _ModelEntry, req: ServiceRequest) -> ServiceResponse:
        if not req.features:
            return _bad_request("missing_features")
        try:
            # the scaler is frozen here: test-phase features must not leak
            # into the training statistics
            scaled = entry.scaler.transform(req.features)
            value = entry.model.predict(scaled)
        except (mlcore.DimensionMismatchError, ValueError) as err:
            return _bad_request(type(err).__name__)
        return _ok(prediction=value, cold=entry.model.cold,
                   samples_seen=entry.model.samples_seen)

    def _record_truth(self, entry: _ModelEntry, req: ServiceRequest) -> ServiceResponse:
        if req.y_true is None or req.y_pred is None:
            return _bad_request("missing_pair")
        entry.truths.append((req.y_true, req.y_pred))
        entry.seq += 1
        return _ok(pairs=len(entry.truths), seq=entry.seq)

    def _metrics(self, entry: _ModelEntry, req: ServiceRequest) -> ServiceResponse:
        if len(entry.truths) < 2:
            return _ok(r_squared=None, pairs=len(entry.truths))
        return _ok(r_squared=mlcore.r_squared(entry.truths), pairs=len(entry.truths))

    def _stats(self, entry: _ModelEntry, req: ServiceRequest) -> ServiceResponse:
        return _ok(
            model_type=entry.model_type,
            samples_seen=entry.model.samples_seen,
            seq=entry.seq,
            features=list(entry.model.feature_names or ()),
        )


# --- line protocol ----------------------------------------------------------

def _render_value(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def _parse_scalar(text: str):
    if text == "null":
        return None
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


class ProtocolError(Exception):
    pass


def format_request(req: ServiceRequest) -> str:
    parts = [req.verb]
    if req.name is not None:
        parts.append(f"name={req.name}")
    if req.model_type is not None:
        parts.append(f"type={req.model_type}")
    for key in sorted(req.features or {}):
        parts.append(f"x:{key}={_render_value(float(req.features[key]))}")
    for attr in ("y", "y_true", "y_pred"):
        value = getattr(req, attr)
        if value is not None:
            parts.append(f"{attr}={_render_value(float(value))}")
    return " ".join(parts)


def parse_request(line: str) -> ServiceRequest:
    tokens = line.strip().split()
    if not tokens:
        raise ProtocolError("empty request line")
    verb, fields = tokens[0], {}
    features: dict = {}
    for token in tokens[1:]:
        if "=" not in token:
            raise ProtocolError(f"malformed token {token!r}")
        key, raw = token.split("=", 1)
        if key.startswith("x:"):
            features[key[2:]] = float(raw)
        else:
            fields[key] = raw
    def fnum(key):
        return float(fields[key]) if key in fields else None
    return ServiceRequest(
        verb=verb,
        name=fields.get("name"),
        model_type=fields.get("type"),
        features=features or None,
        y=fnum("y"),
        y_true=fnum("y_true"),
        y_pred=fnum("y_pred"),
    )


def format_response(resp: ServiceResponse) -> str:
    parts = [resp.status]
    parts.extend(f"{key}={_render_value(value)}" for key, value in resp.body)
    return " ".join(parts)


def parse_response(line: str) -> ServiceResponse:
    tokens = line.strip().split()
    if not tokens:
        raise ProtocolError("empty response line")
    body = []
    for token in tokens[1:]:
        key, raw = token.split("=", 1)
        if key == "models":
            body.append((key, raw.split(",") if raw else []))
        else:
            body.append((key, _parse_scalar(raw)))
    return ServiceResponse(tokens[0], tuple(body))


def handle_line(service: MLService, line: str) -> str:
    try:
        req = parse_request(line)
    except (ProtocolError, ValueError):
        return format_response(_bad_request("malformed_request"))
    return format_response(service.handle(req))


# --- socket mount (demo mode) ----------------------------------------------

class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self):
        for raw in self.rfile:
            line = raw.decode("utf-8").strip()
            if not line:
                continue
            reply = handle_line(self.server.service, line)
            self.wfile.write((reply + "\n").encode("utf-8"))


class ServiceServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], service: MLService):
        super().__init__(address, _LineHandler)
        self.service = service


class UnixServiceServer(socketserver.ThreadingUnixStreamServer):
    daemon_threads = True

    def __init__(self, path: str, service: MLService):
        super().__init__(path, _LineHandler)
        self.service = service


def serve_tcp(host: str, port: int, service: MLService | None = None) -> ServiceServer:
    """Bind the TCP mount; the caller runs serve_forever (or a thread)."""
    return ServiceServer((host, port), service or MLService())


def serve_unix(path: str, service: MLService | None = None) -> UnixServiceServer:
    """Bind the unix-domain mount at a filesystem path."""
    return UnixServiceServer(path, service or MLService())


class ServiceClient:
    """Line-oriented client for either socket mount."""

    def __init__(self, host: str | None = None, port: int | None = None,
                 path: str | None = None):
        if path is not None:
            self._sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            self._sock.connect(path)
        else:
            self._sock = socket.create_connection((host, port))
        self._file = self._sock.makefile("rwb")

    def call_line(self, line: str) -> str:
        self._file.write((line + "\n").encode("utf-8"))
        self._file.flush()
        reply = self._file.readline()
        if not reply:
            raise ConnectionError("service closed the connection")
        return reply.decode("utf-8").strip()

    def call(self, req: ServiceRequest) -> ServiceResponse:
        return parse_response(self.call_line(format_request(req)))

    def close(self):
        self._file.close()
        self._sock.close()
