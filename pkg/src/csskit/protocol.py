"""Line-delimited skill interface over TCP and in-process transports.

Wire format: one UTF-8 JSON object per LF-terminated line with the fields
``kind``, ``correlationId``, ``payload`` and (events only) ``seq``. Every
request receives exactly one ``result`` or ``error`` with the request's
correlationId. Connections handshake with ``hello`` (protocol version
"css/1"); state-change events flow only after a ``subscribe`` request and
carry a per-connection strictly increasing ``seq``.

Both transports share the same server session logic, so a scripted request
sequence produces identical result payloads in-process and over TCP.
"""

from __future__ import annotations

import itertools
import queue
import socket
import threading
from dataclasses import dataclass, field

from . import jsonio
from .errors import (
    BindFailureError,
    ConnectionLostError,
    CssError,
    ParseError,
    RemoteError,
    TimeoutError,
)
from .skills import SkillEvent, SkillHost

PROTOCOL_VERSION = "css/1"
DEFAULT_PORT = 7007
DEFAULT_TIMEOUT = 5.0

REQUEST_KINDS = (
    "hello", "list_skills", "describe", "read", "write", "command",
    "feasibility", "subscribe",
)
SERVER_KINDS = ("result", "error", "event")
MESSAGE_KINDS = REQUEST_KINDS + SERVER_KINDS


@dataclass(frozen=True)
class Message:
    kind: str
    correlation_id: str = ""
    payload: dict = field(default_factory=dict)
    seq: int | None = None


def encode(msg: Message) -> str:
    """One message as a single JSON line (without the trailing LF)."""
    obj = {
        "kind": msg.kind,
        "correlationId": msg.correlation_id,
        "payload": msg.payload,
    }
    if msg.seq is not None:
        obj["seq"] = msg.seq
    return jsonio.dumps(obj)


def decode(line: str) -> Message:
    data = jsonio.loads(line)
    if not isinstance(data, dict):
        raise ParseError("message line must be a single object")
    unknown = sorted(set(data) - {"kind", "correlationId", "payload", "seq"})
    if unknown:
        raise ParseError(f"unknown message fields {unknown}")
    kind = data.get("kind")
    if not isinstance(kind, str) or kind not in MESSAGE_KINDS:
        raise ParseError("message kind is missing or unknown")
    correlation_id = data.get("correlationId", "")
    if not isinstance(correlation_id, str):
        raise ParseError("correlationId must be a string")
    payload = data.get("payload", {})
    if not isinstance(payload, dict):
        raise ParseError("payload must be an object")
    seq = data.get("seq")
    if seq is not None and not isinstance(seq, int):
        raise ParseError("seq must be an integer")
    return Message(kind=kind, correlation_id=correlation_id, payload=payload, seq=seq)


# ---------------------------------------------------------------------------
# server side
# ---------------------------------------------------------------------------

class _BadRequest(CssError):
    code = "BadRequest"


class _HelloRequired(CssError):
    code = "HelloRequired"


class _UnsupportedVersion(CssError):
    code = "UnsupportedVersion"


class ServerSession:
    """Per-connection request dispatch plus subscription event fan-out.

    Events raised while a request is being handled are buffered and flushed
    right after the response line, keeping per-connection output ordered.
    """

    def __init__(self, host: SkillHost, server_name: str, send_line):
        self.host = host
        self.server_name = server_name
        self._send_line = send_line
        self._lock = threading.Lock()
        self._subscriptions: set[str] = set()
        self._seq = itertools.count(1)
        self._handling = False
        self._event_buffer: list[str] = []
        self._hello_done = False
        host.add_listener(self._on_event)

    def close(self) -> None:
        self.host.remove_listener(self._on_event)

    def _on_event(self, event: SkillEvent) -> None:
        with self._lock:
            if event.local_runtime_id not in self._subscriptions:
                return
            line = encode(
                Message(
                    kind="event",
                    correlation_id="",
                    payload={
                        "localRuntimeId": event.local_runtime_id,
                        "previousState": event.previous_state,
                        "newState": event.new_state,
                        "instanceSeq": event.seq,
                    },
                    seq=next(self._seq),
                )
            )
            if self._handling:
                self._event_buffer.append(line)
            else:
                self._safe_send(line)

    def _safe_send(self, line: str) -> None:
        try:
            self._send_line(line)
        except OSError:
            pass  # connection went away; reader side will clean up

    def handle_line(self, line: str) -> None:
        with self._lock:
            self._handling = True
        try:
            response = self._respond(line)
        finally:
            with self._lock:
                self._safe_send(encode(response))
                for buffered in self._event_buffer:
                    self._safe_send(buffered)
                self._event_buffer.clear()
                self._handling = False

    def _respond(self, line: str) -> Message:
        try:
            request = decode(line)
        except ParseError as exc:
            return Message(
                kind="error",
                correlation_id="",
                payload={"code": exc.code, "message": exc.message},
            )
        try:
            if request.kind not in REQUEST_KINDS:
                raise _BadRequest(f"{request.kind} is not a request kind")
            payload = self._dispatch(request)
            return Message("result", request.correlation_id, payload)
        except CssError as exc:
            return Message(
                kind="error",
                correlation_id=request.correlation_id,
                payload={"code": exc.code, "message": exc.message},
            )
        except Exception as exc:  # noqa: BLE001 - survive behavior bugs
            return Message(
                kind="error",
                correlation_id=request.correlation_id,
                payload={"code": "InternalError", "message": str(exc)},
            )

    def _dispatch(self, request: Message) -> dict:
        if request.kind == "hello":
            version = request.payload.get("version", PROTOCOL_VERSION)
            if version != PROTOCOL_VERSION:
                raise _UnsupportedVersion(f"server speaks {PROTOCOL_VERSION}")
            self._hello_done = True
            return {"serverName": self.server_name, "version": PROTOCOL_VERSION}
        if not self._hello_done:
            raise _HelloRequired("send hello before other requests")

        if request.kind == "list_skills":
            skills = []
            for local_runtime_id in self.host.local_runtime_ids():
                snapshot = self.host.read_skill(local_runtime_id)
                skills.append(
                    {
                        "localRuntimeId": local_runtime_id,
                        "skillId": snapshot.descriptor.skill_id,
                        "name": snapshot.descriptor.name,
                        "state": snapshot.state,
                    }
                )
            return {"skills": skills}

        local_runtime_id = self._require_str(request, "localRuntimeId")
        if request.kind == "describe":
            descriptor = self.host.read_skill(local_runtime_id).descriptor
            return {
                "localRuntimeId": local_runtime_id,
                "skillId": descriptor.skill_id,
                "name": descriptor.name,
                "capabilityRef": descriptor.capability_ref,
                "parameters": [
                    {
                        "paramId": spec.param_id,
                        "direction": spec.direction,
                        "datatype": spec.datatype,
                        "unit": spec.unit,
                        "default": spec.default,
                    }
                    for spec in descriptor.parameters
                ],
                "hasFeasibilityCheck": descriptor.has_feasibility_check,
                "hasPreconditionCheck": descriptor.has_precondition_check,
                "stateMachineProfile": descriptor.state_machine_profile,
            }
        if request.kind == "read":
            snapshot = self.host.read_skill(local_runtime_id)
            return {
                "localRuntimeId": local_runtime_id,
                "state": snapshot.state,
                "inputValues": snapshot.input_values,
                "outputValues": snapshot.output_values,
                "lastError": snapshot.last_error,
            }
        if request.kind == "write":
            values = request.payload.get("values")
            if not isinstance(values, dict):
                raise _BadRequest("write requires an object field 'values'")
            written = self.host.write_parameters(local_runtime_id, values)
            return {"written": list(written)}
        if request.kind == "command":
            command = self._require_str(request, "command")
            new_state = self.host.fire_command(local_runtime_id, command)
            return {"localRuntimeId": local_runtime_id, "newState": new_state}
        if request.kind == "feasibility":
            inputs = request.payload.get("inputs", {})
            if not isinstance(inputs, dict):
                raise _BadRequest("feasibility requires an object field 'inputs'")
            result = self.host.check_feasibility(local_runtime_id, inputs)
            return {
                "feasible": result.feasible,
                "reason": result.reason,
                "estimates": dict(result.estimates),
            }
        if request.kind == "subscribe":
            enable = request.payload.get("enable", True)
            if not isinstance(enable, bool):
                raise _BadRequest("subscribe field 'enable' must be a boolean")
            self.host.read_skill(local_runtime_id)  # UnknownSkill check
            with self._lock:
                if enable:
                    self._subscriptions.add(local_runtime_id)
                else:
                    self._subscriptions.discard(local_runtime_id)
            return {"localRuntimeId": local_runtime_id, "subscribed": enable}
        raise _BadRequest(f"unhandled request kind {request.kind}")

    @staticmethod
    def _require_str(request: Message, key: str) -> str:
        value = request.payload.get(key)
        if not isinstance(value, str) or not value:
            raise _BadRequest(f"{request.kind} requires a string field {key!r}")
        return value


class ProtocolServer:
    """TCP server handle; one thread per connection, sessions independent."""

    def __init__(self, host: SkillHost, endpoint=None, server_name: str | None = None):
        address = _as_address(endpoint)
        self.host = host
        self.server_name = server_name or host.name
        try:
            self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            self._sock.bind(address)
            self._sock.listen()
        except OSError as exc:
            raise BindFailureError(f"cannot bind {address}: {exc}") from exc
        self.address = self._sock.getsockname()
        self.port = self.address[1]
        self._closing = False
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name=f"css-accept-{self.port}", daemon=True
        )
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while not self._closing:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            threading.Thread(
                target=self._serve_connection, args=(conn,), daemon=True
            ).start()

    def _serve_connection(self, conn: socket.socket) -> None:
        send_lock = threading.Lock()

        def send_line(line: str) -> None:
            with send_lock:
                conn.sendall((line + "\n").encode("utf-8"))

        session = ServerSession(self.host, self.server_name, send_line)
        try:
            reader = conn.makefile("r", encoding="utf-8", newline="\n")
            for line in reader:
                session.handle_line(line.rstrip("\n"))
        except (OSError, ValueError):
            pass
        finally:
            session.close()
            try:
                conn.close()
            except OSError:
                pass

    def close(self) -> None:
        self._closing = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)  # wakes the blocked accept
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass
        self._accept_thread.join(timeout=2.0)


def serve(host: SkillHost, endpoint=None, server_name: str | None = None) -> ProtocolServer:
    """Bind and start serving a skill host; returns the running server handle."""
    return ProtocolServer(host, endpoint, server_name)


def _as_address(endpoint) -> tuple[str, int]:
    if endpoint is None:
        return ("127.0.0.1", DEFAULT_PORT)
    if isinstance(endpoint, int):
        return ("127.0.0.1", endpoint)
    if isinstance(endpoint, str):
        host_part, _, port_part = endpoint.rpartition(":")
        return (host_part or "127.0.0.1", int(port_part))
    return (endpoint[0], int(endpoint[1]))


# ---------------------------------------------------------------------------
# client side
# ---------------------------------------------------------------------------

class SkillClient:
    """Protocol client with blocking request/response and an event queue.

    Works identically over the in-process loopback and TCP transports.
    """

    def __init__(self, send_line, on_close=None, name: str = "client"):
        self.name = name
        self._send_line = send_line
        self._on_close = on_close
        self._corr = itertools.count(1)
        self._pending: dict[str, queue.Queue] = {}
        self._events: queue.Queue = queue.Queue()
        self._stray: queue.Queue = queue.Queue()
        self._lock = threading.Lock()
        self._closed = False

    # -- plumbing ---------------------------------------------------------

    def feed_line(self, line: str) -> None:
        """Deliver one raw line from the transport."""
        try:
            msg = decode(line)
        except ParseError:
            return
        if msg.kind == "event":
            self._events.put(msg)
            return
        if msg.kind in ("result", "error"):
            with self._lock:
                waiter = self._pending.pop(msg.correlation_id, None)
            if waiter is not None:
                waiter.put(msg)
            else:
                self._stray.put(msg)

    def send_raw(self, line: str) -> None:
        """Ship an arbitrary line (for protocol-level tests)."""
        self._send_line(line)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        if self._on_close is not None:
            self._on_close()

    # -- requests ----------------------------------------------------------

    def invoke(self, kind: str, payload: dict | None = None,
               timeout: float = DEFAULT_TIMEOUT) -> dict:
        correlation_id = f"c-{next(self._corr):06d}"
        waiter: queue.Queue = queue.Queue()
        with self._lock:
            self._pending[correlation_id] = waiter
        try:
            self._send_line(encode(Message(kind, correlation_id, payload or {})))
        except OSError as exc:
            with self._lock:
                self._pending.pop(correlation_id, None)
            raise ConnectionLostError(str(exc)) from exc
        try:
            msg = waiter.get(timeout=timeout)
        except queue.Empty:
            with self._lock:
                self._pending.pop(correlation_id, None)
            raise TimeoutError(
                f"no response to {kind} within {timeout} s"
            ) from None
        if msg.kind == "error":
            raise RemoteError(
                str(msg.payload.get("code", "Error")),
                str(msg.payload.get("message", "")),
            )
        return msg.payload

    def next_event(self, timeout: float = DEFAULT_TIMEOUT) -> Message:
        try:
            return self._events.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError(f"no event within {timeout} s") from None

    def next_stray(self, timeout: float = DEFAULT_TIMEOUT) -> Message:
        """Next response that matched no pending request (e.g. ParseError)."""
        try:
            return self._stray.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError(f"no unmatched response within {timeout} s") from None

    # -- conveniences -------------------------------------------------------

    def hello(self, timeout: float = DEFAULT_TIMEOUT) -> dict:
        return self.invoke(
            "hello", {"clientName": self.name, "version": PROTOCOL_VERSION}, timeout
        )

    def list_skills(self, **kw) -> list[dict]:
        return self.invoke("list_skills", {}, **kw)["skills"]

    def describe(self, local_runtime_id: str, **kw) -> dict:
        return self.invoke("describe", {"localRuntimeId": local_runtime_id}, **kw)

    def read(self, local_runtime_id: str, **kw) -> dict:
        return self.invoke("read", {"localRuntimeId": local_runtime_id}, **kw)

    def write(self, local_runtime_id: str, values: dict, **kw) -> dict:
        return self.invoke(
            "write", {"localRuntimeId": local_runtime_id, "values": values}, **kw
        )

    def command(self, local_runtime_id: str, command: str, **kw) -> dict:
        return self.invoke(
            "command", {"localRuntimeId": local_runtime_id, "command": command}, **kw
        )

    def feasibility(self, local_runtime_id: str, inputs: dict, **kw) -> dict:
        return self.invoke(
            "feasibility", {"localRuntimeId": local_runtime_id, "inputs": inputs}, **kw
        )

    def subscribe(self, local_runtime_id: str, enable: bool = True, **kw) -> dict:
        return self.invoke(
            "subscribe",
            {"localRuntimeId": local_runtime_id, "enable": enable},
            **kw,
        )


def connect_loopback(host: SkillHost, server_name: str | None = None,
                     client_name: str = "loopback-client") -> SkillClient:
    """In-process transport: requests dispatch synchronously on the caller."""
    client_ref: list[SkillClient] = []

    def deliver_to_client(line: str) -> None:
        client_ref[0].feed_line(line)

    session = ServerSession(host, server_name or host.name, deliver_to_client)
    client = SkillClient(
        send_line=session.handle_line,
        on_close=session.close,
        name=client_name,
    )
    client_ref.append(client)
    return client


def connect_tcp(address, client_name: str = "tcp-client",
                connect_timeout: float = DEFAULT_TIMEOUT) -> SkillClient:
    """TCP transport with a background reader thread."""
    addr = _as_address(address)
    try:
        sock = socket.create_connection(addr, timeout=connect_timeout)
    except OSError as exc:
        raise ConnectionLostError(f"cannot connect to {addr}: {exc}") from exc
    sock.settimeout(None)
    send_lock = threading.Lock()

    def send_line(line: str) -> None:
        with send_lock:
            sock.sendall((line + "\n").encode("utf-8"))

    def on_close() -> None:
        try:
            sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        sock.close()

    client = SkillClient(send_line=send_line, on_close=on_close, name=client_name)

    def reader() -> None:
        try:
            stream = sock.makefile("r", encoding="utf-8", newline="\n")
            for line in stream:
                client.feed_line(line.rstrip("\n"))
        except (OSError, ValueError):
            pass

    threading.Thread(target=reader, name=f"css-reader-{addr[1]}", daemon=True).start()
    return client
