"""Networked three-round collaboration protocol.

One master and c workers run a single-shot session over TCP. Frames are
length-prefixed JSON; the master is the star center and never forwards a
worker's raw-width data except the anchor, which is synthetic by
construction. Message bodies reuse the matrix and share records from
:mod:`dcollab.worker`, so the wire carries exactly what the in-process
pipeline computes. The full schema lives in PROTOCOL.md.
"""

import json
import socket
import struct
import time
from dataclasses import dataclass

import numpy as np

from .anchor import assemble_anchor, default_anchor_rank, local_anchor
from .dataio import one_hot
from .errors import ConfigurationError, DcollabError, FramingError, ProtocolError
from .master import (
    assemble_collab,
    compute_collab_maps,
    default_m_hat,
    fit_collab_model,
    predict_anchor,
)
from .pipeline import (
    RunConfig,
    auc,
    party_anchor_source,
    party_map_source,
    party_perm_source,
    pool_anchor_source,
)
from .worker import (
    LocalDistilledModel,
    encode_share,
    fit_local_model,
    make_map,
    matrix_from_record,
    matrix_to_record,
    predict_local,
    share_from_record,
    share_to_record,
)

MAX_FRAME_BYTES = 256 * 1024 * 1024
DEFAULT_TIMEOUT = 60.0
MASTER_ID = -1

KINDS = (
    "HELLO",
    "ANCHOR_PART",
    "ANCHOR_FULL",
    "SHARES",
    "ANCHOR_PRED",
    "ERROR",
    "BYE",
)

# Body fields each kind must carry. Matrix-valued fields are validated
# for internal length consistency before any numeric work happens.
_REQUIRED_FIELDS = {
    "HELLO": (),
    "ANCHOR_PART": ("anchor_local",),
    "ANCHOR_FULL": ("X_anc",),
    "SHARES": ("share",),
    "ANCHOR_PRED": ("Y_anc",),
    "ERROR": ("reason",),
    "BYE": (),
}
_MATRIX_FIELDS = {
    "ANCHOR_PART": ("anchor_local",),
    "ANCHOR_FULL": ("X_anc",),
    "ANCHOR_PRED": ("Y_anc",),
}

PHASES = (
    "gathering_anchor",
    "broadcasting_anchor",
    "gathering_shares",
    "returning_predictions",
    "done",
)


@dataclass(frozen=True)
class Message:
    kind: str
    session_id: str
    party_id: int
    body: dict


@dataclass(frozen=True)
class TapEvent:
    """One frame as seen by a wire tap: direction relative to the taped peer."""

    direction: str  # "send" or "recv"
    message: Message
    n_bytes: int


def _check_matrix_record(rec, where: str) -> None:
    if not isinstance(rec, dict):
        raise ProtocolError(f"{where} is not a matrix record")
    for field in ("rows", "cols", "data"):
        if field not in rec:
            raise ProtocolError(f"{where} misses field {field!r}")
    rows, cols, data = rec["rows"], rec["cols"], rec["data"]
    if not isinstance(rows, int) or not isinstance(cols, int) or not isinstance(data, list):
        raise ProtocolError(f"{where} has wrong field types")
    if rows < 0 or cols < 0 or rows * cols != len(data):
        raise ProtocolError(
            f"{where} claims {rows}x{cols} but carries {len(data)} values"
        )


def _validate(msg: Message) -> Message:
    if msg.kind not in KINDS:
        raise ProtocolError(f"unknown message kind {msg.kind!r}")
    if not isinstance(msg.session_id, str):
        raise ProtocolError("session_id must be a string")
    if not isinstance(msg.party_id, int) or isinstance(msg.party_id, bool):
        raise ProtocolError("party_id must be an integer")
    if not isinstance(msg.body, dict):
        raise ProtocolError("body must be an object")
    for field in _REQUIRED_FIELDS[msg.kind]:
        if field not in msg.body:
            raise ProtocolError(f"{msg.kind} body misses field {field!r}")
    for field in _MATRIX_FIELDS.get(msg.kind, ()):
        _check_matrix_record(msg.body[field], f"{msg.kind}.{field}")
    if msg.kind == "SHARES":
        share = msg.body["share"]
        if not isinstance(share, dict):
            raise ProtocolError("SHARES.share is not a share record")
        for field in ("party_id", "m_tilde", "X_tilde", "X_tilde_anc", "Y_prime"):
            if field not in share:
                raise ProtocolError(f"SHARES.share misses field {field!r}")
        for field in ("X_tilde", "X_tilde_anc", "Y_prime"):
            _check_matrix_record(share[field], f"SHARES.share.{field}")
    if msg.kind == "ERROR" and not isinstance(msg.body["reason"], str):
        raise ProtocolError("ERROR.reason must be a string")
    return msg


def encode_message(msg: Message) -> bytes:
    """Serialize to one wire frame: 4-byte big-endian length, then JSON."""
    _validate(msg)
    payload = json.dumps(
        {
            "kind": msg.kind,
            "session_id": msg.session_id,
            "party_id": msg.party_id,
            "body": msg.body,
        },
        separators=(",", ":"),
        allow_nan=False,
    ).encode("utf-8")
    if len(payload) > MAX_FRAME_BYTES:
        raise FramingError(
            f"payload of {len(payload)} bytes exceeds the {MAX_FRAME_BYTES} limit"
        )
    return struct.pack(">I", len(payload)) + payload


def _reject_constant(name: str):
    raise ProtocolError(f"payload contains non-finite constant {name}")


def _parse_payload(payload: bytes) -> Message:
    try:
        text = payload.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ProtocolError(f"payload is not UTF-8 at byte {exc.start}") from exc
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ProtocolError(
            f"payload is not valid JSON at position {exc.pos}: {exc.msg}"
        ) from exc
    if not isinstance(obj, dict):
        raise ProtocolError("payload is not a JSON object")
    for field in ("kind", "session_id", "party_id", "body"):
        if field not in obj:
            raise ProtocolError(f"payload misses field {field!r}")
    return _validate(
        Message(
            kind=obj["kind"],
            session_id=obj["session_id"],
            party_id=obj["party_id"],
            body=obj["body"],
        )
    )


def decode_message(frame: bytes) -> Message:
    """Inverse of encode_message on a complete frame."""
    if len(frame) < 4:
        raise FramingError("frame shorter than its 4-byte header")
    (length,) = struct.unpack(">I", frame[:4])
    if length > MAX_FRAME_BYTES:
        raise FramingError(
            f"header claims {length} bytes, above the {MAX_FRAME_BYTES} limit"
        )
    if len(frame) - 4 != length:
        raise FramingError(
            f"header claims {length} payload bytes, frame carries {len(frame) - 4}"
        )
    return _parse_payload(frame[4:])


def _read_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise FramingError(
                f"connection closed after {len(buf)} of {n} expected bytes"
            )
        buf.extend(chunk)
    return bytes(buf)


def read_message(sock: socket.socket, tap=None) -> Message:
    header = _read_exact(sock, 4)
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME_BYTES:
        raise FramingError(
            f"header claims {length} bytes, above the {MAX_FRAME_BYTES} limit"
        )
    msg = _parse_payload(_read_exact(sock, length))
    if tap is not None:
        tap(TapEvent("recv", msg, 4 + length))
    return msg


def send_message(sock: socket.socket, msg: Message, tap=None) -> None:
    frame = encode_message(msg)
    sock.sendall(frame)
    if tap is not None:
        tap(TapEvent("send", msg, len(frame)))


@dataclass(frozen=True)
class MasterSummary:
    """Master-side record of one completed session."""

    session_id: str
    parties: tuple
    anchor_rows: int
    m_hat: int
    c_mode: str
    anchor_predictions: tuple
    warnings: tuple
    wall_time: float


@dataclass(frozen=True)
class WorkerOutcome:
    """Everything a worker retains after a session.

    There is deliberately no field for the transformation map or the
    permutation: both are destroyed before the share leaves the process.
    """

    party_id: int
    model: LocalDistilledModel
    Y_anc: np.ndarray
    predictions: np.ndarray
    auc: float
    sent_kinds: tuple
    received_kinds: tuple


def _send_quietly(sock: socket.socket, msg: Message, tap=None) -> None:
    try:
        send_message(sock, msg, tap)
    except OSError:
        pass


def _reject(sock, session_id: str, reason: str, tap=None) -> None:
    _send_quietly(sock, Message("ERROR", session_id, MASTER_ID, {"reason": reason}), tap)
    sock.close()


def _abort(conns: dict, session_id: str, reason: str, tap=None) -> None:
    for sock in conns.values():
        _send_quietly(
            sock, Message("ERROR", session_id, MASTER_ID, {"reason": reason}), tap
        )


def serve_master(
    config: RunConfig,
    host: str = "127.0.0.1",
    port: int = 0,
    expected_parties=None,
    session_id: str = "dc-session",
    timeout: float = DEFAULT_TIMEOUT,
    tap=None,
    on_listening=None,
) -> MasterSummary:
    """Run the master side of one session and return its summary.

    Blocks until c distinct workers complete the three rounds or the
    timeout fires, in which case every connected worker is sent an ERROR
    and a ProtocolError is raised. Worker data is consumed strictly in
    party-id order at every barrier, so the outputs depend only on the
    payloads, never on connection timing.
    """
    if config.mode != "dc_proposed":
        raise ConfigurationError("networked sessions implement mode dc_proposed only")
    c = expected_parties if expected_parties is not None else len(config.party_sizes)
    if c < 1:
        raise ConfigurationError("expected_parties must be at least 1")
    start = time.perf_counter()
    srv = socket.create_server((host, port))
    srv.settimeout(timeout)
    if on_listening is not None:
        on_listening(srv.getsockname())
    conns: dict = {}
    try:
        # Phase: gathering_anchor. Each worker opens with HELLO then
        # ANCHOR_PART on the same connection. A connection that breaks
        # the handshake is rejected; the session keeps waiting for the
        # genuine parties until the timeout.
        locals_ = {}
        while len(conns) < c:
            sock, _addr = srv.accept()
            sock.settimeout(timeout)
            try:
                hello = read_message(sock, tap)
                if hello.kind != "HELLO":
                    _reject(sock, session_id, f"expected HELLO, got {hello.kind}", tap)
                    continue
                if hello.session_id != session_id:
                    _reject(sock, session_id, f"unknown session {hello.session_id!r}", tap)
                    continue
                pid = hello.party_id
                if not 0 <= pid < c:
                    _reject(sock, session_id, f"party_id {pid} outside [0, {c})", tap)
                    continue
                if pid in conns:
                    _reject(sock, session_id, f"duplicate party_id {pid}", tap)
                    continue
                part = read_message(sock, tap)
                if part.kind != "ANCHOR_PART" or part.party_id != pid:
                    _reject(sock, session_id,
                            "expected ANCHOR_PART from the same party", tap)
                    continue
                locals_[pid] = matrix_from_record(part.body["anchor_local"])
            except (FramingError, ProtocolError):
                sock.close()
                continue
            conns[pid] = sock
        widths = {locals_[i].shape[1] for i in range(c)}
        if len(widths) != 1:
            raise ProtocolError(f"parties disagree on feature width: {sorted(widths)}")
        aset = assemble_anchor(
            [locals_[i] for i in range(c)],
            config.r,
            pool_anchor_source(config.seeds),
            delta=config.delta,
        )
        anchor_rec = matrix_to_record(aset.X_anc)

        # Phase: broadcasting_anchor.
        for pid in sorted(conns):
            send_message(
                conns[pid],
                Message("ANCHOR_FULL", session_id, MASTER_ID, {"X_anc": anchor_rec}),
                tap,
            )

        # Phase: gathering_shares.
        shares = {}
        for pid in sorted(conns):
            msg = read_message(conns[pid], tap)
            if msg.kind != "SHARES" or msg.party_id != pid:
                raise ProtocolError(f"expected SHARES from party {pid}, got {msg.kind}")
            share = share_from_record(msg.body["share"])
            if share.party_id != pid:
                raise ProtocolError(
                    f"share from party {pid} claims party_id {share.party_id}"
                )
            shares[pid] = share
        ordered = [shares[i] for i in range(c)]
        m_hat = config.m_hat
        if m_hat is None:
            m_hat = default_m_hat([s.m_tilde for s in ordered])
        cmaps = compute_collab_maps(
            [s.X_tilde_anc for s in ordered], m_hat, config.c_mode
        )
        X_hat, Y_prime = assemble_collab(ordered, cmaps)
        model = fit_collab_model(X_hat, Y_prime, config.lambda_collab, cmaps)
        anchor_preds = predict_anchor(model, ordered)

        # Phase: returning_predictions.
        for pid in sorted(conns):
            send_message(
                conns[pid],
                Message(
                    "ANCHOR_PRED",
                    session_id,
                    MASTER_ID,
                    {"Y_anc": matrix_to_record(anchor_preds[pid])},
                ),
                tap,
            )
        for pid in sorted(conns):
            try:
                read_message(conns[pid], tap)  # worker's BYE; EOF tolerated
            except (FramingError, OSError):
                pass
        return MasterSummary(
            session_id=session_id,
            parties=tuple(range(c)),
            anchor_rows=aset.X_anc.shape[0],
            m_hat=m_hat,
            c_mode=config.c_mode,
            anchor_predictions=tuple(anchor_preds),
            warnings=cmaps.warnings,
            wall_time=time.perf_counter() - start,
        )
    except TimeoutError as exc:
        _abort(conns, session_id, "session timed out", tap)
        raise ProtocolError("session timed out waiting for parties") from exc
    except DcollabError:
        _abort(conns, session_id, "session aborted", tap)
        raise
    finally:
        for sock in conns.values():
            sock.close()
        srv.close()


def _expect(msg: Message, kind: str, session_id: str) -> Message:
    if msg.kind == "ERROR":
        raise ProtocolError(f"master aborted: {msg.body['reason']}")
    if msg.kind != kind:
        raise ProtocolError(f"expected {kind}, got {msg.kind}")
    if msg.session_id != session_id:
        raise ProtocolError(f"session mismatch: {msg.session_id!r}")
    return msg


def run_worker(
    config: RunConfig,
    host: str,
    port: int,
    party_index: int,
    X_i,
    Y_i,
    X_test=None,
    y_test=None,
    session_id: str = "dc-session",
    timeout: float = DEFAULT_TIMEOUT,
    tap=None,
) -> WorkerOutcome:
    """Run one worker through a session against a listening master.

    Sends HELLO plus the local anchor part in one round, uploads the
    encoded share (the map is destroyed before the upload starts), and
    distills a local model from the returned anchor predictions. When
    test data is supplied the outcome carries predictions and, with
    labels, an AUC.
    """
    if config.mode != "dc_proposed":
        raise ConfigurationError("networked sessions implement mode dc_proposed only")
    if config.m_tilde is None:
        raise ConfigurationError("networked sessions need an explicit m_tilde")
    X_i = np.asarray(X_i, dtype=np.float64)
    labels = np.asarray(Y_i)
    if labels.ndim == 2:
        labels = labels[:, 0]
    Y_oh = one_hot(labels.astype(int), 2)
    n, m = X_i.shape
    rank = config.anchor_rank
    if rank is None:
        rank = default_anchor_rank(n, m)
    A_i = local_anchor(
        X_i, rank, config.delta, party_anchor_source(config.seeds, party_index)
    )
    sent, received = [], []

    def _send(sock, msg):
        send_message(sock, msg, tap)
        sent.append(msg.kind)

    def _recv(sock):
        msg = read_message(sock, tap)
        received.append(msg.kind)
        return msg

    with socket.create_connection((host, port), timeout=timeout) as sock:
        # Round 1: handshake and anchor part go up together.
        _send(sock, Message("HELLO", session_id, party_index, {}))
        _send(
            sock,
            Message(
                "ANCHOR_PART",
                session_id,
                party_index,
                {"anchor_local": matrix_to_record(A_i)},
            ),
        )
        full = _expect(_recv(sock), "ANCHOR_FULL", session_id)
        X_anc = matrix_from_record(full.body["X_anc"])

        # Round 2: the share leaves only after the map is destroyed.
        wm = make_map(
            X_i,
            config.m_tilde,
            "proposed_randomized",
            party_map_source(config.seeds, party_index),
        )
        share = encode_share(
            wm,
            party_index,
            X_i,
            Y_oh,
            X_anc,
            party_perm_source(config.seeds, party_index),
            permute=config.permute,
        )
        _send(
            sock,
            Message(
                "SHARES", session_id, party_index, {"share": share_to_record(share)}
            ),
        )

        # Round 3: anchor predictions come back; close politely.
        pred = _expect(_recv(sock), "ANCHOR_PRED", session_id)
        Y_anc = matrix_from_record(pred.body["Y_anc"])
        _send(sock, Message("BYE", session_id, party_index, {}))

    t_i = fit_local_model(X_anc, Y_anc, config.lambda_local, party_id=party_index)
    predictions = None
    auc_value = None
    if X_test is not None:
        predictions = predict_local(t_i, np.asarray(X_test, dtype=np.float64))
        if y_test is not None:
            auc_value = auc(predictions[:, 1], np.asarray(y_test))
    return WorkerOutcome(
        party_id=party_index,
        model=t_i,
        Y_anc=Y_anc,
        predictions=predictions,
        auc=auc_value,
        sent_kinds=tuple(sent),
        received_kinds=tuple(received),
    )
