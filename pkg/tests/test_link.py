"""Wire codec, framing, transports, and supervision accounting."""

import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neuroedge.errors import MalformedMessage
from neuroedge.link import (
    ControlSignal,
    InprocTransport,
    LinkStats,
    StateReport,
    SupervisionRequest,
    TcpTransport,
    decode_message,
    encode_message,
    frame,
    read_frame,
    supervision_count,
)
from neuroedge.snn import LearningConfig

finite_floats = st.floats(
    allow_nan=False, allow_infinity=False, min_value=-1e12, max_value=1e12
)


class TestCodec:
    def test_control_signal_schema(self):
        raw = encode_message(ControlSignal(step=0, u=(-3.6071,)))
        assert raw == b'{"kind":"control","step":0,"data":[-3.6071]}'

    def test_request_schema(self):
        raw = encode_message(SupervisionRequest(step=50))
        assert raw == b'{"kind":"request","step":50,"data":[]}'

    def test_state_report_schema(self):
        raw = encode_message(StateReport(step=3, x=(1.0, -2.5)))
        payload = json.loads(raw)
        assert payload == {"kind": "state", "step": 3, "data": [1.0, -2.5]}

    @pytest.mark.parametrize(
        "msg",
        [
            SupervisionRequest(step=0),
            ControlSignal(step=7, u=(0.1, -0.2, 3.0)),
            StateReport(step=999, x=(5.0, 2.0)),
        ],
    )
    def test_round_trip(self, msg):
        assert decode_message(encode_message(msg)) == msg

    @given(
        step=st.integers(0, 10**9),
        data=st.lists(finite_floats, min_size=1, max_size=8),
    )
    @settings(max_examples=100, deadline=None)
    def test_round_trip_exact_floats(self, step, data):
        msg = ControlSignal(step=step, u=tuple(data))
        decoded = decode_message(encode_message(msg))
        assert decoded.step == step
        # bitwise equality: the wire format must not lose precision
        assert all(a == b for a, b in zip(decoded.u, data))

    def test_unknown_kind_rejected(self):
        with pytest.raises(MalformedMessage):
            decode_message(b'{"kind":"xyz","step":0,"data":[]}')

    def test_bad_json_rejected(self):
        with pytest.raises(MalformedMessage):
            decode_message(b"{nope")

    def test_wrong_arity_rejected(self):
        with pytest.raises(MalformedMessage):
            decode_message(b'{"kind":"request","step":0,"data":[1.0]}')
        with pytest.raises(MalformedMessage):
            decode_message(b'{"kind":"control","step":0,"data":[]}')

    def test_extra_fields_rejected(self):
        with pytest.raises(MalformedMessage):
            decode_message(b'{"kind":"control","step":0,"data":[1],"x":2}')

    def test_non_finite_rejected(self):
        with pytest.raises(MalformedMessage):
            encode_message(ControlSignal(step=0, u=(float("nan"),)))
        with pytest.raises(MalformedMessage):
            decode_message(b'{"kind":"control","step":0,"data":[Infinity]}')


class TestFraming:
    def test_frame_layout(self):
        raw = b"hello"
        framed = frame(raw)
        assert framed[:4] == struct.pack(">I", 5)
        assert framed[4:] == raw

    def test_read_frame_round_trip(self):
        framed = frame(encode_message(SupervisionRequest(step=1)))
        buf = {"data": framed, "pos": 0}

        def recv(n):
            chunk = buf["data"][buf["pos"] : buf["pos"] + n]
            buf["pos"] += n
            return chunk

        assert read_frame(recv) == encode_message(SupervisionRequest(step=1))

    def test_truncated_frame_rejected(self):
        framed = frame(b"payload")[:-3]
        buf = {"data": framed, "pos": 0}

        def recv(n):
            chunk = buf["data"][buf["pos"] : buf["pos"] + n]
            buf["pos"] += n
            return chunk

        with pytest.raises(MalformedMessage):
            read_frame(recv)


class EchoControlService:
    """Replies to each StateReport with u = -x (stand-in cloud)."""

    def handle(self, msg):
        if isinstance(msg, SupervisionRequest):
            return None
        return ControlSignal(step=msg.step, u=tuple(-v for v in msg.x))


class TestTransports:
    def test_inproc_exchange_and_stats(self):
        transport = InprocTransport(EchoControlService())
        reply = transport.exchange(
            [SupervisionRequest(step=0), StateReport(step=0, x=(1.0, -2.0))]
        )
        assert reply == ControlSignal(step=0, u=(-1.0, 2.0))
        assert transport.stats.messages_sent["request"] == 1
        assert transport.stats.messages_sent["state"] == 1
        assert transport.stats.messages_sent["control"] == 1
        assert transport.stats.payload_bytes > 0

    def test_tcp_exchange_matches_inproc(self):
        port, stop = TcpTransport.serve(EchoControlService())
        transport = TcpTransport("127.0.0.1", port)
        try:
            replies = []
            for step in range(5):
                reply = transport.exchange(
                    [
                        SupervisionRequest(step=step),
                        StateReport(step=step, x=(0.5 * step, -1.25 * step)),
                    ]
                )
                replies.append(reply)
        finally:
            transport.close()
            stop()
        inproc = InprocTransport(EchoControlService())
        expected = [
            inproc.exchange(
                [
                    SupervisionRequest(step=step),
                    StateReport(step=step, x=(0.5 * step, -1.25 * step)),
                ]
            )
            for step in range(5)
        ]
        assert replies == expected
        # in-order delivery with strictly increasing steps
        assert [r.step for r in replies] == sorted(r.step for r in replies)


class TestSupervisionCount:
    def cfg(self, warmup=50, interval=50):
        return LearningConfig(
            error_threshold=np.array([0.1]),
            warmup_steps=warmup,
            check_interval=interval,
        )

    def test_thousand_steps_no_relearn(self):
        assert supervision_count(1000, self.cfg(), []) == 69

    def test_warmup_only(self):
        assert supervision_count(50, self.cfg(), []) == 50

    def test_always_less_than_streaming(self):
        for total in (100, 500, 1000, 3600):
            count = supervision_count(total, self.cfg(), [])
            assert count < total

    def test_relearn_window_counts_each_step(self):
        # window [51, 101): 50 steps; the check at 100 is inside the window
        count = supervision_count(200, self.cfg(), [(51, 101)])
        warmup, checks_outside = 50, len([50, 150])
        assert count == warmup + checks_outside + 50

    def test_window_clamped_to_run_length(self):
        count = supervision_count(100, self.cfg(), [(51, 400)])
        assert count == 50 + 1 + 49  # warmup + check at 50 + relearn 51..99
