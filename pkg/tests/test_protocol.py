import io

import pytest
from hypothesis import given, strategies as st

from minirel.protocol import (
    MAX_PAYLOAD,
    ConnectionClosed,
    CountResult,
    ErrorResult,
    FrameTooLarge,
    RowsResult,
    TruncatedFrame,
    decode_frame,
    encode_frame,
    parse_response,
    render_response,
)
from minirel.errors import ProtocolError


class TestFraming:
    def test_golden_single_byte(self):
        assert encode_frame(b"x") == b"\x00\x00\x00\x01x"
        assert encode_frame(b"x").hex() == "0000000178"

    def test_empty_payload(self):
        assert encode_frame(b"") == b"\x00\x00\x00\x00"
        assert decode_frame(io.BytesIO(b"\x00\x00\x00\x00")) == b""

    @given(st.binary(max_size=4096))
    def test_round_trip(self, payload):
        assert decode_frame(io.BytesIO(encode_frame(payload))) == payload

    def test_two_frames_back_to_back(self):
        stream = io.BytesIO(encode_frame(b"ab") + encode_frame(b"c"))
        assert decode_frame(stream) == b"ab"
        assert decode_frame(stream) == b"c"
        with pytest.raises(ConnectionClosed):
            decode_frame(stream)

    def test_payload_at_the_limit(self):
        payload = b"z" * MAX_PAYLOAD
        assert decode_frame(io.BytesIO(encode_frame(payload))) == payload

    def test_oversize_encode(self):
        with pytest.raises(FrameTooLarge):
            encode_frame(b"z" * (MAX_PAYLOAD + 1))

    def test_oversize_declared_length(self):
        header = (MAX_PAYLOAD + 1).to_bytes(4, "big")
        with pytest.raises(FrameTooLarge):
            decode_frame(io.BytesIO(header))

    def test_truncated_payload(self):
        stream = io.BytesIO(b"\x00\x00\x00\x05abc")
        with pytest.raises(TruncatedFrame):
            decode_frame(stream)

    def test_truncated_header(self):
        with pytest.raises(TruncatedFrame):
            decode_frame(io.BytesIO(b"\x00\x00"))

    def test_clean_close(self):
        with pytest.raises(ConnectionClosed):
            decode_frame(io.BytesIO(b""))


class TestResponseGrammar:
    def test_rows_golden(self):
        result = RowsResult(("id", "name"), (("1", "a"), ("2", "b")))
        assert render_response(result) == "OK rows=2\nid\tname\n1\ta\n2\tb"

    def test_empty_result_keeps_header(self):
        result = RowsResult(("id",), ())
        assert render_response(result) == "OK rows=0\nid"
        assert parse_response("OK rows=0\nid") == result

    def test_count_golden(self):
        assert render_response(CountResult(3)) == "OK count=3"
        assert parse_response("OK count=3") == CountResult(3)

    def test_error_golden(self):
        rendered = render_response(ErrorResult("SYNTAX", "bad token"))
        assert rendered == "ERR SYNTAX bad token"
        assert parse_response(rendered) == ErrorResult("SYNTAX", "bad token")

    def test_error_with_empty_message(self):
        assert render_response(ErrorResult("INTERNAL", "")) == "ERR INTERNAL"
        assert parse_response("ERR INTERNAL") == ErrorResult("INTERNAL", "")

    def test_cell_escapes_are_lossless(self):
        awkward = RowsResult(("c",), (("a\tb",), ("x\ny",), ("z\\w",), ("",)))
        rendered = render_response(awkward)
        assert "a\\tb" in rendered
        assert parse_response(rendered) == awkward

    def test_error_message_with_newline_stays_one_line(self):
        rendered = render_response(ErrorResult("SYNTAX", "line1\nline2"))
        assert "\n" not in rendered
        assert parse_response(rendered).message == "line1\nline2"

    rows_strategy = st.builds(
        RowsResult,
        st.lists(st.text(alphabet="abc\t\n\\ é", max_size=6), min_size=1,
                 max_size=4).map(tuple),
    ).flatmap(lambda probe: st.builds(
        RowsResult,
        st.just(probe.columns),
        st.lists(
            st.lists(st.text(alphabet="abc\t\n\\ é", max_size=6),
                     min_size=len(probe.columns),
                     max_size=len(probe.columns)).map(tuple),
            max_size=5).map(tuple)))

    @given(st.one_of(
        rows_strategy,
        st.builds(CountResult, st.integers(min_value=0, max_value=10 ** 9)),
        st.builds(ErrorResult,
                  st.sampled_from(["SYNTAX", "CONSTRAINT", "INTERNAL"]),
                  st.text(alphabet="abc\t\n\\ é", max_size=12)),
    ))
    def test_parse_render_bijection(self, response):
        rendered = render_response(response)
        assert parse_response(rendered) == response
        assert render_response(parse_response(rendered)) == rendered

    @pytest.mark.parametrize("text", [
        "",
        "NOPE",
        "OK rows=x\nid",
        "OK rows=01\nid\n1",
        "OK rows=2\nid\n1",
        "OK rows=0\nid\textra\n",
        "OK rows=1\nid\na\tb",
        "OK count=3\nextra",
        "OK count=-1",
        "ERR",
        "ERR SYNTAX bad\nline",
        "OK rows=1\nid\nbad\\escape",
    ])
    def test_malformed_responses_rejected(self, text):
        with pytest.raises(ProtocolError):
            parse_response(text)
