"""Chat gateway: digests, sessions, transcripts, record/replay."""

from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from loopinv.gateway import (FORMALIZER, SYNTHESIZER, ChatSession,
                             GatewayError, RecordingBackend, ReplayBackend,
                             ReplayMissError, TokenCount, Transcript,
                             TranscriptEntry, TranscriptError,
                             load_transcript, merge_transcripts, record,
                             request_digest, save_transcript, send)


class EchoBackend:
    def complete(self, role, prompt, history):
        return f"echo:{prompt}", TokenCount(len(prompt), 5)


class TestDigest:
    def test_deterministic(self):
        assert (request_digest(SYNTHESIZER, "hello")
                == request_digest(SYNTHESIZER, "hello"))

    def test_role_separates(self):
        assert (request_digest(SYNTHESIZER, "hello")
                != request_digest(FORMALIZER, "hello"))

    def test_is_sha256_hex(self):
        d = request_digest(SYNTHESIZER, "x")
        assert len(d) == 64
        assert set(d) <= set("0123456789abcdef")

    @given(st.text(min_size=1), st.text(min_size=1))
    def test_distinct_prompts_distinct_digests(self, a, b):
        if a == b:
            return
        assert request_digest(SYNTHESIZER, a) != request_digest(SYNTHESIZER, b)


class TestTokenCount:
    def test_addition(self):
        assert TokenCount(1, 2) + TokenCount(3, 4) == TokenCount(4, 6)

    def test_total(self):
        assert TokenCount(10, 5).total == 15


class TestChatSession:
    def test_send_accumulates_history_and_tokens(self):
        s = ChatSession(SYNTHESIZER, EchoBackend())
        out1 = send(s, "first")
        out2 = send(s, "second")
        assert out1 == "echo:first"
        assert out2 == "echo:second"
        assert [m.speaker for m in s.messages] == ["user", "assistant"] * 2
        assert s.token_count == TokenCount(11, 10)
        assert [e.prompt for e in s.exchanges] == ["first", "second"]

    def test_empty_prompt_rejected(self):
        s = ChatSession(SYNTHESIZER, EchoBackend())
        with pytest.raises(GatewayError):
            send(s, "")


class TestTranscript:
    def entry(self, role, prompt, response):
        return TranscriptEntry(request_digest(role, prompt), response,
                               TokenCount(3, 4))

    def test_duplicate_digest_rejected(self):
        e = self.entry(SYNTHESIZER, "p", "r")
        with pytest.raises(TranscriptError):
            Transcript((e, e))

    def test_lookup_by_digest(self):
        e = self.entry(SYNTHESIZER, "p", "r")
        t = Transcript((e,))
        assert t.lookup(e.digest) is e
        assert t.lookup("0" * 64) is None

    def test_save_load_round_trip(self, tmp_path):
        t = Transcript((self.entry(SYNTHESIZER, "p1", "r1"),
                        self.entry(FORMALIZER, "p2", "r2 with\nnewline")))
        path = tmp_path / "t.transcript"
        save_transcript(t, path)
        again = load_transcript(path)
        assert again == t

    def test_header_is_first_line(self, tmp_path):
        t = Transcript((self.entry(SYNTHESIZER, "p", "r"),))
        path = tmp_path / "t.transcript"
        save_transcript(t, path)
        first = path.read_text(encoding="utf-8").splitlines()[0]
        header = json.loads(first)
        assert header == {"format": "chat-transcript", "version": 1}

    def test_load_rejects_wrong_format(self, tmp_path):
        path = tmp_path / "bad.transcript"
        path.write_text('{"format": "something-else", "version": 1}\n',
                        encoding="utf-8")
        with pytest.raises(TranscriptError):
            load_transcript(path)

    def test_load_rejects_wrong_version(self, tmp_path):
        path = tmp_path / "bad.transcript"
        path.write_text('{"format": "chat-transcript", "version": 99}\n',
                        encoding="utf-8")
        with pytest.raises(TranscriptError):
            load_transcript(path)

    def test_load_reports_bad_line_number(self, tmp_path):
        path = tmp_path / "bad.transcript"
        path.write_text('{"format": "chat-transcript", "version": 1}\n'
                        'not json\n', encoding="utf-8")
        with pytest.raises(TranscriptError) as exc:
            load_transcript(path)
        assert ":2:" in str(exc.value)

    def test_merge_rejects_conflicts(self):
        a = Transcript((TranscriptEntry(request_digest(SYNTHESIZER, "p"),
                                        "r1", TokenCount(1, 1)),))
        b = Transcript((TranscriptEntry(request_digest(SYNTHESIZER, "p"),
                                        "r2", TokenCount(1, 1)),))
        with pytest.raises(TranscriptError):
            merge_transcripts([a, b])

    def test_merge_dedupes_identical(self):
        e = TranscriptEntry(request_digest(SYNTHESIZER, "p"), "r",
                            TokenCount(1, 1))
        merged = merge_transcripts([Transcript((e,)), Transcript((e,))])
        assert len(merged.entries) == 1


class TestReplayBackend:
    def test_replay_hits(self):
        entry = TranscriptEntry(request_digest(SYNTHESIZER, "p"), "reply",
                                TokenCount(7, 2))
        backend = ReplayBackend(Transcript((entry,)))
        s = ChatSession(SYNTHESIZER, backend)
        assert send(s, "p") == "reply"
        assert s.token_count == TokenCount(7, 2)

    def test_replay_miss_names_digest(self):
        backend = ReplayBackend(Transcript(()))
        s = ChatSession(SYNTHESIZER, backend)
        with pytest.raises(ReplayMissError) as exc:
            send(s, "unseen prompt")
        assert request_digest(SYNTHESIZER, "unseen prompt") in str(exc.value)
        assert exc.value.role == SYNTHESIZER


class TestRecordingBackend:
    def test_record_replay_round_trip(self, tmp_path):
        rec = RecordingBackend(EchoBackend())
        s = ChatSession(SYNTHESIZER, rec)
        send(s, "alpha")
        send(s, "beta")
        path = tmp_path / "t.transcript"
        save_transcript(rec.transcript(), path)

        replay = ChatSession(SYNTHESIZER, ReplayBackend(load_transcript(path)))
        assert send(replay, "alpha") == "echo:alpha"
        assert send(replay, "beta") == "echo:beta"

    def test_same_exchange_recorded_once(self):
        rec = RecordingBackend(EchoBackend())
        s1 = ChatSession(SYNTHESIZER, rec)
        s2 = ChatSession(SYNTHESIZER, rec)
        send(s1, "same")
        send(s2, "same")
        assert len(rec.transcript().entries) == 1

    def test_record_helper_captures_session(self):
        s = ChatSession(SYNTHESIZER, EchoBackend())
        send(s, "one")
        t = record(s)
        assert t.lookup(request_digest(SYNTHESIZER, "one")).response == "echo:one"
